#pragma once

// Sparse tensor-times-matrix chains. Every projection in the library reduces
// to contracting a sparse ambient tensor (observations or a gradient) with a
// subset of the Tucker factors; the kernels here do that in
// O(nnz * prod(contracted ranks)) without densifying.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "tuckeropt/tensor.hpp"

namespace tuckeropt {

/// Factor list for a partial contraction; a null entry keeps that mode raw.
using FactorRefs = std::vector<const Matrix*>;

namespace detail {

inline Dims contracted_dims(const Dims& dims, const FactorRefs& factors) {
  require_dims(factors.size() == dims.size(), "contract: factor count mismatch");
  Dims out(dims.size());
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (factors[k] == nullptr) {
      out[k] = dims[k];
    } else {
      require_dims(static_cast<std::size_t>(factors[k]->rows()) == dims[k],
                   "contract: factor " + std::to_string(k + 1) + " has " +
                       std::to_string(factors[k]->rows()) + " rows, mode size is " +
                       std::to_string(dims[k]));
      out[k] = static_cast<std::size_t>(factors[k]->cols());
    }
  }
  return out;
}

/// Kronecker row prod_{c in modes} U_c(i_c, :) scaled by `v`, ordered with the
/// first listed mode fastest.
inline void kron_row(double v, std::span<const std::size_t> idx,
                     const std::vector<std::size_t>& modes,
                     const FactorRefs& factors, std::vector<double>& w) {
  w.assign(1, v);
  for (std::size_t c : modes) {
    const Matrix& u = *factors[c];
    const std::size_t len = w.size();
    const auto rc = static_cast<std::size_t>(u.cols());
    w.resize(len * rc);
    const auto row = static_cast<Eigen::Index>(idx[c]);
    for (std::size_t b = rc; b-- > 0;) {
      const double ub = u(row, static_cast<Eigen::Index>(b));
      for (std::size_t a = 0; a < len; ++a) w[a + len * b] = w[a] * ub;
    }
  }
}

}  // namespace detail

/// S x_{k : factors[k] != null} factors[k]^T as a dense tensor. Contracted
/// modes take size cols(factors[k]); raw modes keep n_k.
inline DenseTensor contract_modes(const SparseCooTensor& s,
                                  const FactorRefs& factors) {
  const Dims out_dims = detail::contracted_dims(s.dims(), factors);
  const std::size_t d = s.order();
  DenseTensor out(out_dims);

  std::vector<std::size_t> stride(d, 1);
  for (std::size_t k = 1; k < d; ++k) stride[k] = stride[k - 1] * out_dims[k - 1];

  std::vector<std::size_t> contracted, raw;
  for (std::size_t k = 0; k < d; ++k)
    (factors[k] ? contracted : raw).push_back(k);

  // Offsets of every combination of contracted indices, first mode fastest.
  std::vector<std::size_t> offs(1, 0);
  for (std::size_t c : contracted) {
    const std::size_t len = offs.size();
    offs.resize(len * out_dims[c]);
    for (std::size_t b = out_dims[c]; b-- > 0;)
      for (std::size_t a = 0; a < len; ++a) offs[a + len * b] = offs[a] + b * stride[c];
  }

  double* dst = out.data();
  std::vector<double> w;
  for (std::size_t e = 0; e < s.nnz(); ++e) {
    const auto idx = s.index(e);
    std::size_t base = 0;
    for (std::size_t k : raw) base += idx[k] * stride[k];
    detail::kron_row(s.values()[e], idx, contracted, factors, w);
    for (std::size_t t = 0; t < w.size(); ++t) dst[base + offs[t]] += w[t];
  }
  return out;
}

/// (S x_{j != k} U_j^T)_(k): the n_k x prod_{j != k} r_j matrix appearing in
/// every tangent-space formula. `factors[k]` is ignored.
inline Matrix multi_mode_contract(const SparseCooTensor& s,
                                  const std::vector<Matrix>& factors,
                                  std::size_t k) {
  detail::check_mode(s.order(), k, "multi_mode_contract");
  detail::require_dims(factors.size() == s.order(),
                       "multi_mode_contract: factor count mismatch");
  FactorRefs refs(s.order());
  for (std::size_t j = 0; j < s.order(); ++j)
    refs[j] = (j == k) ? nullptr : &factors[j];
  return unfold(contract_modes(s, refs), k);
}

/// M_(k) M_(k)^T for M = S x_{j : factors[j] != null} factors[j]^T, with mode k
/// left raw. Only the n_k x n_k Gram matrix is formed: entries sharing the
/// same raw coordinates outside mode k are grouped and each group adds one
/// small outer product.
inline Matrix contracted_gram(const SparseCooTensor& s, FactorRefs factors,
                              std::size_t k) {
  detail::check_mode(s.order(), k, "contracted_gram");
  factors[k] = nullptr;
  detail::contracted_dims(s.dims(), factors);  // shape validation
  const std::size_t d = s.order();
  const std::size_t nk = s.dims()[k];

  std::vector<std::size_t> contracted, raw_other;
  for (std::size_t j = 0; j < d; ++j) {
    if (j == k) continue;
    (factors[j] ? contracted : raw_other).push_back(j);
  }
  std::size_t width = 1;
  for (std::size_t c : contracted) width *= static_cast<std::size_t>(factors[c]->cols());

  auto group_key = [&](std::size_t e) {
    const auto idx = s.index(e);
    std::size_t key = 0;
    for (std::size_t j : raw_other) key = key * s.dims()[j] + idx[j];
    return key;
  };
  std::vector<std::size_t> order(s.nnz());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> keys(s.nnz());
  for (std::size_t e = 0; e < s.nnz(); ++e) keys[e] = group_key(e);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    return s.index(a)[k] < s.index(b)[k];
  });

  Matrix gram = Matrix::Zero(static_cast<Eigen::Index>(nk), static_cast<Eigen::Index>(nk));
  std::vector<double> w;
  std::vector<std::size_t> rows;
  Matrix block;
  std::size_t pos = 0;
  while (pos < order.size()) {
    std::size_t end = pos;
    while (end < order.size() && keys[order[end]] == keys[order[pos]]) ++end;
    rows.clear();
    for (std::size_t t = pos; t < end; ++t) {
      const std::size_t ik = s.index(order[t])[k];
      if (rows.empty() || rows.back() != ik) rows.push_back(ik);
    }
    block.setZero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    std::size_t r = 0;
    for (std::size_t t = pos; t < end; ++t) {
      const std::size_t e = order[t];
      while (rows[r] != s.index(e)[k]) ++r;
      detail::kron_row(s.values()[e], s.index(e), contracted, factors, w);
      for (std::size_t c = 0; c < width; ++c)
        block(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) += w[c];
    }
    const Matrix bb = block * block.transpose();
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = 0; b < rows.size(); ++b)
        gram(static_cast<Eigen::Index>(rows[a]), static_cast<Eigen::Index>(rows[b])) +=
            bb(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    pos = end;
  }
  return gram;
}

/// Values of core x_k factors[k] at the given coordinates (flat, d per entry),
/// computed entry by entry without forming the dense tensor.
inline std::vector<double> tucker_entries(const DenseTensor& core,
                                          const std::vector<Matrix>& factors,
                                          std::span<const std::size_t> flat_idx) {
  const std::size_t d = core.order();
  detail::require_dims(factors.size() == d, "tucker_entries: factor count mismatch");
  for (std::size_t k = 0; k < d; ++k)
    detail::require_dims(static_cast<std::size_t>(factors[k].cols()) == core.dim(k),
                         "tucker_entries: factor/core shape mismatch in mode " +
                             std::to_string(k + 1));
  detail::require_dims(flat_idx.size() % d == 0, "tucker_entries: ragged index list");
  const std::size_t count = flat_idx.size() / d;
  std::vector<double> out(count);
  std::vector<double> buf_a, buf_b;
  for (std::size_t e = 0; e < count; ++e) {
    const auto idx = flat_idx.subspan(e * d, d);
    for (std::size_t k = 0; k < d; ++k)
      if (idx[k] >= static_cast<std::size_t>(factors[k].rows()))
        throw DimensionError("entries_at: index " + std::to_string(idx[k] + 1) +
                             " out of range in mode " + std::to_string(k + 1));
    buf_a.assign(core.values().begin(), core.values().end());
    std::size_t len = buf_a.size();
    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t rk = core.dim(k);
      if (rk == 0) {
        len = 0;
        break;
      }
      const std::size_t rest = len / rk;
      buf_b.assign(rest, 0.0);
      const auto row = static_cast<Eigen::Index>(idx[k]);
      for (std::size_t j = 0; j < rk; ++j) {
        const double u = factors[k](row, static_cast<Eigen::Index>(j));
        for (std::size_t t = 0; t < rest; ++t) buf_b[t] += buf_a[j + rk * t] * u;
      }
      buf_a.swap(buf_b);
      len = rest;
    }
    out[e] = len == 0 ? 0.0 : buf_a[0];
  }
  return out;
}

}  // namespace tuckeropt
