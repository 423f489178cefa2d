#pragma once

// Dense and sparse tensor containers plus the multilinear kernels that the
// rest of the library is written against.
//
// Conventions used throughout:
//  * modes and indices are 0-based in the C++ API (file formats are 1-based);
//  * dense storage is mode-1-fastest, so element (i_1, ..., i_d) lives at
//    i_1 + n_1 * (i_2 + n_2 * (i_3 + ...));
//  * the mode-k unfolding places (i_1, ..., i_d) at row i_k and column
//    sum_{l != k} i_l * J_l with J_l = prod_{m < l, m != k} n_m.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tuckeropt/error.hpp"

namespace tuckeropt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Dims = std::vector<std::size_t>;

inline std::size_t product(std::span<const std::size_t> dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

/// n_{-k}: product of all dimensions except mode k.
inline std::size_t product_except(std::span<const std::size_t> dims,
                                  std::size_t k) {
  std::size_t p = 1;
  for (std::size_t j = 0; j < dims.size(); ++j)
    if (j != k) p *= dims[j];
  return p;
}

inline std::string dims_to_string(std::span<const std::size_t> dims) {
  std::string s = "(";
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (k) s += ",";
    s += std::to_string(dims[k]);
  }
  return s + ")";
}

/// d-way array of doubles in mode-1-fastest order.
///
/// Zero-length modes are permitted so that the core of the zero tensor
/// (Tucker rank (0, ..., 0)) can be represented.
class DenseTensor {
 public:
  DenseTensor() = default;

  explicit DenseTensor(Dims dims)
      : dims_(std::move(dims)), values_(product(dims_), 0.0) {
    detail::require_dims(!dims_.empty(), "DenseTensor: order must be >= 1");
  }

  DenseTensor(Dims dims, std::vector<double> values)
      : dims_(std::move(dims)), values_(std::move(values)) {
    detail::require_dims(!dims_.empty(), "DenseTensor: order must be >= 1");
    detail::require_dims(values_.size() == product(dims_),
                         "DenseTensor: value count " +
                             std::to_string(values_.size()) +
                             " does not match dims " + dims_to_string(dims_));
  }

  std::size_t order() const { return dims_.size(); }
  const Dims& dims() const { return dims_; }
  std::size_t dim(std::size_t k) const { return dims_[k]; }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const double* data() const { return values_.data(); }
  double* data() { return values_.data(); }

  std::size_t linear_index(std::span<const std::size_t> idx) const {
    std::size_t lin = 0;
    for (std::size_t k = dims_.size(); k-- > 0;) lin = lin * dims_[k] + idx[k];
    return lin;
  }

  double operator()(std::span<const std::size_t> idx) const {
    return values_[linear_index(idx)];
  }
  double& operator()(std::span<const std::size_t> idx) {
    return values_[linear_index(idx)];
  }

  DenseTensor& operator+=(const DenseTensor& other) {
    detail::require_dims(dims_ == other.dims_, "DenseTensor +=: dims mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }
  DenseTensor& operator-=(const DenseTensor& other) {
    detail::require_dims(dims_ == other.dims_, "DenseTensor -=: dims mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
  }
  DenseTensor& operator*=(double c) {
    for (double& v : values_) v *= c;
    return *this;
  }

  friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
  friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
  friend DenseTensor operator*(double c, DenseTensor a) { return a *= c; }

  bool operator==(const DenseTensor&) const = default;

 private:
  Dims dims_;
  std::vector<double> values_;
};

/// Coordinate-list tensor. Entries are unique and sorted lexicographically by
/// index tuple (i_1 most significant), which makes equality deterministic.
class SparseCooTensor {
 public:
  SparseCooTensor() = default;

  explicit SparseCooTensor(Dims dims) : dims_(std::move(dims)) {
    detail::require_dims(!dims_.empty(), "SparseCooTensor: order must be >= 1");
  }

  /// `indices` holds nnz * d zero-based coordinates, entry-major.
  SparseCooTensor(Dims dims, std::vector<std::size_t> indices,
                  std::vector<double> values)
      : dims_(std::move(dims)) {
    const std::size_t d = dims_.size();
    detail::require_dims(d > 0, "SparseCooTensor: order must be >= 1");
    detail::require_dims(indices.size() == values.size() * d,
                         "SparseCooTensor: index/value count mismatch");
    const std::size_t nnz = values.size();
    for (std::size_t e = 0; e < nnz; ++e)
      for (std::size_t k = 0; k < d; ++k)
        if (indices[e * d + k] >= dims_[k])
          throw DimensionError("SparseCooTensor: index " +
                               std::to_string(indices[e * d + k] + 1) +
                               " out of range in mode " + std::to_string(k + 1));

    std::vector<std::size_t> order(nnz);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto less = [&](std::size_t a, std::size_t b) {
      return std::lexicographical_compare(
          indices.begin() + a * d, indices.begin() + (a + 1) * d,
          indices.begin() + b * d, indices.begin() + (b + 1) * d);
    };
    if (!std::is_sorted(order.begin(), order.end(), less))
      std::stable_sort(order.begin(), order.end(), less);

    indices_.resize(indices.size());
    values_.resize(nnz);
    for (std::size_t e = 0; e < nnz; ++e) {
      std::copy_n(indices.begin() + order[e] * d, d, indices_.begin() + e * d);
      values_[e] = values[order[e]];
    }
    for (std::size_t e = 1; e < nnz; ++e)
      if (std::equal(indices_.begin() + (e - 1) * d, indices_.begin() + e * d,
                     indices_.begin() + e * d))
        throw DimensionError("SparseCooTensor: duplicate index tuple");
  }

  std::size_t order() const { return dims_.size(); }
  const Dims& dims() const { return dims_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::size_t> indices() const { return indices_; }
  std::span<const std::size_t> index(std::size_t e) const {
    return std::span<const std::size_t>(indices_).subspan(e * dims_.size(),
                                                          dims_.size());
  }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// Same sparsity pattern, new values.
  SparseCooTensor with_values(std::vector<double> values) const {
    detail::require_dims(values.size() == values_.size(),
                         "SparseCooTensor::with_values: count mismatch");
    SparseCooTensor out;
    out.dims_ = dims_;
    out.indices_ = indices_;
    out.values_ = std::move(values);
    return out;
  }

  bool operator==(const SparseCooTensor&) const = default;

 private:
  Dims dims_;
  std::vector<std::size_t> indices_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Unfolding and mode products
// ---------------------------------------------------------------------------

namespace detail {

/// Splits dims around mode k into (prod_{m<k} n_m, n_k, prod_{m>k} n_m).
struct ModeSplit {
  std::size_t left, mid, right;
};

inline ModeSplit split(const Dims& dims, std::size_t k) {
  ModeSplit s{1, dims[k], 1};
  for (std::size_t m = 0; m < k; ++m) s.left *= dims[m];
  for (std::size_t m = k + 1; m < dims.size(); ++m) s.right *= dims[m];
  return s;
}

inline void check_mode(std::size_t order, std::size_t k, const char* who) {
  if (k >= order)
    throw DimensionError(std::string(who) + ": mode " + std::to_string(k + 1) +
                         " out of range for order " + std::to_string(order));
}

}  // namespace detail

/// Mode-k unfolding X_(k), an n_k x n_{-k} matrix.
inline Matrix unfold(const DenseTensor& x, std::size_t k) {
  detail::check_mode(x.order(), k, "unfold");
  const auto [left, mid, right] = detail::split(x.dims(), k);
  Matrix m(mid, left * right);
  const double* src = x.data();
  for (std::size_t r = 0; r < right; ++r)
    for (std::size_t i = 0; i < mid; ++i)
      for (std::size_t l = 0; l < left; ++l)
        m(i, l + left * r) = src[l + left * (i + mid * r)];
  return m;
}

/// Inverse of unfold: the tensorization of an n_k x n_{-k} matrix.
inline DenseTensor fold(const Matrix& m, std::size_t k, const Dims& dims) {
  detail::check_mode(dims.size(), k, "fold");
  const auto [left, mid, right] = detail::split(dims, k);
  if (static_cast<std::size_t>(m.rows()) != mid ||
      static_cast<std::size_t>(m.cols()) != left * right)
    throw DimensionError("fold: matrix is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", dims " +
                         dims_to_string(dims) + " need " + std::to_string(mid) +
                         "x" + std::to_string(left * right));
  DenseTensor x(dims);
  double* dst = x.data();
  for (std::size_t r = 0; r < right; ++r)
    for (std::size_t i = 0; i < mid; ++i)
      for (std::size_t l = 0; l < left; ++l)
        dst[l + left * (i + mid * r)] = m(i, l + left * r);
  return x;
}

/// k-mode product X x_k A with A of shape M x n_k, so that
/// unfold(result, k) == A * unfold(X, k).
inline DenseTensor mode_product(const DenseTensor& x, std::size_t k,
                                const Matrix& a) {
  detail::check_mode(x.order(), k, "mode_product");
  if (static_cast<std::size_t>(a.cols()) != x.dim(k))
    throw DimensionError("mode_product: matrix has " + std::to_string(a.cols()) +
                         " columns, mode " + std::to_string(k + 1) + " has size " +
                         std::to_string(x.dim(k)));
  const auto [left, mid, right] = detail::split(x.dims(), k);
  Dims out_dims = x.dims();
  out_dims[k] = static_cast<std::size_t>(a.rows());
  DenseTensor out(out_dims);
  const auto rows = static_cast<Eigen::Index>(a.rows());
  using ConstMap = Eigen::Map<const Matrix>;
  using Map = Eigen::Map<Matrix>;
  for (std::size_t r = 0; r < right; ++r) {
    ConstMap slab(x.data() + left * mid * r, static_cast<Eigen::Index>(left),
                  static_cast<Eigen::Index>(mid));
    Map dst(out.data() + left * rows * r, static_cast<Eigen::Index>(left), rows);
    dst.noalias() = slab * a.transpose();
  }
  return out;
}

/// X x_1 A_1 x_2 ... x_d A_d, skipping modes whose entry is null.
inline DenseTensor multi_mode_product(const DenseTensor& x,
                                      std::span<const Matrix* const> mats) {
  DenseTensor out = x;
  for (std::size_t k = 0; k < mats.size(); ++k)
    if (mats[k] != nullptr) out = mode_product(out, k, *mats[k]);
  return out;
}

inline double inner(const DenseTensor& x, const DenseTensor& y) {
  detail::require_dims(x.dims() == y.dims(), "inner: dims mismatch " +
                                                 dims_to_string(x.dims()) + " vs " +
                                                 dims_to_string(y.dims()));
  double s = 0.0;
  const auto xv = x.values();
  const auto yv = y.values();
  for (std::size_t i = 0; i < xv.size(); ++i) s += xv[i] * yv[i];
  return s;
}

inline double fro_norm(const DenseTensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v * v;
  return std::sqrt(s);
}

inline double fro_norm(const SparseCooTensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v * v;
  return std::sqrt(s);
}

inline double fro_norm(const Matrix& m) { return m.norm(); }

/// Sparse view of a dense tensor keeping every entry (zeros included), so the
/// sparse kernels can be reused on dense test inputs.
inline SparseCooTensor to_sparse(const DenseTensor& x) {
  const std::size_t d = x.order();
  std::vector<std::size_t> idx(x.size() * d);
  std::vector<double> vals(x.size());
  // Enumerate in lexicographic order (i_1 most significant) directly.
  std::vector<std::size_t> cur(d, 0);
  for (std::size_t e = 0; e < x.size(); ++e) {
    std::copy(cur.begin(), cur.end(), idx.begin() + e * d);
    vals[e] = x(cur);
    for (std::size_t k = d; k-- > 0;) {
      if (++cur[k] < x.dim(k)) break;
      cur[k] = 0;
    }
  }
  return SparseCooTensor(x.dims(), std::move(idx), std::move(vals));
}

inline DenseTensor to_dense(const SparseCooTensor& s) {
  DenseTensor x(s.dims());
  for (std::size_t e = 0; e < s.nnz(); ++e) x(s.index(e)) = s.values()[e];
  return x;
}

}  // namespace tuckeropt
