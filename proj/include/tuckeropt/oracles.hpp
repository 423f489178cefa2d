#pragma once

// Slow dense references for the structured kernels. Everything here works on
// explicit n_1 x ... x n_d arrays with its own unfolding, Kronecker and SVD
// code (Jacobi SVD rather than divide and conquer), so agreement with the
// fast path is a meaningful check. Only for small tensors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "tuckeropt/error.hpp"
#include "tuckeropt/tangent.hpp"
#include "tuckeropt/tensor.hpp"
#include "tuckeropt/tucker.hpp"

namespace tuckeropt::oracles {

namespace naive {

inline std::vector<std::size_t> multi_index(std::size_t lin, const Dims& dims) {
  std::vector<std::size_t> idx(dims.size());
  for (std::size_t k = 0; k < dims.size(); ++k) {
    idx[k] = lin % dims[k];
    lin /= dims[k];
  }
  return idx;
}

/// Column of entry idx in the mode-k unfolding: sum_{l != k} i_l J_l with
/// J_l the product of the earlier non-k dims.
inline std::size_t unfold_col(std::span<const std::size_t> idx, const Dims& dims,
                              std::size_t k) {
  std::size_t col = 0, stride = 1;
  for (std::size_t l = 0; l < dims.size(); ++l) {
    if (l == k) continue;
    col += idx[l] * stride;
    stride *= dims[l];
  }
  return col;
}

inline Matrix unfold(const DenseTensor& x, std::size_t k) {
  const Dims& dims = x.dims();
  std::size_t cols = 1;
  for (std::size_t l = 0; l < dims.size(); ++l)
    if (l != k) cols *= dims[l];
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(dims[k]), static_cast<Eigen::Index>(cols));
  for (std::size_t lin = 0; lin < x.size(); ++lin) {
    const auto idx = multi_index(lin, dims);
    m(static_cast<Eigen::Index>(idx[k]), static_cast<Eigen::Index>(unfold_col(idx, dims, k))) =
        x.values()[lin];
  }
  return m;
}

inline DenseTensor fold(const Matrix& m, std::size_t k, const Dims& dims) {
  DenseTensor x(dims);
  for (std::size_t lin = 0; lin < x.size(); ++lin) {
    const auto idx = multi_index(lin, dims);
    x.values()[lin] =
        m(static_cast<Eigen::Index>(idx[k]), static_cast<Eigen::Index>(unfold_col(idx, dims, k)));
  }
  return x;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// U_d (x) ... (x) U_1 with U_k left out; matches the unfolding column order.
inline Matrix kron_except(const std::vector<Matrix>& factors, std::size_t k) {
  Matrix out = Matrix::Ones(1, 1);
  for (std::size_t j = 0; j < factors.size(); ++j)
    if (j != k) out = kron(factors[j], out);
  return out;
}

inline DenseTensor mode_mul(const DenseTensor& x, std::size_t k, const Matrix& a) {
  Dims out = x.dims();
  out[k] = static_cast<std::size_t>(a.rows());
  return naive::fold(a * naive::unfold(x, k), k, out);
}

/// G x_1 U_1 ... x_d U_d through the single identity X_(1) = U_1 G_(1) (U_d (x) ... (x) U_2)^T.
inline DenseTensor reconstruct(const DenseTensor& core, const std::vector<Matrix>& factors) {
  Dims dims(factors.size());
  for (std::size_t k = 0; k < factors.size(); ++k)
    dims[k] = static_cast<std::size_t>(factors[k].rows());
  if (product(core.dims()) == 0) return DenseTensor(dims);
  const Matrix x0 = factors[0] * naive::unfold(core, 0) * kron_except(factors, 0).transpose();
  return naive::fold(x0, 0, dims);
}

inline DenseTensor apply_modes(DenseTensor a, const std::vector<Matrix>& ops) {
  for (std::size_t k = 0; k < ops.size(); ++k) a = mode_mul(a, k, ops[k]);
  return a;
}

inline Matrix proj(const Matrix& u) { return u * u.transpose(); }

inline Matrix perp_proj(const Matrix& u) {
  return Matrix::Identity(u.rows(), u.rows()) - u * u.transpose();
}

inline Matrix hcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

inline double norm(const DenseTensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v * v;
  return std::sqrt(s);
}

inline Matrix leading_left(const Matrix& m, std::size_t count) {
  if (count == 0 || m.size() == 0)
    return Matrix::Zero(m.rows(), static_cast<Eigen::Index>(count));
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU);
  return svd.matrixU().leftCols(static_cast<Eigen::Index>(count));
}

inline Matrix pinv(const Matrix& m) {
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double tol = 1e-12 * std::max<double>(1.0, s.size() > 0 ? s(0) : 0.0);
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Orthonormal basis of span(u)^perp from a full Jacobi SVD of P_u^perp.
inline Matrix perp_basis(const Matrix& u) {
  const auto n = u.rows();
  return leading_left(perp_proj(u), static_cast<std::size_t>(n - u.cols()));
}

inline std::vector<std::size_t> deficient(const RankTuple& rbar, const RankTuple& r) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < r.order(); ++k)
    if (rbar[k] < r[k]) out.push_back(k);
  return out;
}

/// G x_k W x_{j != k} U_j.
inline DenseTensor replace_factor(const TuckerTensor& x, std::size_t k, const Matrix& w) {
  std::vector<Matrix> f = x.factors();
  f[k] = w;
  return reconstruct(x.core(), f);
}

/// (A x_{j != k} U_j^T)_(k) = A_(k) (U_d (x) ... (x) U_1), U_k left out.
inline Matrix contracted(const DenseTensor& a, const std::vector<Matrix>& factors,
                         std::size_t k) {
  return naive::unfold(a, k) * kron_except(factors, k);
}

}  // namespace naive

// ---------------------------------------------------------------------------
// Dense references for the fast kernels
// ---------------------------------------------------------------------------

inline Matrix kron(const Matrix& a, const Matrix& b) { return naive::kron(a, b); }

inline DenseTensor ref_to_dense(const TuckerTensor& t) {
  return naive::reconstruct(t.core(), t.factors());
}

inline std::vector<double> ref_entries_at(const TuckerTensor& t,
                                          std::span<const std::size_t> flat_idx) {
  const DenseTensor x = ref_to_dense(t);
  const std::size_t d = t.order();
  std::vector<double> out(flat_idx.size() / d);
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = x(flat_idx.subspan(e * d, d));
  return out;
}

inline Matrix ref_multi_mode_contract(const DenseTensor& a, const std::vector<Matrix>& factors,
                                      std::size_t k) {
  return naive::contracted(a, factors, k);
}

/// Sequentially truncated HOSVD on the dense array.
inline DenseTensor ref_hosvd(const DenseTensor& a, const RankTuple& r) {
  DenseTensor x = a;
  for (std::size_t k = 0; k < a.order(); ++k) {
    const Matrix u = naive::leading_left(naive::unfold(x, k), r[k]);
    x = naive::mode_mul(x, k, naive::proj(u));
  }
  return x;
}

inline DenseTensor ref_hosvd_truncate(const TuckerTensor& t, const RankTuple& rbar) {
  return ref_hosvd(ref_to_dense(t), rbar);
}

inline DenseTensor ref_embed(const TangentVector& v) {
  const TuckerTensor& x = v.anchor;
  std::vector<Matrix> ext(x.order());
  for (std::size_t k = 0; k < x.order(); ++k) ext[k] = naive::hcat(x.factor(k), v.ucomp[k]);
  DenseTensor out = naive::reconstruct(v.core, ext);
  for (std::size_t k = 0; k < x.order(); ++k)
    if (v.udot[k].cols() > 0) out += naive::replace_factor(x, k, v.udot[k]);
  return out;
}

inline DenseTensor ref_add_scaled_tangent(const TuckerTensor& x, double s,
                                          const TangentVector& v) {
  return ref_to_dense(x) + s * ref_embed(v);
}

/// Complement built from leading left singular vectors of the explicit
/// unfoldings, deficient modes in increasing order.
inline std::vector<Matrix> ref_complement(const TuckerTensor& x, const DenseTensor& a,
                                          const RankTuple& r) {
  const std::size_t d = x.order();
  const RankTuple rbar = x.rank();
  std::vector<Matrix> comp(d);
  for (std::size_t k = 0; k < d; ++k) comp[k] = Matrix(x.dims()[k], 0);
  for (std::size_t k = 0; k < d; ++k) {
    if (rbar[k] >= r[k]) continue;
    std::vector<Matrix> ops(d);
    for (std::size_t j = 0; j < d; ++j) {
      const auto n = static_cast<Eigen::Index>(x.dims()[j]);
      if (j == k || (rbar[j] < r[j] && j > k))
        ops[j] = Matrix::Identity(n, n);
      else if (rbar[j] < r[j])
        ops[j] = naive::proj(naive::hcat(x.factor(j), comp[j]));
      else
        ops[j] = naive::proj(x.factor(j));
    }
    const Matrix m = naive::perp_proj(x.factor(k)) * naive::unfold(naive::apply_modes(a, ops), k);
    comp[k] = naive::leading_left(m, r[k] - rbar[k]);
  }
  return comp;
}

/// Dense approximate projection for given complements.
inline DenseTensor ref_approx_project(const TuckerTensor& x, const DenseTensor& a,
                                      const std::vector<Matrix>& comp) {
  const std::size_t d = x.order();
  std::vector<Matrix> ps(d);
  for (std::size_t k = 0; k < d; ++k) ps[k] = naive::proj(naive::hcat(x.factor(k), comp[k]));
  DenseTensor out = naive::apply_modes(a, ps);
  for (std::size_t k = 0; k < d; ++k) {
    if (x.rank()[k] == 0) continue;
    const Matrix w = (Matrix::Identity(ps[k].rows(), ps[k].cols()) - ps[k]) *
                     naive::contracted(a, x.factors(), k) *
                     naive::pinv(naive::unfold(x.core(), k));
    out += naive::replace_factor(x, k, w);
  }
  return out;
}

inline DenseTensor ref_approx_project(const TuckerTensor& x, const DenseTensor& a,
                                      const RankTuple& r) {
  return ref_approx_project(x, a, ref_complement(x, a, r));
}

struct RefPartial {
  DenseTensor direction;
  std::size_t branch = 0;
  std::vector<double> branch_norms;
};

inline RefPartial ref_partial_project(const TuckerTensor& x, const DenseTensor& a,
                                      const std::vector<Matrix>& comp) {
  const std::size_t d = x.order();
  std::vector<DenseTensor> branches;
  std::vector<Matrix> ps(d);
  for (std::size_t k = 0; k < d; ++k) ps[k] = naive::proj(naive::hcat(x.factor(k), comp[k]));
  branches.push_back(naive::apply_modes(a, ps));
  for (std::size_t k = 0; k < d; ++k) {
    if (x.rank()[k] == 0) {
      branches.emplace_back(x.dims());
      continue;
    }
    const Matrix w = naive::perp_proj(x.factor(k)) * naive::contracted(a, x.factors(), k) *
                     naive::pinv(naive::unfold(x.core(), k));
    branches.push_back(naive::replace_factor(x, k, w));
  }
  RefPartial out;
  for (const auto& b : branches) out.branch_norms.push_back(naive::norm(b));
  for (std::size_t b = 1; b <= d; ++b)
    if (out.branch_norms[b] > out.branch_norms[out.branch]) out.branch = b;
  out.direction = branches[out.branch];
  return out;
}

inline RefPartial ref_partial_project(const TuckerTensor& x, const DenseTensor& a,
                                      const RankTuple& r) {
  return ref_partial_project(x, a, ref_complement(x, a, r));
}

/// Dense normal-cone residual: ||grad x_k Q_k|| with Q_k = P_{U_k} off the
/// deficient set and the identity on it, plus the factor residuals.
inline double ref_stationarity(const TuckerTensor& x, const DenseTensor& grad,
                               const RankTuple& r) {
  const std::size_t d = x.order();
  const RankTuple rbar = x.rank();
  std::vector<Matrix> ops(d);
  for (std::size_t k = 0; k < d; ++k)
    ops[k] = rbar[k] < r[k] ? Matrix::Identity(x.dims()[k], x.dims()[k])
                            : naive::proj(x.factor(k));
  const double core = naive::norm(naive::apply_modes(grad, ops));
  double total = core * core;
  for (std::size_t k = 0; k < d; ++k) {
    if (rbar[k] < r[k] || rbar[k] == 0) continue;
    const double m = (naive::perp_proj(x.factor(k)) * naive::contracted(grad, x.factors(), k) *
                      naive::unfold(x.core(), k).transpose())
                         .norm();
    total += m * m;
  }
  return std::sqrt(total);
}

// ---------------------------------------------------------------------------
// Exact tangent-cone projection for tiny instances
// ---------------------------------------------------------------------------

struct ConeProjection {
  DenseTensor projection;
  double norm = 0.0;
  std::vector<Matrix> complement;
  std::size_t best_restart = 0;
};

namespace detail {

/// ||proj of A onto the tangent subspace with complements comp||^2, using the
/// orthogonality of the core term and the factor terms.
inline double subspace_value(const TuckerTensor& x, const DenseTensor& a,
                             const std::vector<Matrix>& comp) {
  return std::pow(naive::norm(ref_approx_project(x, a, comp)), 2);
}

}  // namespace detail

/// Projection of A onto the tangent cone of M_{<=r} at X. The cone is the
/// union over complements Ucomp_k (k in the deficient set) of linear
/// subspaces, so the projection is the largest subspace projection. The
/// maximization is nonconvex; each restart starts from random complements
/// and runs block-coordinate ascent where every block update is an exact
/// symmetric eigenproblem. The result is the best over restarts (ties to the
/// earliest), which is a lower bound on the true projection norm. Restart t
/// is seeded from (seed, t), so more restarts never lower the value.
inline ConeProjection exact_tangent_projection_oracle(const TuckerTensor& x,
                                                      const DenseTensor& a,
                                                      const RankTuple& r,
                                                      std::size_t restarts,
                                                      std::uint64_t seed,
                                                      std::size_t max_sweeps = 50) {
  const std::size_t d = x.order();
  if (d > 3)
    throw InstanceTooLargeError("exact_tangent_projection_oracle: order " + std::to_string(d) +
                                " exceeds 3");
  for (std::size_t n : x.dims())
    if (n > 6)
      throw InstanceTooLargeError("exact_tangent_projection_oracle: dims " +
                                  dims_to_string(x.dims()) + " exceed 6 in some mode");
  tuckeropt::detail::require_dims(a.dims() == x.dims(), "exact_tangent_projection_oracle: dims mismatch");
  if (restarts == 0)
    throw PreconditionError("exact_tangent_projection_oracle: restarts must be >= 1");
  const RankTuple rbar = x.rank();
  if (!rbar.all_leq(r))
    throw PreconditionError("exact_tangent_projection_oracle: rank(X) not <= r");
  const auto def = naive::deficient(rbar, r);

  std::vector<Matrix> nb(d), b(d);
  for (std::size_t k = 0; k < d; ++k) {
    nb[k] = Matrix::Zero(x.dims()[k], x.dims()[k]);
    if (rbar[k] == 0) continue;
    const Matrix gk = naive::unfold(x.core(), k);
    const Matrix n = naive::contracted(a, x.factors(), k) * naive::pinv(gk) * gk;
    nb[k] = n * n.transpose();
  }

  ConeProjection best;
  best.norm = -1.0;
  for (std::size_t t = 0; t < restarts; ++t) {
    std::seed_seq ss{seed, static_cast<std::uint64_t>(t)};
    std::mt19937_64 rng(ss);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Matrix> comp(d);
    for (std::size_t k = 0; k < d; ++k) {
      comp[k] = Matrix(x.dims()[k], 0);
      if (rbar[k] >= r[k]) continue;
      Matrix g(x.dims()[k], r[k] - rbar[k]);
      for (Eigen::Index j = 0; j < g.cols(); ++j)
        for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
      g = naive::perp_proj(x.factor(k)) * g;
      comp[k] = naive::leading_left(g, r[k] - rbar[k]);
    }
    double val = detail::subspace_value(x, a, comp);
    for (std::size_t sweep = 0; sweep < max_sweeps && !def.empty(); ++sweep) {
      const double before = val;
      for (std::size_t k : def) {
        std::vector<Matrix> ops(d);
        for (std::size_t j = 0; j < d; ++j)
          ops[j] = j == k ? Matrix::Identity(x.dims()[j], x.dims()[j])
                          : naive::proj(naive::hcat(x.factor(j), comp[j]));
        const Matrix m = naive::unfold(naive::apply_modes(a, ops), k);
        const Matrix z = naive::perp_basis(x.factor(k));
        const Matrix h = z.transpose() * (m * m.transpose() - nb[k]) * z;
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
        const auto need = static_cast<Eigen::Index>(r[k] - rbar[k]);
        // eigenvalues ascend; take the top `need`
        comp[k] = z * es.eigenvectors().rightCols(need);
      }
      val = detail::subspace_value(x, a, comp);
      if (val - before <= 1e-12 * std::max(val, std::numeric_limits<double>::min())) break;
    }
    if (std::sqrt(val) > best.norm) {
      best.norm = std::sqrt(val);
      best.complement = comp;
      best.best_restart = t;
    }
  }
  best.projection = ref_approx_project(x, a, best.complement);
  best.norm = naive::norm(best.projection);
  return best;
}

// ---------------------------------------------------------------------------
// Finite differences and the complement inequality
// ---------------------------------------------------------------------------

/// Central differences of f at x in the listed coordinates (flat, d per entry).
inline std::vector<double> finite_diff_gradient(
    const std::function<double(const DenseTensor&)>& f, const DenseTensor& x,
    std::span<const std::size_t> coords, double h) {
  if (!(h > 0.0)) throw PreconditionError("finite_diff_gradient: h must be positive");
  const std::size_t d = x.order();
  std::vector<double> out(coords.size() / d);
  DenseTensor y = x;
  for (std::size_t e = 0; e < out.size(); ++e) {
    const auto idx = coords.subspan(e * d, d);
    const double orig = y(idx);
    y(idx) = orig + h;
    const double fp = f(y);
    y(idx) = orig - h;
    const double fm = f(y);
    y(idx) = orig;
    out[e] = (fp - fm) / (2.0 * h);
  }
  return out;
}

struct InequalitySides {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// lhs = ||A x_{k in I} P_{[U_k Ucomp_k]} x_{k notin I} P_{U_k}||,
/// rhs = ||A x_{k notin I} P_{U_k}|| * prod_{k in I} sqrt((r_k - rbar_k) / min(n_k, prod_{j!=k} n_j)).
inline InequalitySides complement_inequality(const TuckerTensor& x, const DenseTensor& a,
                                             const RankTuple& r,
                                             const std::vector<Matrix>& comp) {
  const std::size_t d = x.order();
  const RankTuple rbar = x.rank();
  std::vector<Matrix> lops(d), rops(d);
  double factor = 1.0;
  for (std::size_t k = 0; k < d; ++k) {
    const auto n = static_cast<Eigen::Index>(x.dims()[k]);
    if (rbar[k] < r[k]) {
      lops[k] = naive::proj(naive::hcat(x.factor(k), comp[k]));
      rops[k] = Matrix::Identity(n, n);
      const double m =
          static_cast<double>(std::min(x.dims()[k], product(x.dims()) / x.dims()[k]));
      factor *= std::sqrt(static_cast<double>(r[k] - rbar[k]) / m);
    } else {
      lops[k] = rops[k] = naive::proj(x.factor(k));
    }
  }
  InequalitySides s;
  s.lhs = naive::norm(naive::apply_modes(a, lops));
  s.rhs = factor * naive::norm(naive::apply_modes(a, rops));
  return s;
}

}  // namespace tuckeropt::oracles
