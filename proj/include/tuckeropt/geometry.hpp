#pragma once

// Variational geometry of the Tucker variety M_{<=r} at a Tucker point X:
// SVD-based complement selection, the approximate and partial projections of
// an ambient tensor onto the tangent cone, the normal-cone stationarity
// measure, and the angle constants of both projections.
//
// Ambient tensors are taken in sparse COO form (the gradient of a completion
// objective is supported on the observed entries). Dense overloads exist for
// tests and convert to COO.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "tuckeropt/contract.hpp"
#include "tuckeropt/error.hpp"
#include "tuckeropt/linalg.hpp"
#include "tuckeropt/tangent.hpp"
#include "tuckeropt/tensor.hpp"
#include "tuckeropt/tucker.hpp"

namespace tuckeropt {

struct StationarityReport {
  double value = 0.0;
  double core_residual = 0.0;
  std::vector<double> mode_residuals;
  std::vector<std::size_t> deficient_modes;
};

struct AngleConstants {
  double omega_tilde = 1.0;  // approximate projection
  double omega_hat = 1.0;    // partial projection
};

struct PartialProjection {
  TangentVector direction;
  std::size_t branch = 0;  // 0: core block, k >= 1: factor block of mode k
  std::vector<double> branch_norms;
};

namespace detail {

inline void check_bound(const TuckerTensor& x, const RankTuple& r, const char* who) {
  detail::require_dims(r.order() == x.order(), std::string(who) + ": rank order mismatch");
  if (!x.rank().all_leq(r))
    throw PreconditionError(std::string(who) + ": rank " + x.rank().to_string() +
                            " is not <= bound " + r.to_string());
}

inline void check_ambient(const TuckerTensor& x, const SparseCooTensor& a,
                          const char* who) {
  detail::require_dims(a.dims() == x.dims(),
                       std::string(who) + ": ambient dims " + dims_to_string(a.dims()) +
                           " differ from " + dims_to_string(x.dims()));
}

/// M - S (S^T M) for orthonormal S.
inline Matrix perp(const Matrix& s, const Matrix& m) {
  if (s.cols() == 0) return m;
  return m - s * (s.transpose() * m);
}

inline Matrix hcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

/// G_(k)^dagger for a core with full-row-rank unfolding; throws otherwise.
inline Matrix core_pinv(const DenseTensor& core, std::size_t k) {
  const Matrix gk = unfold(core, k);
  if (gk.rows() == 0) return Matrix(gk.cols(), 0);
  const SvdResult s = thin_svd(gk);
  const std::size_t nr = numerical_rank_of(s.sigma, kDefaultRankTol);
  if (nr < static_cast<std::size_t>(gk.rows()))
    throw RankDeficiencyError("core unfolding in mode " + std::to_string(k + 1) +
                              " has numerical rank " + std::to_string(nr) + " < " +
                              std::to_string(gk.rows()));
  return s.V * s.sigma.cwiseInverse().asDiagonal() * s.U.transpose();
}

/// Shared pieces of both projections for a fixed complement choice.
struct ProjectionParts {
  std::vector<Matrix> complement;  // Ucomp_k
  DenseTensor core;                // C = A x_k [U_k Ucomp_k]^T
  std::vector<Matrix> b;           // (A x_{j != k} U_j^T)_(k)
  std::vector<Matrix> pinv;        // G_(k)^dagger
};

inline ProjectionParts projection_parts(const TuckerTensor& x, const SparseCooTensor& a,
                                        std::vector<Matrix> complement) {
  const std::size_t d = x.order();
  ProjectionParts p;
  p.complement = std::move(complement);
  std::vector<Matrix> ext(d);
  FactorRefs refs(d);
  for (std::size_t k = 0; k < d; ++k) {
    ext[k] = hcat(x.factor(k), p.complement[k]);
    refs[k] = &ext[k];
  }
  p.core = contract_modes(a, refs);
  p.b.resize(d);
  p.pinv.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    p.pinv[k] = core_pinv(x.core(), k);
    if (x.factor(k).cols() == 0) {
      p.b[k] = Matrix(x.dims()[k], 0);
      continue;
    }
    p.b[k] = multi_mode_contract(a, x.factors(), k);
  }
  return p;
}

}  // namespace detail

/// Chooses Ucomp_k (k in I, ascending) as the leading left singular vectors of
/// P_{U_k}^perp B_k where B_k = (A x_{j in I, j<k} P_{[U_j Ucomp_j]}
/// x_{j notin I} P_{U_j})_(k). Works through the n_k x n_k Gram matrix of B_k,
/// so it never forms the unfolding. Rank-deficient cases are padded with a
/// deterministic orthonormal complement.
inline std::vector<Matrix> choose_singular_complement(const TuckerTensor& x,
                                                      const SparseCooTensor& a,
                                                      const RankTuple& r) {
  detail::check_bound(x, r, "choose_singular_complement");
  detail::check_ambient(x, a, "choose_singular_complement");
  const std::size_t d = x.order();
  const RankTuple rbar = x.rank();
  std::vector<Matrix> comp(d);
  std::vector<Matrix> ext(d);
  for (std::size_t k = 0; k < d; ++k) comp[k] = Matrix(x.dims()[k], 0);

  for (std::size_t k = 0; k < d; ++k) {
    if (rbar[k] >= r[k]) continue;
    FactorRefs refs(d, nullptr);
    for (std::size_t j = 0; j < d; ++j) {
      if (j == k) continue;
      if (rbar[j] == r[j])
        refs[j] = &x.factor(j);
      else if (j < k)
        refs[j] = &ext[j];
    }
    const Matrix& u = x.factor(k);
    Matrix gram = contracted_gram(a, refs, k);
    gram = detail::perp(u, gram);
    gram = detail::perp(u, Matrix(gram.transpose()));
    gram = 0.5 * (gram + gram.transpose()).eval();

    const std::size_t need = r[k] - rbar[k];
    const SvdResult s = thin_svd(gram);
    Matrix chosen(u.rows(), 0);
    const double top = s.sigma.size() > 0 ? s.sigma(0) : 0.0;
    for (Eigen::Index c = 0; c < s.sigma.size(); ++c) {
      if (static_cast<std::size_t>(chosen.cols()) == need) break;
      if (!(top > 0.0) || s.sigma(c) <= 1e-13 * top) break;
      Vector v = s.U.col(c);
      const Matrix basis = detail::hcat(u, chosen);
      for (int pass = 0; pass < 2; ++pass) v -= basis * (basis.transpose() * v);
      const double nv = v.norm();
      if (nv < 0.5) continue;
      chosen = detail::hcat(chosen, v / nv);
    }
    if (static_cast<std::size_t>(chosen.cols()) < need)
      chosen = detail::hcat(
          chosen, orthonormal_complement(detail::hcat(u, chosen),
                                         need - static_cast<std::size_t>(chosen.cols())));
    comp[k] = std::move(chosen);
    ext[k] = detail::hcat(u, comp[k]);
  }
  return comp;
}

/// Approximate projection of A onto the tangent cone:
///   A x_k P_{S_k} + sum_k G x_k (P_{S_k}^perp (A x_{j!=k} U_j^T)_(k) G_(k)^dagger)
///   x_{j!=k} U_j,   S_k = [U_k Ucomp_k].
inline TangentVector approx_project(const TuckerTensor& x, const SparseCooTensor& a,
                                    const RankTuple& r,
                                    std::vector<Matrix> complement) {
  detail::check_bound(x, r, "approx_project");
  detail::check_ambient(x, a, "approx_project");
  const std::size_t d = x.order();
  detail::ProjectionParts p = detail::projection_parts(x, a, std::move(complement));
  TangentVector v;
  v.anchor = x;
  v.bound = r;
  v.core = std::move(p.core);
  v.udot.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    const Matrix s = detail::hcat(x.factor(k), p.complement[k]);
    v.udot[k] = detail::perp(s, p.b[k]) * p.pinv[k];
  }
  v.ucomp = std::move(p.complement);
  return v;
}

inline TangentVector approx_project(const TuckerTensor& x, const SparseCooTensor& a,
                                    const RankTuple& r) {
  return approx_project(x, a, r, choose_singular_complement(x, a, r));
}

inline TangentVector approx_project(const TuckerTensor& x, const DenseTensor& a,
                                    const RankTuple& r) {
  return approx_project(x, to_sparse(a), r);
}

/// Partial (retraction-free) projection: the largest-norm branch among
///   P_0(A) = A x_k P_{S_k}  and
///   P_k(A) = G x_k (P_{U_k}^perp (A x_{j!=k} U_j^T)_(k) G_(k)^dagger) x_{j!=k} U_j.
/// Ties go to the lowest branch index. Branches k >= 1 are tangent to the
/// fixed-rank manifold at X, so they carry bound rank(X).
inline PartialProjection partial_project(const TuckerTensor& x, const SparseCooTensor& a,
                                         const RankTuple& r,
                                         std::vector<Matrix> complement) {
  detail::check_bound(x, r, "partial_project");
  detail::check_ambient(x, a, "partial_project");
  const std::size_t d = x.order();
  const RankTuple rbar = x.rank();
  detail::ProjectionParts p = detail::projection_parts(x, a, std::move(complement));

  PartialProjection out;
  out.branch_norms.resize(d + 1);
  out.branch_norms[0] = fro_norm(p.core);
  std::vector<Matrix> udot(d);
  for (std::size_t k = 0; k < d; ++k) {
    udot[k] = detail::perp(x.factor(k), p.b[k]) * p.pinv[k];
    out.branch_norms[k + 1] =
        udot[k].cols() == 0 ? 0.0 : (udot[k] * unfold(x.core(), k)).norm();
  }
  std::size_t best = 0;
  for (std::size_t b = 1; b <= d; ++b)
    if (out.branch_norms[b] > out.branch_norms[best]) best = b;
  out.branch = best;

  if (best == 0) {
    TangentVector v;
    v.anchor = x;
    v.bound = r;
    v.core = std::move(p.core);
    for (std::size_t k = 0; k < d; ++k)
      v.udot.push_back(Matrix::Zero(x.dims()[k], static_cast<Eigen::Index>(rbar[k])));
    v.ucomp = std::move(p.complement);
    out.direction = std::move(v);
  } else {
    std::vector<Matrix> empty;
    for (std::size_t k = 0; k < d; ++k) empty.emplace_back(x.dims()[k], 0);
    TangentVector v = TangentVector::zero(x, rbar, std::move(empty));
    v.udot[best - 1] = std::move(udot[best - 1]);
    out.direction = std::move(v);
  }
  return out;
}

inline PartialProjection partial_project(const TuckerTensor& x, const SparseCooTensor& a,
                                         const RankTuple& r) {
  return partial_project(x, a, r, choose_singular_complement(x, a, r));
}

inline PartialProjection partial_project(const TuckerTensor& x, const DenseTensor& a,
                                         const RankTuple& r) {
  return partial_project(x, to_sparse(a), r);
}

/// Orthogonal projection onto the tangent space of the fixed-rank manifold.
inline TangentVector tangent_space_project(const TuckerTensor& x,
                                           const SparseCooTensor& a) {
  return approx_project(x, a, x.rank());
}

inline TangentVector tangent_space_project(const TuckerTensor& x, const DenseTensor& a) {
  return tangent_space_project(x, to_sparse(a));
}

/// <A, embed(V)> evaluated structurally.
inline double inner(const SparseCooTensor& a, const TangentVector& v) {
  const std::size_t d = v.anchor.order();
  std::vector<Matrix> ext(d);
  FactorRefs refs(d);
  for (std::size_t k = 0; k < d; ++k) {
    ext[k] = v.extended_factor(k);
    refs[k] = &ext[k];
  }
  double s = inner(contract_modes(a, refs), v.core);
  for (std::size_t k = 0; k < d; ++k) {
    if (v.udot[k].cols() == 0 || v.udot[k].isZero(0.0)) continue;
    const Matrix bk = multi_mode_contract(a, v.anchor.factors(), k);
    s += (bk.cwiseProduct(v.udot[k] * unfold(v.anchor.core(), k))).sum();
  }
  return s;
}

/// Normal-cone stationarity measure at X for gradient `grad`:
///   core residual   ||grad x_k P_{V_k}||,  V_k = span(U_k) (k notin I) or R^{n_k};
///   mode residuals  ||(grad x_k P_{U_k}^perp x_{j!=k} U_j^T)_(k) G_(k)^T||, k notin I.
/// The value is zero exactly when -grad lies in the normal cone.
inline StationarityReport stationarity_measure(const TuckerTensor& x,
                                               const SparseCooTensor& grad,
                                               const RankTuple& r) {
  detail::check_bound(x, r, "stationarity_measure");
  detail::check_ambient(x, grad, "stationarity_measure");
  const std::size_t d = x.order();
  const RankTuple rbar = x.rank();
  StationarityReport rep;
  rep.deficient_modes = deficient_modes(rbar, r);
  rep.mode_residuals.assign(d, 0.0);

  if (rep.deficient_modes.size() == d) {
    rep.core_residual = fro_norm(grad);
  } else {
    FactorRefs refs(d, nullptr);
    for (std::size_t k = 0; k < d; ++k)
      if (rbar[k] == r[k]) refs[k] = &x.factor(k);
    rep.core_residual = fro_norm(contract_modes(grad, refs));
  }
  double total = rep.core_residual * rep.core_residual;
  for (std::size_t k = 0; k < d; ++k) {
    if (rbar[k] < r[k] || rbar[k] == 0) continue;
    const Matrix bk = multi_mode_contract(grad, x.factors(), k);
    rep.mode_residuals[k] =
        (detail::perp(x.factor(k), bk) * unfold(x.core(), k).transpose()).norm();
    total += rep.mode_residuals[k] * rep.mode_residuals[k];
  }
  rep.value = std::sqrt(total);
  return rep;
}

inline StationarityReport stationarity_measure(const TuckerTensor& x,
                                               const DenseTensor& grad,
                                               const RankTuple& r) {
  return stationarity_measure(x, to_sparse(grad), r);
}

/// Random element of the normal cone N_X M_{<=r}, assembled block by block in
/// the decomposition R^{n_k} = span(U_k) + span(U_k)^perp. Blocks are nonzero
/// only if some non-deficient mode takes its perp part; a block with exactly
/// one perp mode k has its coefficient projected so that C_(k) G_(k)^T = 0.
inline DenseTensor sample_normal(const TuckerTensor& x, const RankTuple& r,
                                 std::uint64_t seed) {
  detail::check_bound(x, r, "sample_normal");
  const std::size_t d = x.order();
  const RankTuple rbar = x.rank();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Matrix> uperp(d);
  for (std::size_t k = 0; k < d; ++k)
    uperp[k] = orthonormal_complement(x.factor(k), x.dims()[k] - rbar[k]);

  DenseTensor w(x.dims());
  for (std::size_t bits = 0; bits < (std::size_t{1} << d); ++bits) {
    bool allowed = false;
    std::size_t nperp = 0, perp_mode = 0;
    Dims bdims(d);
    for (std::size_t k = 0; k < d; ++k) {
      const bool p = (bits >> k) & 1U;
      if (p) {
        ++nperp;
        perp_mode = k;
        if (rbar[k] == r[k]) allowed = true;
      }
      bdims[k] = p ? x.dims()[k] - rbar[k] : rbar[k];
    }
    if (!allowed || product(bdims) == 0) continue;
    DenseTensor c(bdims);
    for (double& v : c.values()) v = normal(rng);
    if (nperp == 1) {
      const Matrix gk = unfold(x.core(), perp_mode);
      Matrix ck = unfold(c, perp_mode);
      ck -= (ck * pseudo_inverse(gk)) * gk;
      c = fold(ck, perp_mode, bdims);
    }
    for (std::size_t k = 0; k < d; ++k)
      c = mode_product(c, k, ((bits >> k) & 1U) ? uperp[k] : x.factor(k));
    w += c;
  }
  return w;
}

/// Angle constants of the approximate (omega_tilde) and partial (omega_hat)
/// projections at a point of rank rbar under bound r.
inline AngleConstants angle_constants(const Dims& dims, const RankTuple& r,
                                      const RankTuple& rbar) {
  detail::require_dims(r.order() == dims.size() && rbar.order() == dims.size(),
                       "angle_constants: order mismatch");
  if (!rbar.all_leq(r))
    throw PreconditionError("angle_constants: " + rbar.to_string() + " is not <= " +
                            r.to_string());
  const std::size_t d = dims.size();
  double prod = 1.0;
  std::size_t nI = 0;
  for (std::size_t k = 0; k < d; ++k) {
    if (rbar[k] == r[k]) continue;
    ++nI;
    const double m = static_cast<double>(std::min(dims[k], product_except(dims, k)));
    prod *= static_cast<double>(r[k] - rbar[k]) / m;
  }
  AngleConstants out;
  out.omega_tilde = std::sqrt(prod / static_cast<double>(nI + 1));
  out.omega_hat = std::sqrt(prod / static_cast<double>(d + 1));
  return out;
}

}  // namespace tuckeropt
