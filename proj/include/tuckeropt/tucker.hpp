#pragma once

// Tucker-format tensors G x_1 U_1 ... x_d U_d with orthonormal factors and a
// core whose unfoldings have full row rank, plus the (sequentially truncated)
// HOSVD used both as a decomposition and as the retraction onto M_{<=r}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tuckeropt/contract.hpp"
#include "tuckeropt/error.hpp"
#include "tuckeropt/linalg.hpp"
#include "tuckeropt/tensor.hpp"

namespace tuckeropt {

/// Tuple of per-mode ranks with the componentwise partial order.
class RankTuple {
 public:
  RankTuple() = default;
  explicit RankTuple(std::vector<std::size_t> r) : r_(std::move(r)) {}
  RankTuple(std::initializer_list<std::size_t> r) : r_(r) {}
  static RankTuple uniform(std::size_t d, std::size_t value) {
    return RankTuple(std::vector<std::size_t>(d, value));
  }

  std::size_t order() const { return r_.size(); }
  std::size_t operator[](std::size_t k) const { return r_[k]; }
  std::size_t& operator[](std::size_t k) { return r_[k]; }
  const std::vector<std::size_t>& values() const { return r_; }
  std::size_t sum() const { return std::accumulate(r_.begin(), r_.end(), std::size_t{0}); }

  bool operator==(const RankTuple&) const = default;
  /// Lexicographic order, used only for deterministic tie-breaking.
  auto operator<=>(const RankTuple&) const = default;

  /// Componentwise r_k <= other_k.
  bool all_leq(const RankTuple& o) const {
    check_order(o);
    for (std::size_t k = 0; k < r_.size(); ++k)
      if (r_[k] > o.r_[k]) return false;
    return true;
  }
  /// Componentwise r_k < other_k.
  bool all_lt(const RankTuple& o) const {
    check_order(o);
    for (std::size_t k = 0; k < r_.size(); ++k)
      if (r_[k] >= o.r_[k]) return false;
    return true;
  }

  static RankTuple min(const RankTuple& a, const RankTuple& b) {
    a.check_order(b);
    RankTuple out = a;
    for (std::size_t k = 0; k < a.order(); ++k) out.r_[k] = std::min(a[k], b[k]);
    return out;
  }

  std::string to_string() const { return dims_to_string(r_); }

 private:
  void check_order(const RankTuple& o) const {
    detail::require_dims(o.r_.size() == r_.size(), "RankTuple: order mismatch");
  }
  std::vector<std::size_t> r_;
};

/// Modes where the iterate's rank is below the bound: I = {k : rbar_k < r_k}.
inline std::vector<std::size_t> deficient_modes(const RankTuple& rbar,
                                                const RankTuple& r) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < r.order(); ++k)
    if (rbar[k] < r[k]) out.push_back(k);
  return out;
}

/// Throws unless r_k <= min(n_k, n_{-k}) for every mode.
inline void validate_rank(const Dims& dims, const RankTuple& r) {
  if (r.order() != dims.size())
    throw PreconditionError("rank " + r.to_string() + " has wrong order for dims " +
                            dims_to_string(dims));
  for (std::size_t k = 0; k < dims.size(); ++k)
    if (r[k] > std::min(dims[k], product_except(dims, k)))
      throw PreconditionError("rank " + r.to_string() + " invalid for dims " +
                              dims_to_string(dims) + " in mode " +
                              std::to_string(k + 1));
}

class TuckerTensor {
 public:
  TuckerTensor() = default;

  TuckerTensor(Dims dims, DenseTensor core, std::vector<Matrix> factors)
      : dims_(std::move(dims)), core_(std::move(core)), factors_(std::move(factors)) {
    const std::size_t d = dims_.size();
    detail::require_dims(d > 0, "TuckerTensor: order must be >= 1");
    detail::require_dims(core_.order() == d && factors_.size() == d,
                         "TuckerTensor: core/factor order mismatch");
    for (std::size_t k = 0; k < d; ++k) {
      detail::require_dims(static_cast<std::size_t>(factors_[k].rows()) == dims_[k] &&
                               static_cast<std::size_t>(factors_[k].cols()) ==
                                   core_.dim(k),
                           "TuckerTensor: factor " + std::to_string(k + 1) + " is " +
                               std::to_string(factors_[k].rows()) + "x" +
                               std::to_string(factors_[k].cols()) + ", expected " +
                               std::to_string(dims_[k]) + "x" +
                               std::to_string(core_.dim(k)));
    }
  }

  /// The zero tensor, Tucker rank (0, ..., 0).
  static TuckerTensor zeros(const Dims& dims) {
    std::vector<Matrix> f;
    for (std::size_t n : dims) f.emplace_back(static_cast<Eigen::Index>(n), 0);
    return TuckerTensor(dims, DenseTensor(Dims(dims.size(), 0)), std::move(f));
  }

  std::size_t order() const { return dims_.size(); }
  const Dims& dims() const { return dims_; }
  const DenseTensor& core() const { return core_; }
  const std::vector<Matrix>& factors() const { return factors_; }
  const Matrix& factor(std::size_t k) const { return factors_[k]; }

  /// Tucker rank; equal to the core dimensions by the full-row-rank invariant.
  RankTuple rank() const { return RankTuple(core_.dims()); }

  /// Returns c * this (only the core is scaled).
  TuckerTensor scaled(double c) const {
    TuckerTensor out = *this;
    out.core_ *= c;
    return out;
  }

  bool operator==(const TuckerTensor& o) const {
    if (dims_ != o.dims_ || !(core_ == o.core_)) return false;
    for (std::size_t k = 0; k < factors_.size(); ++k)
      if (factors_[k].rows() != o.factors_[k].rows() ||
          factors_[k].cols() != o.factors_[k].cols() || factors_[k] != o.factors_[k])
        return false;
    return true;
  }

  /// Largest ||U_k^T U_k - I||_F over modes.
  double max_orthonormality_defect() const {
    double m = 0.0;
    for (const Matrix& u : factors_) m = std::max(m, orthonormality_defect(u));
    return m;
  }

 private:
  Dims dims_;
  DenseTensor core_;
  std::vector<Matrix> factors_;
};

/// G x_1 U_1 ... x_d U_d as a dense tensor.
inline DenseTensor to_dense(const TuckerTensor& t) {
  DenseTensor out = t.core();
  for (std::size_t k = 0; k < t.order(); ++k) out = mode_product(out, k, t.factor(k));
  return out;
}

/// Values of the tensor at 0-based coordinates given flat (d per entry).
inline std::vector<double> entries_at(const TuckerTensor& t,
                                      std::span<const std::size_t> flat_idx) {
  return tucker_entries(t.core(), t.factors(), flat_idx);
}

namespace detail {

/// Replaces mode k of (core, U_k) by its leading `keep` left singular
/// directions of the core unfolding: core <- core x_k P^T, U_k <- U_k P.
/// Signs follow the thin_svd convention applied to U_k P, so the factors agree
/// with a dense HOSVD of the same tensor.
inline void truncate_mode(DenseTensor& core, std::vector<Matrix>& factors,
                          std::size_t k, std::size_t keep) {
  const Matrix gk = unfold(core, k);
  const SvdResult s = thin_svd(gk);
  // earlier truncations can leave fewer columns than `keep`
  keep = std::min(keep, static_cast<std::size_t>(s.U.cols()));
  Matrix p = s.U.leftCols(static_cast<Eigen::Index>(keep));
  Matrix uk = factors[k] * p;
  for (Eigen::Index j = 0; j < uk.cols(); ++j) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < uk.rows(); ++i)
      if (std::abs(uk(i, j)) > best_abs) {
        best_abs = std::abs(uk(i, j));
        best = i;
      }
    if (uk.rows() > 0 && uk(best, j) < 0.0) {
      uk.col(j) *= -1.0;
      p.col(j) *= -1.0;
    }
  }
  core = mode_product(core, k, p.transpose());
  factors[k] = std::move(uk);
}

/// Drops numerically zero directions of every core unfolding until each
/// G_(k) has full row rank at tolerance `tau`.
inline void enforce_full_row_rank(DenseTensor& core, std::vector<Matrix>& factors,
                                  double tau) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k = 0; k < core.order(); ++k) {
      if (core.dim(k) == 0) continue;
      const std::size_t nr = numerical_rank(unfold(core, k), tau);
      if (nr < core.dim(k)) {
        if (nr == 0) {
          // zero tensor: collapse every mode
          std::vector<Matrix> f;
          for (const Matrix& u : factors) f.emplace_back(u.rows(), 0);
          factors = std::move(f);
          core = DenseTensor(Dims(core.order(), 0));
          return;
        }
        truncate_mode(core, factors, k, nr);
        changed = true;
      }
    }
  }
}

}  // namespace detail

/// Re-establishes the full-row-rank invariant, optionally capping every mode
/// rank at `cap` via sequential truncation (ascending modes).
inline TuckerTensor recompress(const TuckerTensor& t,
                               const std::optional<RankTuple>& cap = std::nullopt,
                               double tau = kDefaultRankTol) {
  DenseTensor core = t.core();
  std::vector<Matrix> factors = t.factors();
  if (cap) {
    detail::require_dims(cap->order() == t.order(), "recompress: cap order mismatch");
    for (std::size_t k = 0; k < t.order(); ++k)
      if ((*cap)[k] < core.dim(k)) detail::truncate_mode(core, factors, k, (*cap)[k]);
  }
  detail::enforce_full_row_rank(core, factors, tau);
  return TuckerTensor(t.dims(), std::move(core), std::move(factors));
}

/// Sequentially truncated HOSVD: applies the best rank-r_k approximation in
/// each mode, in order 1..d. Mode ranks are additionally capped at the
/// numerical rank so that the returned core has full-row-rank unfoldings.
inline TuckerTensor hosvd(const DenseTensor& a, const RankTuple& r,
                          double tau = kDefaultRankTol) {
  validate_rank(a.dims(), r);
  DenseTensor core = a;
  std::vector<Matrix> factors(a.order());
  for (std::size_t k = 0; k < a.order(); ++k) {
    const SvdResult s = thin_svd(unfold(core, k));
    const std::size_t keep = std::min(r[k], numerical_rank_of(s.sigma, tau));
    factors[k] = s.U.leftCols(static_cast<Eigen::Index>(keep));
    core = mode_product(core, k, factors[k].transpose());
  }
  detail::enforce_full_row_rank(core, factors, tau);
  return TuckerTensor(a.dims(), std::move(core), std::move(factors));
}

/// HOSVD of a Tucker tensor at a lower rank, computed on the core only.
/// Equals hosvd(to_dense(t), rbar) without ever forming the dense tensor.
inline TuckerTensor hosvd_truncate(const TuckerTensor& t, const RankTuple& rbar,
                                   double tau = kDefaultRankTol) {
  if (!rbar.all_leq(t.rank()))
    throw PreconditionError("hosvd_truncate: target " + rbar.to_string() +
                            " exceeds current rank " + t.rank().to_string());
  return recompress(t, rbar, tau);
}

/// Tucker rank of a dense tensor via numerical ranks of its unfoldings.
inline RankTuple tucker_rank(const DenseTensor& a, double tau = kDefaultRankTol) {
  std::vector<std::size_t> r(a.order());
  for (std::size_t k = 0; k < a.order(); ++k) r[k] = numerical_rank(unfold(a, k), tau);
  return RankTuple(std::move(r));
}

/// Singular values of every unfolding X_(k), read off the core unfoldings
/// (valid because the factors are orthonormal).
inline std::vector<Vector> mode_singular_values(const TuckerTensor& t) {
  std::vector<Vector> out(t.order());
  for (std::size_t k = 0; k < t.order(); ++k)
    out[k] = t.core().dim(k) == 0 ? Vector(0) : singular_values(unfold(t.core(), k));
  return out;
}

/// sigma_min(X) = min_k sigma_min(X_(k)); zero for the zero tensor.
inline double sigma_min(const TuckerTensor& t) {
  double m = std::numeric_limits<double>::infinity();
  for (const Vector& s : mode_singular_values(t)) {
    if (s.size() == 0) return 0.0;
    m = std::min(m, s(s.size() - 1));
  }
  return m;
}

/// Largest singular value over all unfoldings.
inline double sigma_max(const TuckerTensor& t) {
  double m = 0.0;
  for (const Vector& s : mode_singular_values(t))
    if (s.size() > 0) m = std::max(m, s(0));
  return m;
}

inline double fro_norm(const TuckerTensor& t) { return fro_norm(t.core()); }

}  // namespace tuckeropt
