#pragma once

// Tucker tensor completion: f(X) = 1/2 ||P_Omega(X) - P_Omega(A)||_F^2, its
// sparse gradient, held-out test error and a synthetic instance generator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "tuckeropt/error.hpp"
#include "tuckeropt/linalg.hpp"
#include "tuckeropt/objective.hpp"
#include "tuckeropt/tangent.hpp"
#include "tuckeropt/tensor.hpp"
#include "tuckeropt/tucker.hpp"

namespace tuckeropt {

struct CompletionProblem {
  Dims dims;
  SparseCooTensor omega;  // training observations
  SparseCooTensor gamma;  // held-out observations

  CompletionProblem() = default;
  CompletionProblem(SparseCooTensor omega_, SparseCooTensor gamma_)
      : dims(omega_.dims()), omega(std::move(omega_)), gamma(std::move(gamma_)) {
    detail::require_dims(gamma.dims() == dims,
                         "CompletionProblem: omega dims " + dims_to_string(dims) +
                             " differ from gamma dims " + dims_to_string(gamma.dims()));
    // both index lists are sorted, so a merge finds any overlap
    std::size_t a = 0, b = 0;
    while (a < omega.nnz() && b < gamma.nnz()) {
      const auto ia = omega.index(a), ib = gamma.index(b);
      if (std::equal(ia.begin(), ia.end(), ib.begin()))
        throw PreconditionError("CompletionProblem: omega and gamma share an index");
      if (std::lexicographical_compare(ia.begin(), ia.end(), ib.begin(), ib.end()))
        ++a;
      else
        ++b;
    }
  }

  /// |Omega| / prod(n_k).
  double sampling_rate() const {
    return static_cast<double>(omega.nnz()) / static_cast<double>(product(dims));
  }
};

namespace detail {
inline void check_problem_dims(const CompletionProblem& p, const TuckerTensor& x) {
  require_dims(x.dims() == p.dims, "completion: iterate dims " + dims_to_string(x.dims()) +
                                       " differ from problem dims " +
                                       dims_to_string(p.dims));
}
}  // namespace detail

inline double objective(const CompletionProblem& p, const TuckerTensor& x) {
  detail::check_problem_dims(p, x);
  const std::vector<double> xv = entries_at(x, p.omega.indices());
  double s = 0.0;
  for (std::size_t e = 0; e < xv.size(); ++e) {
    const double r = xv[e] - p.omega.values()[e];
    s += r * r;
  }
  return 0.5 * s;
}

/// Same objective on a dense iterate; used for finite-difference checks.
inline double objective_dense(const CompletionProblem& p, const DenseTensor& x) {
  detail::require_dims(x.dims() == p.dims, "objective_dense: dims mismatch");
  double s = 0.0;
  for (std::size_t e = 0; e < p.omega.nnz(); ++e) {
    const double r = x(p.omega.index(e)) - p.omega.values()[e];
    s += r * r;
  }
  return 0.5 * s;
}

/// P_Omega(X - A), supported on Omega.
inline SparseCooTensor euclidean_gradient(const CompletionProblem& p,
                                          const TuckerTensor& x) {
  detail::check_problem_dims(p, x);
  std::vector<double> xv = entries_at(x, p.omega.indices());
  for (std::size_t e = 0; e < xv.size(); ++e) xv[e] -= p.omega.values()[e];
  return p.omega.with_values(std::move(xv));
}

/// ||P_Gamma(X) - P_Gamma(A)|| / ||P_Gamma(A)||.
inline double test_error(const CompletionProblem& p, const TuckerTensor& x) {
  detail::check_problem_dims(p, x);
  const double denom = fro_norm(p.gamma);
  if (!(denom > 0.0))
    throw PreconditionError("test_error: empty or all-zero test set");
  const std::vector<double> xv = entries_at(x, p.gamma.indices());
  double s = 0.0;
  for (std::size_t e = 0; e < xv.size(); ++e) {
    const double r = xv[e] - p.gamma.values()[e];
    s += r * r;
  }
  return std::sqrt(s) / denom;
}

/// ||V||^2 / ||P_Omega(V)||^2: the exact minimizer of f along V when V
/// satisfies <-grad f, V> = ||V||^2 (true for all projections used here).
inline double exact_step(const CompletionProblem& p, const TangentVector& v) {
  const std::vector<double> vv = tangent_entries(v, p.omega.indices());
  double den = 0.0;
  for (double t : vv) den += t * t;
  if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
  return v.norm_squared() / den;
}

/// Objective handle for the solvers; the problem must outlive the handle.
inline Objective make_objective(const CompletionProblem& p) {
  Objective obj;
  obj.dims = p.dims;
  obj.value = [&p](const TuckerTensor& x) { return objective(p, x); };
  obj.gradient = [&p](const TuckerTensor& x) { return euclidean_gradient(p, x); };
  obj.initial_step = [&p](const TuckerTensor&, const TangentVector& v) {
    return exact_step(p, v);
  };
  if (p.gamma.nnz() > 0 && fro_norm(p.gamma) > 0.0)
    obj.test_error = [&p](const TuckerTensor& x) { return test_error(p, x); };
  return obj;
}

// ---------------------------------------------------------------------------
// Synthetic instances
// ---------------------------------------------------------------------------

struct SyntheticInstance {
  CompletionProblem problem;
  TuckerTensor truth;
};

/// Random Tucker tensor of rank r: standard normal core, Gaussian factors
/// orthonormalized by Householder QR.
inline TuckerTensor random_tucker(const Dims& dims, const RankTuple& r,
                                  std::mt19937_64& rng) {
  validate_rank(dims, r);
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseTensor core(r.values());
  for (double& v : core.values()) v = normal(rng);
  std::vector<Matrix> factors;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    Matrix g(static_cast<Eigen::Index>(dims[k]), static_cast<Eigen::Index>(r[k]));
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    factors.push_back(qr.householderQ() * Matrix::Identity(g.rows(), g.cols()));
  }
  return recompress(TuckerTensor(dims, std::move(core), std::move(factors)));
}

/// Random point of M_r for starting a solve, rescaled so that its norm matches
/// the estimate ||P_Omega(A)|| / sqrt(p) of ||A||.
inline TuckerTensor initial_point(const CompletionProblem& p, const RankTuple& r,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TuckerTensor x = random_tucker(p.dims, r, rng);
  const double target = fro_norm(p.omega) / std::sqrt(p.sampling_rate());
  const double nx = fro_norm(x);
  return (target > 0.0 && nx > 0.0) ? x.scaled(target / nx) : x;
}

/// Ground truth plus disjoint training/test samples drawn without
/// replacement. |Omega| = round(p * prod(n)); |Gamma| = |Omega| unless
/// `gamma_size` overrides it.
inline SyntheticInstance gen_synthetic(const Dims& dims, const RankTuple& r_true, double p,
                                       std::uint64_t seed,
                                       std::optional<std::size_t> gamma_size = std::nullopt) {
  if (!(p > 0.0 && p <= 1.0))
    throw PreconditionError("gen_synthetic: p must lie in (0, 1], got " + std::to_string(p));
  validate_rank(dims, r_true);
  const std::size_t total = product(dims);
  const auto m = static_cast<std::size_t>(std::llround(p * static_cast<double>(total)));
  const std::size_t mg = gamma_size.value_or(m);
  if (m + mg > total)
    throw PreconditionError("gen_synthetic: |Omega| + |Gamma| = " + std::to_string(m + mg) +
                            " exceeds the " + std::to_string(total) +
                            " available entries; lower p or the test-set size");

  std::mt19937_64 rng(seed);
  TuckerTensor truth = random_tucker(dims, r_true, rng);

  // selection sampling over the linear index range: O(total) time, O(m) memory
  std::vector<std::size_t> picked;
  picked.reserve(m + mg);
  {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::size_t need = m + mg;
    for (std::size_t i = 0; i < total && need > 0; ++i) {
      if (static_cast<double>(total - i) * unif(rng) < static_cast<double>(need)) {
        picked.push_back(i);
        --need;
      }
    }
  }
  std::shuffle(picked.begin(), picked.end(), rng);

  const std::size_t d = dims.size();
  auto build = [&](std::size_t first, std::size_t count) {
    std::vector<std::size_t> lin(picked.begin() + static_cast<std::ptrdiff_t>(first),
                                 picked.begin() + static_cast<std::ptrdiff_t>(first + count));
    std::sort(lin.begin(), lin.end());
    std::vector<std::size_t> idx(count * d);
    for (std::size_t e = 0; e < count; ++e) {
      std::size_t rem = lin[e];
      for (std::size_t k = 0; k < d; ++k) {
        idx[e * d + k] = rem % dims[k];
        rem /= dims[k];
      }
    }
    std::vector<double> vals = entries_at(truth, idx);
    return SparseCooTensor(dims, std::move(idx), std::move(vals));
  };
  SparseCooTensor omega = build(0, m);
  SparseCooTensor gamma = build(m, mg);
  return SyntheticInstance{CompletionProblem(std::move(omega), std::move(gamma)),
                           std::move(truth)};
}

}  // namespace tuckeropt
