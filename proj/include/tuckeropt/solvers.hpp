#pragma once

// First-order methods on the Tucker variety M_{<=r}:
//
//   GRAP      approximate projection + HOSVD retraction
//   rfGRAP    partial projection, no retraction
//   GRAP-R    GRAP step from every HOSVD truncation with rank in the
//             Delta-rank index sets, best candidate kept
//   rfGRAP-R  rfGRAP step from truncations that drop at most the smallest
//             singular direction per mode
//
// All four use Armijo backtracking and stop on the normal-cone stationarity
// measure or the iteration cap.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tuckeropt/error.hpp"
#include "tuckeropt/geometry.hpp"
#include "tuckeropt/linalg.hpp"
#include "tuckeropt/objective.hpp"
#include "tuckeropt/tangent.hpp"
#include "tuckeropt/tucker.hpp"

namespace tuckeropt {

class LineSearchFailure : public Error {
 public:
  using Error::Error;
};

class CandidateCapExceeded : public Error {
 public:
  using Error::Error;
};

enum class Method { Grap, Rfgrap, GrapR, RfgrapR };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Grap: return "grap";
    case Method::Rfgrap: return "rfgrap";
    case Method::GrapR: return "grap-r";
    case Method::RfgrapR: return "rfgrap-r";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "grap") return Method::Grap;
  if (s == "rfgrap") return Method::Rfgrap;
  if (s == "grap-r") return Method::GrapR;
  if (s == "rfgrap-r") return Method::RfgrapR;
  throw PreconditionError("unknown solver '" + s +
                          "' (expected grap, rfgrap, grap-r or rfgrap-r)");
}

inline bool is_retracted(Method m) { return m == Method::Grap || m == Method::GrapR; }
inline bool is_rank_decreasing(Method m) {
  return m == Method::GrapR || m == Method::RfgrapR;
}

struct SolverConfig {
  double rho = 0.5;
  double armijo_a = 1e-4;
  double delta = 1e-2;          // relative to sigma_max(X0) unless delta_absolute
  bool delta_absolute = false;
  std::size_t max_iters = 300;
  double stat_tol = 1e-8;
  double step_floor = 1e-16;
  std::size_t candidate_cap = 64;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool record_timing = true;

  void validate() const {
    if (!(rho > 0.0 && rho < 1.0)) throw PreconditionError("rho must lie in (0, 1)");
    if (!(armijo_a > 0.0 && armijo_a < 1.0))
      throw PreconditionError("armijo_a must lie in (0, 1)");
    if (!(delta > 0.0)) throw PreconditionError("delta must be > 0");
    if (!(stat_tol >= 0.0)) throw PreconditionError("stat_tol must be >= 0");
    if (!(step_floor > 0.0)) throw PreconditionError("step_floor must be > 0");
    if (candidate_cap == 0) throw PreconditionError("candidate_cap must be >= 1");
    if (threads == 0) throw PreconditionError("threads must be >= 1");
  }
};

enum class Termination { Converged, IterationCap, LineSearchFailure, CandidateExhaustion };

inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::IterationCap: return "iteration_cap";
    case Termination::LineSearchFailure: return "line_search_failure";
    case Termination::CandidateExhaustion: return "candidate_exhaustion";
  }
  return "?";
}

struct IterRecord {
  std::size_t iter = 0;
  double f = 0.0;
  double stationarity = 0.0;
  double grad_norm = 0.0;
  double dir_norm = 0.0;
  double step = 0.0;
  std::size_t backtracks = 0;
  RankTuple rank;
  std::size_t candidates = 0;
  double time_s = 0.0;
  double test_error = std::numeric_limits<double>::quiet_NaN();
  // accepted step details; the Armijo inequality reads
  //   start_f - f >= step * armijo_a * dir_inner
  double start_f = 0.0;
  double dir_inner = 0.0;
  RankTuple candidate_rank;  // rbar of the selected start point
};

struct SolveResult {
  TuckerTensor x;
  std::vector<IterRecord> trace;
  Termination termination = Termination::IterationCap;
  std::string message;
  double effective_delta = 0.0;
  double wall_time_s = 0.0;

  std::size_t iterations() const { return trace.empty() ? 0 : trace.size() - 1; }
};

/// Called once per accepted iteration with the new record, the start point of
/// the selected candidate and the new iterate.
using IterObserver =
    std::function<void(const IterRecord&, const TuckerTensor&, const TuckerTensor&)>;

// ---------------------------------------------------------------------------
// Line search
// ---------------------------------------------------------------------------

struct ArmijoResult {
  double step = 0.0;
  TuckerTensor y;
  double fy = 0.0;
  std::size_t backtracks = 0;
};

/// Y_s = HOSVD_{<= r}(X + s V) when `retracted`, else X + s V. The bound r is
/// the one V is tangent to.
inline TuckerTensor step_point(const TuckerTensor& x, double s, const TangentVector& v,
                               bool retracted) {
  TuckerTensor z = add_scaled_tangent(x, s, v);
  if (retracted) return hosvd_truncate(z, RankTuple::min(v.bound, z.rank()));
  if (!z.rank().all_leq(v.bound))
    throw Error("retraction-free step left the variety: rank " + z.rank().to_string() +
                " exceeds " + v.bound.to_string());
  return z;
}

/// Smallest l >= 0 with f(X) - f(Y_{rho^l sbar}) >= rho^l sbar * a * dir_inner.
inline ArmijoResult armijo_search(const Objective& obj, const TuckerTensor& x, double fx,
                                  const TangentVector& v, double dir_inner, double sbar,
                                  const SolverConfig& cfg, bool retracted) {
  if (!(dir_inner > 0.0))
    throw PreconditionError("armijo_search: not a descent direction (<-grad, V> = " +
                            std::to_string(dir_inner) + ")");
  if (!(sbar > 0.0)) throw PreconditionError("armijo_search: initial step must be > 0");
  ArmijoResult out;
  double s = sbar;
  for (;;) {
    if (s < cfg.step_floor) {
      std::ostringstream msg;
      msg << "line search failed: step " << s << " below floor " << cfg.step_floor
          << " after " << out.backtracks << " backtracks (f = " << fx
          << ", <-grad, V> = " << dir_inner << ", ||V|| = " << v.norm() << ")";
      throw LineSearchFailure(msg.str());
    }
    TuckerTensor y = step_point(x, s, v, retracted);
    const double fy = obj.value(y);
    if (std::isfinite(fy) && fx - fy >= s * cfg.armijo_a * dir_inner) {
      out.step = s;
      out.y = std::move(y);
      out.fy = fy;
      return out;
    }
    s *= cfg.rho;
    ++out.backtracks;
  }
}

/// Convenience overload evaluating f(X).
inline ArmijoResult armijo_search(const Objective& obj, const TuckerTensor& x,
                                  const TangentVector& v, double dir_inner, double sbar,
                                  const SolverConfig& cfg, bool retracted) {
  return armijo_search(obj, x, obj.value(x), v, dir_inner, sbar, cfg, retracted);
}

// ---------------------------------------------------------------------------
// Rank-decreasing index sets
// ---------------------------------------------------------------------------

using IndexSets = std::vector<std::vector<std::size_t>>;

/// I_k = {rank_Delta(X_(k)), ..., rank(X_(k))}.
inline IndexSets grap_r_index_sets(const TuckerTensor& x, double delta) {
  if (!(delta > 0.0)) throw PreconditionError("grap_r_index_sets: delta must be > 0");
  IndexSets out;
  const std::vector<Vector> sv = mode_singular_values(x);
  for (std::size_t k = 0; k < x.order(); ++k) {
    const std::size_t rk = x.rank()[k];
    const std::size_t lo = std::min(delta_rank(sv[k], delta), rk);
    std::vector<std::size_t> set;
    for (std::size_t v = lo; v <= rk; ++v) set.push_back(v);
    out.push_back(std::move(set));
  }
  return out;
}

/// I_k = {rank - 1, rank} when sigma_min(X_(k)) <= Delta, else {rank}.
inline IndexSets rfgrap_r_index_sets(const TuckerTensor& x, double delta) {
  if (!(delta > 0.0)) throw PreconditionError("rfgrap_r_index_sets: delta must be > 0");
  IndexSets out;
  const std::vector<Vector> sv = mode_singular_values(x);
  for (std::size_t k = 0; k < x.order(); ++k) {
    const std::size_t rk = x.rank()[k];
    if (rk > 0 && sv[k](sv[k].size() - 1) <= delta)
      out.push_back({rk - 1, rk});
    else
      out.push_back({rk});
  }
  return out;
}

/// Cartesian product in lexicographic order (mode 1 most significant).
inline std::vector<RankTuple> enumerate_candidates(const IndexSets& sets) {
  std::vector<RankTuple> out;
  const std::size_t d = sets.size();
  std::vector<std::size_t> pos(d, 0);
  for (const auto& s : sets)
    if (s.empty()) return out;
  for (;;) {
    std::vector<std::size_t> r(d);
    for (std::size_t k = 0; k < d; ++k) r[k] = sets[k][pos[k]];
    out.emplace_back(std::move(r));
    std::size_t k = d;
    while (k-- > 0) {
      if (++pos[k] < sets[k].size()) break;
      pos[k] = 0;
    }
    if (k == static_cast<std::size_t>(-1)) break;
  }
  return out;
}

inline std::size_t candidate_count(const IndexSets& sets) {
  std::size_t c = 1;
  for (const auto& s : sets) c *= s.size();
  return c;
}

// ---------------------------------------------------------------------------
// Single steps
// ---------------------------------------------------------------------------

struct StepOutcome {
  TuckerTensor start;
  double start_f = 0.0;
  TuckerTensor y;
  double fy = 0.0;
  double step = 0.0;
  std::size_t backtracks = 0;
  double dir_norm = 0.0;
  double dir_inner = 0.0;
  std::size_t branch = 0;  // partial-projection branch (rf methods)
  bool zero_direction = false;
};

namespace detail {

inline SparseCooTensor negated(const SparseCooTensor& g) {
  std::vector<double> v(g.values().begin(), g.values().end());
  for (double& t : v) t = -t;
  return g.with_values(std::move(v));
}

inline double initial_step(const Objective& obj, const TuckerTensor& x,
                           const TangentVector& v, double vnorm, bool retracted,
                           const SolverConfig& cfg) {
  const double cap = 1.0 / vnorm;
  double s = obj.initial_step ? obj.initial_step(x, v) : std::min(1.0, cap);
  if (!std::isfinite(s) || !(s > 0.0)) s = std::min(1.0, cap);
  if (retracted) s = std::min(s, cap);
  return std::max(s, cfg.step_floor);
}

}  // namespace detail

/// One projected-gradient step from `x` (with f(x) and grad f(x) supplied).
inline StepOutcome gradient_step(const Objective& obj, const TuckerTensor& x, double fx,
                                 const SparseCooTensor& grad, const RankTuple& r,
                                 const SolverConfig& cfg, bool retracted) {
  StepOutcome out;
  out.start = x;
  out.start_f = fx;
  const SparseCooTensor neg = detail::negated(grad);
  TangentVector v;
  if (retracted) {
    v = approx_project(x, neg, r);
  } else {
    PartialProjection pp = partial_project(x, neg, r);
    out.branch = pp.branch;
    v = std::move(pp.direction);
  }
  const double n2 = v.norm_squared();
  out.dir_norm = std::sqrt(n2);
  out.dir_inner = n2 > 0.0 ? inner(neg, v) : 0.0;
  if (!(n2 > 0.0) || !(out.dir_inner > 0.0)) {
    out.zero_direction = true;
    out.y = x;
    out.fy = fx;
    return out;
  }
  const double sbar = detail::initial_step(obj, x, v, out.dir_norm, retracted, cfg);
  ArmijoResult a = armijo_search(obj, x, fx, v, out.dir_inner, sbar, cfg, retracted);
  out.y = std::move(a.y);
  out.fy = a.fy;
  out.step = a.step;
  out.backtracks = a.backtracks;
  return out;
}

/// GRAP step: approximate projection of -grad, Armijo search with retraction.
inline StepOutcome grap_step(const Objective& obj, const TuckerTensor& x, const RankTuple& r,
                             const SolverConfig& cfg) {
  return gradient_step(obj, x, obj.value(x), obj.gradient(x), r, cfg, true);
}

/// rfGRAP step: partial projection of -grad, Armijo search without retraction.
inline StepOutcome rfgrap_step(const Objective& obj, const TuckerTensor& x,
                               const RankTuple& r, const SolverConfig& cfg) {
  return gradient_step(obj, x, obj.value(x), obj.gradient(x), r, cfg, false);
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

namespace detail {

struct CandidateResult {
  RankTuple rbar;
  std::optional<StepOutcome> outcome;
  std::string failure;
};

inline CandidateResult run_candidate(const Objective& obj, const TuckerTensor& x, double fx,
                                     const SparseCooTensor& grad, const RankTuple& rbar,
                                     const RankTuple& r, const SolverConfig& cfg,
                                     bool retracted) {
  CandidateResult res;
  res.rbar = rbar;
  try {
    if (rbar == x.rank()) {
      res.outcome = gradient_step(obj, x, fx, grad, r, cfg, retracted);
    } else {
      TuckerTensor start = hosvd_truncate(x, rbar);
      const double fs = obj.value(start);
      res.outcome = gradient_step(obj, start, fs, obj.gradient(start), r, cfg, retracted);
    }
  } catch (const LineSearchFailure& e) {
    res.failure = e.what();
  }
  return res;
}

/// Strict "a is a better candidate than b": smaller f, then smaller sum of
/// ranks, then lexicographically smaller rank tuple.
inline bool better(const CandidateResult& a, const CandidateResult& b) {
  if (a.outcome->fy != b.outcome->fy) return a.outcome->fy < b.outcome->fy;
  if (a.rbar.sum() != b.rbar.sum()) return a.rbar.sum() < b.rbar.sum();
  return a.rbar < b.rbar;
}

}  // namespace detail

inline SolveResult solve(Method method, const Objective& obj, const TuckerTensor& x0,
                         const RankTuple& r, const SolverConfig& cfg,
                         const IterObserver& observer = {}) {
  cfg.validate();
  detail::require_dims(x0.dims() == obj.dims, "solve: X0 dims " + dims_to_string(x0.dims()) +
                                                  " differ from objective dims " +
                                                  dims_to_string(obj.dims));
  validate_rank(x0.dims(), r);
  if (!x0.rank().all_leq(r))
    throw PreconditionError("solve: X0 rank " + x0.rank().to_string() +
                            " exceeds bound " + r.to_string());
  const bool retracted = is_retracted(method);
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    if (!cfg.record_timing) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  SolveResult res;
  const double smax = sigma_max(x0);
  res.effective_delta = (cfg.delta_absolute || !(smax > 0.0)) ? cfg.delta : cfg.delta * smax;

  TuckerTensor x = x0;
  double fx = obj.value(x);
  SparseCooTensor grad = obj.gradient(x);
  StationarityReport stat = stationarity_measure(x, grad, r);

  IterRecord rec0;
  rec0.f = fx;
  rec0.start_f = fx;
  rec0.stationarity = stat.value;
  rec0.grad_norm = fro_norm(grad);
  rec0.rank = x.rank();
  rec0.candidate_rank = x.rank();
  if (obj.test_error) rec0.test_error = obj.test_error(x);
  rec0.time_s = elapsed();
  res.trace.push_back(rec0);

  for (std::size_t t = 0;; ++t) {
    if (stat.value <= cfg.stat_tol) {
      res.termination = Termination::Converged;
      res.message = "stationarity " + std::to_string(stat.value) + " <= " +
                    std::to_string(cfg.stat_tol);
      break;
    }
    if (t >= cfg.max_iters) {
      res.termination = Termination::IterationCap;
      res.message = "reached the iteration cap of " + std::to_string(cfg.max_iters);
      break;
    }

    std::vector<RankTuple> cands;
    if (is_rank_decreasing(method)) {
      const IndexSets sets = method == Method::GrapR
                                 ? grap_r_index_sets(x, res.effective_delta)
                                 : rfgrap_r_index_sets(x, res.effective_delta);
      const std::size_t count = candidate_count(sets);
      if (count > cfg.candidate_cap)
        throw CandidateCapExceeded(
            "iteration " + std::to_string(t + 1) + " has " + std::to_string(count) +
            " rank candidates, above the cap of " + std::to_string(cfg.candidate_cap) +
            "; raise the cap or lower delta");
      cands = enumerate_candidates(sets);
    } else {
      cands.push_back(x.rank());
    }

    std::vector<detail::CandidateResult> results(cands.size());
    if (cfg.threads > 1 && cands.size() > 1) {
      for (std::size_t first = 0; first < cands.size(); first += cfg.threads) {
        const std::size_t last = std::min(cands.size(), first + cfg.threads);
        std::vector<std::future<detail::CandidateResult>> jobs;
        for (std::size_t c = first; c < last; ++c)
          jobs.push_back(std::async(std::launch::async, detail::run_candidate, std::cref(obj),
                                    std::cref(x), fx, std::cref(grad), cands[c],
                                    std::cref(r), std::cref(cfg), retracted));
        for (std::size_t c = first; c < last; ++c) results[c] = jobs[c - first].get();
      }
    } else {
      for (std::size_t c = 0; c < cands.size(); ++c)
        results[c] = detail::run_candidate(obj, x, fx, grad, cands[c], r, cfg, retracted);
    }

    const detail::CandidateResult* best = nullptr;
    for (const auto& c : results)
      if (c.outcome && (best == nullptr || detail::better(c, *best))) best = &c;
    if (best == nullptr) {
      std::ostringstream msg;
      if (cands.size() == 1) {
        res.termination = Termination::LineSearchFailure;
        msg << "iteration " << t + 1 << ": " << results[0].failure;
      } else {
        res.termination = Termination::CandidateExhaustion;
        msg << "iteration " << t + 1 << ": all " << cands.size()
            << " candidates failed the line search;";
        for (const auto& c : results) msg << " [" << c.rbar.to_string() << "] " << c.failure << ";";
      }
      res.message = msg.str();
      break;
    }

    const StepOutcome& o = *best->outcome;
    x = o.y;
    fx = o.fy;
    grad = obj.gradient(x);
    stat = stationarity_measure(x, grad, r);

    IterRecord rec;
    rec.iter = t + 1;
    rec.f = fx;
    rec.stationarity = stat.value;
    rec.grad_norm = fro_norm(grad);
    rec.dir_norm = o.dir_norm;
    rec.step = o.step;
    rec.backtracks = o.backtracks;
    rec.rank = x.rank();
    rec.candidates = cands.size();
    rec.start_f = o.start_f;
    rec.dir_inner = o.dir_inner;
    rec.candidate_rank = best->rbar;
    if (obj.test_error) rec.test_error = obj.test_error(x);
    rec.time_s = elapsed();
    res.trace.push_back(rec);
    if (observer) observer(rec, o.start, x);
  }
  res.x = std::move(x);
  res.wall_time_s = elapsed();
  return res;
}

inline SolveResult solve_grap(const Objective& obj, const TuckerTensor& x0, const RankTuple& r,
                              const SolverConfig& cfg, const IterObserver& observer = {}) {
  return solve(Method::Grap, obj, x0, r, cfg, observer);
}
inline SolveResult solve_rfgrap(const Objective& obj, const TuckerTensor& x0,
                                const RankTuple& r, const SolverConfig& cfg,
                                const IterObserver& observer = {}) {
  return solve(Method::Rfgrap, obj, x0, r, cfg, observer);
}
inline SolveResult solve_grap_r(const Objective& obj, const TuckerTensor& x0,
                                const RankTuple& r, const SolverConfig& cfg,
                                const IterObserver& observer = {}) {
  return solve(Method::GrapR, obj, x0, r, cfg, observer);
}
inline SolveResult solve_rfgrap_r(const Objective& obj, const TuckerTensor& x0,
                                  const RankTuple& r, const SolverConfig& cfg,
                                  const IterObserver& observer = {}) {
  return solve(Method::RfgrapR, obj, x0, r, cfg, observer);
}

}  // namespace tuckeropt
