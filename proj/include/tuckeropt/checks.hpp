#pragma once

// Randomized property suites over the geometry and completion kernels,
// checked against the dense references in oracles.hpp. Shared by the test
// suite and the `check` command.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tuckeropt/completion.hpp"
#include "tuckeropt/contract.hpp"
#include "tuckeropt/geometry.hpp"
#include "tuckeropt/oracles.hpp"
#include "tuckeropt/tangent.hpp"
#include "tuckeropt/tensor.hpp"
#include "tuckeropt/tucker.hpp"

namespace tuckeropt::checks {

/// Outcome of one suite. `max_violation` is measured in the suite's own
/// units; the suite passes iff max_violation <= tolerance.
struct OracleReport {
  std::string name;
  std::size_t instances_run = 0;
  double max_violation = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  std::vector<double> margins;  // per instance, >= 0 means satisfied

  void record(double violation, double margin) {
    ++instances_run;
    if (!(violation <= max_violation)) max_violation = violation;  // NaN sticks
    margins.push_back(margin);
  }
  void finish() { pass = max_violation <= tolerance; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["instances_run"] = instances_run;
    j["max_violation"] = std::isfinite(max_violation) ? nlohmann::json(max_violation)
                                                      : nlohmann::json("nan");
    j["tolerance"] = tolerance;
    j["pass"] = pass;
    j["margins"] = margins;
    return j;
  }
};

struct CheckOptions {
  std::uint64_t seed = 20240601;
  std::size_t restarts = 200;  // exact cone projection oracle
};

namespace detail {

inline DenseTensor random_dense(const Dims& dims, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseTensor a(dims);
  for (double& v : a.values()) v = normal(rng);
  return a;
}

inline Matrix random_matrix(Eigen::Index m, Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(m, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) g(i, j) = normal(rng);
  return g;
}

/// Random point of exact rank rbar (redrawn until the rank comes out right).
inline TuckerTensor random_point(const Dims& dims, const RankTuple& rbar, std::mt19937_64& rng) {
  // a Tucker rank needs rbar_k <= prod_{j != k} rbar_j, otherwise no tensor has it
  for (std::size_t k = 0; k < rbar.order(); ++k)
    if (rbar[k] > product_except(rbar.values(), k))
      throw PreconditionError("random_point: " + rbar.to_string() + " is not a Tucker rank");
  for (;;) {
    TuckerTensor x = random_tucker(dims, rbar, rng);
    if (x.rank() == rbar) return x;
  }
}

/// rbar_k = r_k - 1 on the modes in `pattern` (a bitmask), r_k elsewhere.
inline RankTuple pattern_rank(const RankTuple& r, unsigned pattern) {
  RankTuple rbar = r;
  for (std::size_t k = 0; k < r.order(); ++k)
    if ((pattern >> k) & 1U) rbar[k] = r[k] - 1;
  return rbar;
}

/// Random tangent vector with random complements and velocities.
inline TangentVector random_tangent(const TuckerTensor& x, const RankTuple& r,
                                    std::mt19937_64& rng) {
  const std::size_t d = x.order();
  TangentVector v;
  v.anchor = x;
  v.bound = r;
  v.core = random_dense(r.values(), rng);
  for (std::size_t k = 0; k < d; ++k) {
    const Matrix& u = x.factor(k);
    const Eigen::Index need = static_cast<Eigen::Index>(r[k]) - u.cols();
    Matrix c = oracles::naive::perp_proj(u) * random_matrix(u.rows(), need, rng);
    c = oracles::naive::leading_left(c, static_cast<std::size_t>(need));
    const Matrix s = oracles::naive::hcat(u, c);
    v.ucomp.push_back(c);
    v.udot.push_back(oracles::naive::perp_proj(s) * random_matrix(u.rows(), u.cols(), rng));
  }
  return v;
}

inline double rel_diff(const DenseTensor& a, const DenseTensor& b) {
  const double nb = oracles::naive::norm(b);
  return oracles::naive::norm(a - b) / std::max(nb, 1e-300);
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace detail

/// <A, V> = ||V||^2 for both projections on every deficiency pattern of
/// dims (6,6,6), r = (3,3,3). Violation: |<A,V> - ||V||^2| / ||V||^2.
inline std::vector<OracleReport> angle_identity_suite(const CheckOptions& opt,
                                                      std::size_t per_pattern = 25) {
  OracleReport ra{"angle_identity/approx_project", 0, 0.0, 1e-10, true, {}};
  OracleReport rp{"angle_identity/partial_project", 0, 0.0, 1e-10, true, {}};
  std::mt19937_64 rng(opt.seed);
  const Dims dims{6, 6, 6};
  const RankTuple r{3, 3, 3};
  for (unsigned pattern = 0; pattern < 8; ++pattern) {
    const RankTuple rbar = detail::pattern_rank(r, pattern);
    for (std::size_t i = 0; i < per_pattern; ++i) {
      const TuckerTensor x = detail::random_point(dims, rbar, rng);
      const DenseTensor a = detail::random_dense(dims, rng);
      auto score = [&](OracleReport& rep, const TangentVector& v) {
        const DenseTensor e = oracles::ref_embed(v);
        const double nn = std::pow(oracles::naive::norm(e), 2);
        double ip = 0.0;
        for (std::size_t t = 0; t < a.size(); ++t) ip += a.values()[t] * e.values()[t];
        const double viol = std::abs(ip - nn) / std::max(nn, 1e-300);
        rep.record(viol, rep.tolerance - viol);
      };
      score(ra, approx_project(x, a, r));
      score(rp, partial_project(x, a, r).direction);
    }
  }
  ra.finish();
  rp.finish();
  return {ra, rp};
}

/// Angle lower bounds against the exact cone projection oracle on tiny
/// instances. Violation: max(0, omega * oracle - achieved), zero tolerance.
inline std::vector<OracleReport> angle_bound_suite(const CheckOptions& opt,
                                                   std::size_t instances = 50) {
  OracleReport ra{"angle_bound/approx_project", 0, 0.0, 0.0, true, {}};
  OracleReport rp{"angle_bound/partial_project", 0, 0.0, 0.0, true, {}};
  // the oracle searches over all complements, so it should dominate the
  // approximate projection; a failure here means the oracle is too weak
  OracleReport rs{"angle_bound/oracle_dominates_approx", 0, 0.0, 1e-10, true, {}};
  std::mt19937_64 rng(opt.seed + 1);
  std::uniform_int_distribution<std::size_t> dim_pick(3, 4), rank_pick(1, 2);
  const RankTuple r{2, 2, 2};
  for (std::size_t i = 0; i < instances; ++i) {
    const Dims dims{dim_pick(rng), dim_pick(rng), dim_pick(rng)};
    RankTuple rbar{2, 2, 2};
    for (;;) {
      rbar = RankTuple{rank_pick(rng), rank_pick(rng), rank_pick(rng)};
      bool valid = rbar != r;
      for (std::size_t k = 0; k < 3; ++k)
        valid = valid && rbar[k] <= rbar[(k + 1) % 3] * rbar[(k + 2) % 3];
      if (valid) break;
    }
    const TuckerTensor x = detail::random_point(dims, rbar, rng);
    const DenseTensor a = detail::random_dense(dims, rng);
    const auto oracle =
        oracles::exact_tangent_projection_oracle(x, a, r, opt.restarts, opt.seed + i);
    const AngleConstants w = angle_constants(dims, r, rbar);

    const double approx = oracles::naive::norm(oracles::ref_embed(approx_project(x, a, r)));
    const double need_a = w.omega_tilde * oracle.norm;
    ra.record(std::max(0.0, need_a - approx), approx - need_a);
    const double excess = (approx - oracle.norm) / std::max(oracle.norm, 1e-300);
    rs.record(std::max(0.0, excess), -excess);

    const DenseTensor vh = oracles::ref_embed(partial_project(x, a, r).direction);
    double ip = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) ip += a.values()[t] * vh.values()[t];
    const double need_p = w.omega_hat * oracle.norm * oracles::naive::norm(vh);
    rp.record(std::max(0.0, need_p - ip), ip - need_p);
  }
  ra.finish();
  rp.finish();
  rs.finish();
  return {ra, rp, rs};
}

/// The constructed complements satisfy the complement inequality.
/// Violation: max(0, rhs - lhs) / max(1, rhs), tolerance 1e-12.
inline OracleReport lemma_suite(const CheckOptions& opt, std::size_t instances = 100) {
  OracleReport rep{"lemma_inequality", 0, 0.0, 1e-12, true, {}};
  std::mt19937_64 rng(opt.seed + 2);
  std::uniform_int_distribution<std::size_t> dim_pick(3, 7);
  for (std::size_t i = 0; i < instances; ++i) {
    const Dims dims{dim_pick(rng), dim_pick(rng), dim_pick(rng)};
    RankTuple r{2, 2, 2};
    for (std::size_t k = 0; k < 3; ++k)
      r[k] = std::uniform_int_distribution<std::size_t>(2, std::min<std::size_t>(dims[k], 4))(rng);
    for (std::size_t k = 0; k < 3; ++k)
      r[k] = std::min(r[k], r[(k + 1) % 3] * r[(k + 2) % 3]);
    unsigned pattern = std::uniform_int_distribution<unsigned>(1, 7)(rng);
    const RankTuple rbar = detail::pattern_rank(r, pattern);
    bool valid = true;
    for (std::size_t k = 0; k < 3; ++k)
      valid = valid && rbar[k] >= 1 && rbar[k] <= rbar[(k + 1) % 3] * rbar[(k + 2) % 3];
    if (!valid) {
      --i;
      continue;
    }
    const TuckerTensor x = detail::random_point(dims, rbar, rng);
    const DenseTensor a = detail::random_dense(dims, rng);
    const auto comp = choose_singular_complement(x, to_sparse(a), r);
    const auto s = oracles::complement_inequality(x, a, r, comp);
    const double viol = std::max(0.0, s.rhs - s.lhs) / std::max(1.0, s.rhs);
    rep.record(viol, s.lhs - s.rhs);
  }
  rep.finish();
  return rep;
}

/// HOSVD quasi-optimality: ||P - Y|| <= (sqrt(d)+1)||Y - A|| and
/// ||A - P|| <= sqrt(d)||A - Y||. Violation: excess over the bound
/// relative to max(1, ||A||), tolerance 1e-10.
inline OracleReport hosvd_suite(const CheckOptions& opt, std::size_t instances = 100) {
  OracleReport rep{"hosvd_bounds", 0, 0.0, 1e-10, true, {}};
  std::mt19937_64 rng(opt.seed + 3);
  std::uniform_real_distribution<double> noise_pick(-4.0, 1.0);
  const Dims dims{5, 6, 4};
  const double sd = std::sqrt(3.0);
  std::uniform_int_distribution<std::size_t> rank_pick(1, 4);
  for (std::size_t i = 0; i < instances; ++i) {
    RankTuple r{1, 1, 1};
    do {
      r = RankTuple{rank_pick(rng), rank_pick(rng), std::min<std::size_t>(rank_pick(rng), 4)};
    } while (!(r[0] <= r[1] * r[2] && r[1] <= r[0] * r[2] && r[2] <= r[0] * r[1]));
    const DenseTensor y = oracles::ref_to_dense(detail::random_point(dims, r, rng));
    // every fifth A is unrelated to Y, the rest are noisy copies at varied levels
    const DenseTensor a = (i % 5 == 4) ? detail::random_dense(dims, rng)
                                       : y + std::pow(10.0, noise_pick(rng)) *
                                                 detail::random_dense(dims, rng);
    const DenseTensor p = oracles::ref_to_dense(hosvd(a, r));
    const double ey = oracles::naive::norm(y - a);
    const double scale = std::max(1.0, oracles::naive::norm(a));
    const double e1 = oracles::naive::norm(p - y) - (sd + 1.0) * ey;
    const double e2 = oracles::naive::norm(a - p) - sd * ey;
    rep.record(std::max(0.0, std::max(e1, e2)) / scale, -std::max(e1, e2) / scale);
  }
  rep.finish();
  return rep;
}

/// Normal cone: sampled W is orthogonal to random tangent vectors and has
/// zero stationarity; with every mode deficient the measure is ||grad||.
inline std::vector<OracleReport> normal_suite(const CheckOptions& opt,
                                              std::size_t per_pattern = 50) {
  OracleReport ro{"normal/orthogonality", 0, 0.0, 1e-10, true, {}};
  OracleReport rs{"normal/stationarity", 0, 0.0, 1e-10, true, {}};
  std::mt19937_64 rng(opt.seed + 4);
  const Dims dims{6, 5, 7};
  const RankTuple r{3, 3, 3};
  for (unsigned pattern = 0; pattern < 8; ++pattern) {
    const RankTuple rbar = detail::pattern_rank(r, pattern);
    for (std::size_t i = 0; i < per_pattern; ++i) {
      const TuckerTensor x = detail::random_point(dims, rbar, rng);
      const DenseTensor w = sample_normal(x, r, rng());
      const TangentVector v = detail::random_tangent(x, r, rng);
      const DenseTensor e = oracles::ref_embed(v);
      double ip = 0.0;
      for (std::size_t t = 0; t < w.size(); ++t) ip += w.values()[t] * e.values()[t];
      const double scale = oracles::naive::norm(w) * oracles::naive::norm(e);
      const double viol = scale > 0.0 ? std::abs(ip) / scale : std::abs(ip);
      ro.record(viol, ro.tolerance - viol);

      if (pattern == 7) {
        const DenseTensor g = detail::random_dense(dims, rng);
        const double gn = oracles::naive::norm(g);
        const double sv = std::abs(stationarity_measure(x, g, r).value - gn) / gn;
        rs.record(sv, rs.tolerance - sv);
      } else {
        const double wn = oracles::naive::norm(w);
        const double sv = stationarity_measure(x, wn > 0.0 ? (1.0 / wn) * w : w, r).value;
        rs.record(sv, rs.tolerance - sv);
      }
    }
  }
  ro.finish();
  rs.finish();
  return {ro, rs};
}

/// Completion gradient vs central differences on 20 coordinates (10 observed,
/// 10 uniform) per instance, h = 1e-6 (1 + ||X||_inf).
inline OracleReport gradient_suite(const CheckOptions& opt, std::size_t instances = 5) {
  OracleReport rep{"gradient_fd", 0, 0.0, 1e-6, true, {}};
  std::mt19937_64 rng(opt.seed + 5);
  const Dims dims{5, 6, 4};
  for (std::size_t i = 0; i < instances; ++i) {
    const SyntheticInstance inst = gen_synthetic(dims, RankTuple{2, 2, 2}, 0.3, rng());
    const CompletionProblem& p = inst.problem;
    const TuckerTensor x = random_tucker(dims, RankTuple{2, 3, 2}, rng);
    const DenseTensor xd = oracles::ref_to_dense(x);
    double inf = 0.0;
    for (double v : xd.values()) inf = std::max(inf, std::abs(v));
    const double h = 1e-6 * (1.0 + inf);

    std::vector<std::size_t> coords;
    for (std::size_t e = 0; e < 10; ++e) {
      const auto idx = p.omega.index(std::uniform_int_distribution<std::size_t>(
          0, p.omega.nnz() - 1)(rng));
      coords.insert(coords.end(), idx.begin(), idx.end());
    }
    for (std::size_t e = 0; e < 10; ++e)
      for (std::size_t k = 0; k < 3; ++k)
        coords.push_back(std::uniform_int_distribution<std::size_t>(0, dims[k] - 1)(rng));

    const auto fd = oracles::finite_diff_gradient(
        [&p](const DenseTensor& y) { return objective_dense(p, y); }, xd, coords, h);
    const DenseTensor g = to_dense(euclidean_gradient(p, x));
    for (std::size_t e = 0; e < fd.size(); ++e) {
      const double gv = g(std::span<const std::size_t>(coords).subspan(e * 3, 3));
      const double err = std::abs(fd[e] - gv);
      const double rel = err == 0.0 ? 0.0 : err / std::max(std::abs(gv), 1e-300);
      rep.record(rel, rep.tolerance - rel);
    }
  }
  rep.finish();
  return rep;
}

/// Structured operations against their dense references, relative error.
inline std::vector<OracleReport> dense_suite(const CheckOptions& opt,
                                             std::size_t instances = 20) {
  auto mk = [](const char* n) { return OracleReport{n, 0, 0.0, 1e-10, true, {}}; };
  OracleReport r_ap = mk("dense/approx_project"), r_pp = mk("dense/partial_project"),
               r_st = mk("dense/stationarity_measure"), r_ho = mk("dense/hosvd_truncate"),
               r_mc = mk("dense/multi_mode_contract"), r_as = mk("dense/add_scaled_tangent"),
               r_ea = mk("dense/entries_at");
  auto rec = [](OracleReport& rep, double v) { rep.record(v, rep.tolerance - v); };
  std::mt19937_64 rng(opt.seed + 6);
  const Dims dims{5, 4, 6};
  const RankTuple r{3, 3, 3};
  for (std::size_t i = 0; i < instances; ++i) {
    const unsigned pattern = static_cast<unsigned>(i % 8);
    const RankTuple rbar = detail::pattern_rank(r, pattern);
    const TuckerTensor x = detail::random_point(dims, rbar, rng);
    const DenseTensor a = detail::random_dense(dims, rng);

    rec(r_ap, detail::rel_diff(oracles::ref_embed(approx_project(x, a, r)),
                               oracles::ref_approx_project(x, a, r)));
    const auto pp = partial_project(x, a, r);
    const auto rp = oracles::ref_partial_project(x, a, r);
    rec(r_pp, pp.branch != rp.branch
                  ? 1.0
                  : detail::rel_diff(oracles::ref_embed(pp.direction), rp.direction));
    const double s_ref = oracles::ref_stationarity(x, a, r);
    rec(r_st, std::abs(stationarity_measure(x, a, r).value - s_ref) / std::max(s_ref, 1e-300));

    const TuckerTensor full = detail::random_point(dims, r, rng);
    rec(r_ho, detail::rel_diff(oracles::ref_to_dense(hosvd_truncate(full, rbar)),
                               oracles::ref_hosvd_truncate(full, rbar)));

    const std::size_t k = i % 3;
    rec(r_mc, detail::rel_diff(multi_mode_contract(to_sparse(a), x.factors(), k),
                               oracles::ref_multi_mode_contract(a, x.factors(), k)));

    const TangentVector v = detail::random_tangent(x, r, rng);
    const double s = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
    rec(r_as, detail::rel_diff(oracles::ref_to_dense(add_scaled_tangent(x, s, v)),
                               oracles::ref_add_scaled_tangent(x, s, v)));

    std::vector<std::size_t> idx;
    for (std::size_t e = 0; e < 30; ++e)
      for (std::size_t m = 0; m < 3; ++m)
        idx.push_back(std::uniform_int_distribution<std::size_t>(0, dims[m] - 1)(rng));
    const auto fast = entries_at(x, idx);
    const auto ref = oracles::ref_entries_at(x, idx);
    double num = 0.0, den = 0.0;
    for (std::size_t e = 0; e < fast.size(); ++e) {
      num += (fast[e] - ref[e]) * (fast[e] - ref[e]);
      den += ref[e] * ref[e];
    }
    rec(r_ea, std::sqrt(num / std::max(den, 1e-300)));
  }
  std::vector<OracleReport> out{r_ap, r_pp, r_st, r_ho, r_mc, r_as, r_ea};
  for (auto& rep : out) rep.finish();
  return out;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"angle", "lemma", "normal", "hosvd", "gradient",
                                              "dense"};
  return names;
}

/// Runs one named suite ("angle" covers the identity and the lower bounds).
inline std::vector<OracleReport> run_suite(const std::string& name, const CheckOptions& opt) {
  if (name == "angle") {
    auto out = angle_identity_suite(opt);
    for (auto& rep : angle_bound_suite(opt)) out.push_back(std::move(rep));
    return out;
  }
  if (name == "lemma") return {lemma_suite(opt)};
  if (name == "normal") return normal_suite(opt);
  if (name == "hosvd") return {hosvd_suite(opt)};
  if (name == "gradient") return {gradient_suite(opt)};
  if (name == "dense") return dense_suite(opt);
  throw PreconditionError("unknown check suite '" + name + "'");
}

}  // namespace tuckeropt::checks
