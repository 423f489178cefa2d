#include "test_support.hpp"

using namespace tuckeropt;

namespace {

// f(x) = x^2 / 2 on R^1, viewed as an order-1 tensor
Objective half_square() {
  Objective obj;
  obj.dims = {1};
  obj.value = [](const TuckerTensor& x) {
    const double v = to_dense(x).values()[0];
    return 0.5 * v * v;
  };
  obj.gradient = [](const TuckerTensor& x) {
    return SparseCooTensor({1}, {0}, {to_dense(x).values()[0]});
  };
  return obj;
}

TuckerTensor scalar(double v) {
  return TuckerTensor({1}, DenseTensor({1}, {v}), {Matrix::Identity(1, 1)});
}

// superdiagonal core with the given values, identity-padded factors
TuckerTensor superdiagonal(const std::vector<double>& s, std::size_t n) {
  const std::size_t q = s.size();
  DenseTensor core({q, q, q});
  for (std::size_t i = 0; i < q; ++i) {
    const std::vector<std::size_t> idx{i, i, i};
    core(idx) = s[i];
  }
  const auto ni = static_cast<Eigen::Index>(n), qi = static_cast<Eigen::Index>(q);
  return TuckerTensor({n, n, n}, core,
                      {Matrix::Identity(ni, qi), Matrix::Identity(ni, qi), Matrix::Identity(ni, qi)});
}

SolverConfig quick(std::size_t iters) {
  SolverConfig cfg;
  cfg.max_iters = iters;
  cfg.record_timing = false;
  return cfg;
}

}  // namespace

TEST(Armijo, FlatSpaceQuadraticAcceptsFullStep) {
  const Objective obj = half_square();
  const TuckerTensor x = scalar(2.0);
  std::vector<Matrix> none{Matrix(1, 0)};
  TangentVector v = TangentVector::zero(x, {1}, none);
  v.core.values()[0] = -2.0;
  SolverConfig cfg;
  cfg.armijo_a = 0.5;
  const ArmijoResult a = armijo_search(obj, x, v, 4.0, 1.0, cfg, false);
  EXPECT_EQ(a.step, 1.0);
  EXPECT_EQ(a.backtracks, 0u);
  EXPECT_EQ(a.fy, 0.0);
  // a step twice as long overshoots to x = -2 and must be halved once
  const ArmijoResult b = armijo_search(obj, x, v, 4.0, 2.0, cfg, false);
  EXPECT_EQ(b.step, 1.0);
  EXPECT_EQ(b.backtracks, 1u);
}

TEST(Armijo, TinyStepAcceptedImmediately) {
  const Objective obj = half_square();
  const TuckerTensor x = scalar(2.0);
  std::vector<Matrix> none{Matrix(1, 0)};
  TangentVector v = TangentVector::zero(x, {1}, none);
  v.core.values()[0] = -2.0;
  const ArmijoResult a = armijo_search(obj, x, v, 4.0, 1e-6, SolverConfig{}, true);
  EXPECT_EQ(a.step, 1e-6);
  EXPECT_EQ(a.backtracks, 0u);
}

TEST(Armijo, RejectsNonDescentAndFailsBelowFloor) {
  const Objective obj = half_square();
  const TuckerTensor x = scalar(2.0);
  std::vector<Matrix> none{Matrix(1, 0)};
  TangentVector v = TangentVector::zero(x, {1}, none);
  v.core.values()[0] = 2.0;
  EXPECT_THROW(armijo_search(obj, x, v, -4.0, 1.0, SolverConfig{}, false), PreconditionError);
  EXPECT_THROW(armijo_search(obj, x, v, 0.0, 1.0, SolverConfig{}, false), PreconditionError);
  // an ascent direction with a claimed positive slope never passes
  EXPECT_THROW(armijo_search(obj, x, v, 4.0, 1.0, SolverConfig{}, false), LineSearchFailure);
}

TEST(IndexSets, GrapRangeFromDeltaRank) {
  const TuckerTensor x = superdiagonal({3.0, 1.0, 0.009, 0.005}, 6);
  const IndexSets sets = grap_r_index_sets(x, 0.01);
  for (const auto& s : sets) EXPECT_EQ(s, (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_EQ(candidate_count(sets), 27u);

  for (const auto& s : grap_r_index_sets(superdiagonal({3.0, 1.0}, 4), 0.01))
    EXPECT_EQ(s, (std::vector<std::size_t>{2}));
  for (const auto& s : grap_r_index_sets(superdiagonal({0.009}, 4), 0.01))
    EXPECT_EQ(s, (std::vector<std::size_t>{0, 1}));
  EXPECT_THROW(grap_r_index_sets(x, 0.0), PreconditionError);
}

TEST(IndexSets, RetractionFreeDropsAtMostOne) {
  for (const auto& s : rfgrap_r_index_sets(superdiagonal({3.0, 1.0, 0.005}, 5), 0.01))
    EXPECT_EQ(s, (std::vector<std::size_t>{2, 3}));
  for (const auto& s : rfgrap_r_index_sets(superdiagonal({3.0, 1.0, 0.5}, 5), 0.01))
    EXPECT_EQ(s, (std::vector<std::size_t>{3}));
  for (const auto& s : rfgrap_r_index_sets(superdiagonal({0.005}, 5), 0.01))
    EXPECT_EQ(s, (std::vector<std::size_t>{0, 1}));
  // never more candidates than GRAP-R at the same point, and at most 2^d
  const TuckerTensor x = superdiagonal({3.0, 1.0, 0.009, 0.005}, 6);
  EXPECT_LE(candidate_count(rfgrap_r_index_sets(x, 0.01)),
            candidate_count(grap_r_index_sets(x, 0.01)));
  EXPECT_LE(candidate_count(rfgrap_r_index_sets(x, 0.01)), 8u);
}

TEST(IndexSets, LexicographicEnumeration) {
  const IndexSets sets{{1, 2}, {3}, {0, 1}};
  const auto c = enumerate_candidates(sets);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c[0], (RankTuple{1, 3, 0}));
  EXPECT_EQ(c[1], (RankTuple{1, 3, 1}));
  EXPECT_EQ(c[2], (RankTuple{2, 3, 0}));
  EXPECT_EQ(c[3], (RankTuple{2, 3, 1}));
  EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
}

TEST(GradientStep, ZeroGradientLeavesPointUnchanged) {
  const SyntheticInstance inst = gen_synthetic({5, 5, 5}, {2, 2, 2}, 0.45, 1);
  const Objective obj = make_objective(inst.problem);
  for (bool retracted : {true, false}) {
    const StepOutcome o = retracted ? grap_step(obj, inst.truth, {3, 3, 3}, SolverConfig{})
                                    : rfgrap_step(obj, inst.truth, {3, 3, 3}, SolverConfig{});
    EXPECT_TRUE(o.zero_direction);
    EXPECT_TRUE(o.y == inst.truth);
    EXPECT_EQ(o.step, 0.0);
  }
}

TEST(GradientStep, FullObservationDecreases) {
  const SyntheticInstance inst = gen_synthetic({5, 4, 6}, {2, 2, 2}, 1.0, 2, 0);
  const Objective obj = make_objective(inst.problem);
  std::mt19937_64 rng(91);
  const RankTuple r{3, 3, 3};
  for (unsigned pattern = 0; pattern < 8; ++pattern) {
    const TuckerTensor x = rand_point(inst.problem.dims, checks::detail::pattern_rank(r, pattern), rng);
    const double fx = obj.value(x);
    const StepOutcome g = grap_step(obj, x, r, SolverConfig{});
    EXPECT_LT(g.fy, fx);
    EXPECT_TRUE(g.y.rank().all_leq(r));
    const StepOutcome f = rfgrap_step(obj, x, r, SolverConfig{});
    EXPECT_LT(f.fy, fx);
    EXPECT_TRUE(tucker_rank(to_dense(f.y), 1e-10).all_leq(r));
    if (f.branch > 0) {
      EXPECT_TRUE(f.y.rank().all_leq(x.rank()));
    }
  }
}

TEST(Solve, StationaryStartStopsImmediately) {
  const SyntheticInstance inst = gen_synthetic({5, 5, 5}, {2, 2, 2}, 0.45, 3);
  const Objective obj = make_objective(inst.problem);
  for (Method m : {Method::Grap, Method::Rfgrap, Method::GrapR, Method::RfgrapR}) {
    const SolveResult res = solve(m, obj, inst.truth, {2, 2, 2}, quick(50));
    EXPECT_EQ(res.termination, Termination::Converged) << method_name(m);
    EXPECT_EQ(res.trace.size(), 1u);
    EXPECT_TRUE(res.x == inst.truth);
  }
}

TEST(Solve, ZeroIterationBudget) {
  const SyntheticInstance inst = gen_synthetic({5, 5, 5}, {2, 2, 2}, 0.45, 4);
  const Objective obj = make_objective(inst.problem);
  const TuckerTensor x0 = initial_point(inst.problem, {2, 2, 2}, 5);
  const SolveResult res = solve_grap(obj, x0, {2, 2, 2}, quick(0));
  EXPECT_EQ(res.termination, Termination::IterationCap);
  EXPECT_EQ(res.trace.size(), 1u);
  EXPECT_EQ(res.iterations(), 0u);
}

TEST(Solve, RejectsBadStart) {
  const SyntheticInstance inst = gen_synthetic({5, 5, 5}, {2, 2, 2}, 0.45, 4);
  const Objective obj = make_objective(inst.problem);
  const TuckerTensor x0 = initial_point(inst.problem, {3, 3, 3}, 5);
  EXPECT_THROW(solve_grap(obj, x0, {2, 2, 2}, quick(5)), PreconditionError);
  SolverConfig bad = quick(5);
  bad.rho = 1.5;
  EXPECT_THROW(solve_grap(obj, initial_point(inst.problem, {2, 2, 2}, 5), {2, 2, 2}, bad),
               PreconditionError);
}

TEST(Solve, MonotoneTracesForAllMethods) {
  const SyntheticInstance inst = gen_synthetic({8, 8, 8}, {2, 2, 2}, 0.4, 6);
  const Objective obj = make_objective(inst.problem);
  const RankTuple r{3, 3, 3};
  const TuckerTensor x0 = initial_point(inst.problem, r, 7);
  for (Method m : {Method::Grap, Method::Rfgrap, Method::GrapR, Method::RfgrapR}) {
    const SolveResult res = solve(m, obj, x0, r, quick(40));
    for (std::size_t t = 1; t < res.trace.size(); ++t) {
      const IterRecord& rec = res.trace[t];
      EXPECT_LE(rec.f, res.trace[t - 1].f) << method_name(m) << " iter " << t;
      EXPECT_LE(rec.start_f, res.trace[t - 1].f + 1e-12 * res.trace[t - 1].f);
      EXPECT_GE(rec.start_f - rec.f, rec.step * 1e-4 * rec.dir_inner) << method_name(m);
      EXPECT_TRUE(rec.rank.all_leq(r));
      EXPECT_TRUE(rec.candidate_rank.all_leq(r));
    }
  }
}

TEST(Solve, TinyDeltaMakesGrapREqualGrap) {
  const SyntheticInstance inst = gen_synthetic({7, 7, 7}, {2, 2, 2}, 0.45, 8);
  const Objective obj = make_objective(inst.problem);
  const RankTuple r{2, 2, 2};
  const TuckerTensor x0 = initial_point(inst.problem, r, 9);
  SolverConfig cfg = quick(25);
  cfg.delta = 1e-300;
  cfg.delta_absolute = true;
  const SolveResult a = solve_grap(obj, x0, r, cfg);
  const SolveResult b = solve_grap_r(obj, x0, r, cfg);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t t = 0; t < a.trace.size(); ++t) {
    EXPECT_EQ(a.trace[t].f, b.trace[t].f);
    EXPECT_EQ(a.trace[t].step, b.trace[t].step);
  }
  const SolveResult c = solve_rfgrap(obj, x0, r, cfg);
  const SolveResult d = solve_rfgrap_r(obj, x0, r, cfg);
  ASSERT_EQ(c.trace.size(), d.trace.size());
  for (std::size_t t = 0; t < c.trace.size(); ++t) EXPECT_EQ(c.trace[t].f, d.trace[t].f);
}

TEST(Solve, DeterministicAndThreadIndependent) {
  const SyntheticInstance inst = gen_synthetic({8, 8, 8}, {2, 2, 2}, 0.4, 10);
  const Objective obj = make_objective(inst.problem);
  const RankTuple r{3, 3, 3};
  const TuckerTensor x0 = initial_point(inst.problem, r, 11);
  SolverConfig cfg = quick(20);
  cfg.delta = 0.3;  // large enough to produce several candidates per iteration
  const SolveResult a = solve_grap_r(obj, x0, r, cfg);
  const SolveResult b = solve_grap_r(obj, x0, r, cfg);
  cfg.threads = 3;
  const SolveResult c = solve_grap_r(obj, x0, r, cfg);
  std::size_t multi = 0;
  ASSERT_EQ(a.trace.size(), b.trace.size());
  ASSERT_EQ(a.trace.size(), c.trace.size());
  for (std::size_t t = 0; t < a.trace.size(); ++t) {
    EXPECT_EQ(a.trace[t].f, b.trace[t].f);
    EXPECT_EQ(a.trace[t].f, c.trace[t].f);
    EXPECT_EQ(a.trace[t].candidate_rank, c.trace[t].candidate_rank);
    if (a.trace[t].candidates > 1) ++multi;
  }
  EXPECT_GT(multi, 0u);
  EXPECT_TRUE(a.x == c.x);
}

TEST(Solve, CandidateCapExceeded) {
  // every mode has sigma = (3, 1, 0.009, 0.005): 27 candidates with delta 0.01
  const TuckerTensor x0 = superdiagonal({3.0, 1.0, 0.009, 0.005}, 6);
  const SyntheticInstance inst = gen_synthetic({6, 6, 6}, {3, 3, 3}, 0.5, 12);
  const Objective obj = make_objective(inst.problem);
  SolverConfig cfg = quick(3);
  cfg.delta = 0.01;
  cfg.delta_absolute = true;
  cfg.candidate_cap = 10;
  try {
    solve_grap_r(obj, x0, {4, 4, 4}, cfg);
    FAIL() << "expected CandidateCapExceeded";
  } catch (const CandidateCapExceeded& e) {
    EXPECT_NE(std::string(e.what()).find("27"), std::string::npos);
  }
  cfg.candidate_cap = 27;
  EXPECT_NO_THROW(solve_grap_r(obj, x0, {4, 4, 4}, cfg));
}

TEST(Solve, RelativeDeltaFallsBackAtZero) {
  const SyntheticInstance inst = gen_synthetic({5, 5, 5}, {1, 1, 1}, 0.45, 13);
  const Objective obj = make_objective(inst.problem);
  SolverConfig cfg = quick(1);
  const SolveResult z = solve_grap_r(obj, TuckerTensor::zeros({5, 5, 5}), {1, 1, 1}, cfg);
  EXPECT_EQ(z.effective_delta, cfg.delta);
  const TuckerTensor x0 = superdiagonal({2.0}, 5);
  const SolveResult s = solve_grap_r(obj, x0, {1, 1, 1}, cfg);
  EXPECT_DOUBLE_EQ(s.effective_delta, 2.0 * cfg.delta);
}

TEST(Solve, MethodNamesRoundTrip) {
  for (Method m : {Method::Grap, Method::Rfgrap, Method::GrapR, Method::RfgrapR})
    EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_THROW(parse_method("newton"), PreconditionError);
}
