#include "test_support.hpp"

using namespace tuckeropt;

namespace {

// tangent vector of the fixed-rank manifold at x (no complement directions)
TangentVector manifold_tangent(const TuckerTensor& x, std::mt19937_64& rng) {
  return checks::detail::random_tangent(x, x.rank(), rng);
}

double inner_dense(const DenseTensor& a, const DenseTensor& b) { return inner(a, b); }

}  // namespace

TEST(ApproxProject, FullRankReducesToTangentSpace) {
  std::mt19937_64 rng(51);
  const TuckerTensor x = rand_point({5, 4, 6}, {2, 2, 3}, rng);
  const DenseTensor a = embed(manifold_tangent(x, rng));
  const TangentVector v = approx_project(x, a, x.rank());
  EXPECT_LT(rel_err(embed(v), a), 1e-10);
  EXPECT_LT(rel_err(embed(tangent_space_project(x, a)), a), 1e-10);
}

TEST(ApproxProject, ZeroInputGivesZeroVector) {
  std::mt19937_64 rng(52);
  const TuckerTensor x = rand_point({4, 4, 4}, {1, 2, 2}, rng);
  const TangentVector v = approx_project(x, DenseTensor({4, 4, 4}), {2, 2, 2});
  EXPECT_EQ(v.norm_squared(), 0.0);
  EXPECT_LT(v.constraint_defect(), 1e-12);
}

TEST(ApproxProject, ConstraintsAndNormFormula) {
  std::mt19937_64 rng(53);
  const RankTuple r{3, 3, 3};
  for (unsigned pattern = 0; pattern < 8; ++pattern) {
    const TuckerTensor x = rand_point({6, 5, 7}, checks::detail::pattern_rank(r, pattern), rng);
    const DenseTensor a = rand_dense({6, 5, 7}, rng);
    const TangentVector v = approx_project(x, a, r);
    EXPECT_LT(v.constraint_defect(), 1e-10);
    const DenseTensor e = embed(v);
    EXPECT_NEAR(v.norm_squared(), inner(e, e), 1e-10 * inner(e, e));
    // angle identity <A, V> = ||V||^2
    EXPECT_NEAR(inner(a, e), inner(e, e), 1e-10 * inner(e, e)) << "pattern " << pattern;
    EXPECT_LT(rel_err(e, oracles::ref_approx_project(x, a, r)), 1e-10);
  }
}

TEST(ApproxProject, AngleIdentitySmallSuite) {
  for (const auto& rep : checks::angle_identity_suite(checks::CheckOptions{}, 3))
    EXPECT_TRUE(rep.pass) << rep.name << " max violation " << rep.max_violation;
}

TEST(ApproxProject, BoundErrors) {
  std::mt19937_64 rng(54);
  const TuckerTensor x = rand_point({4, 4, 4}, {2, 2, 2}, rng);
  EXPECT_THROW(approx_project(x, DenseTensor({4, 4, 4}), RankTuple{1, 2, 2}),
               PreconditionError);
  EXPECT_THROW(approx_project(x, DenseTensor({4, 4, 3}), RankTuple{2, 2, 2}), DimensionError);
}

TEST(SingularComplement, NoDeficiencyGivesEmptyBlocks) {
  std::mt19937_64 rng(55);
  const TuckerTensor x = rand_point({4, 4, 4}, {2, 2, 2}, rng);
  const auto comp = choose_singular_complement(x, to_sparse(rand_dense({4, 4, 4}, rng)), x.rank());
  for (const Matrix& c : comp) EXPECT_EQ(c.cols(), 0);
}

TEST(SingularComplement, ZeroInputIsPaddedDeterministically) {
  std::mt19937_64 rng(56);
  const TuckerTensor x = rand_point({4, 4, 4}, {1, 1, 1}, rng);
  const SparseCooTensor zero({4, 4, 4});
  const auto c1 = choose_singular_complement(x, zero, {2, 2, 2});
  const auto c2 = choose_singular_complement(x, zero, {2, 2, 2});
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(c1[k].cols(), 1);
    EXPECT_EQ(c1[k], c2[k]);
    EXPECT_LT((x.factor(k).transpose() * c1[k]).norm(), 1e-12);
  }
}

TEST(SingularComplement, LemmaInequalityOnRankOnePoint) {
  std::mt19937_64 rng(57);
  for (int trial = 0; trial < 20; ++trial) {
    const TuckerTensor x = rand_point({4, 4, 4}, {1, 1, 1}, rng);
    const DenseTensor a = rand_dense({4, 4, 4}, rng);
    const RankTuple r{2, 2, 2};
    const auto comp = choose_singular_complement(x, to_sparse(a), r);
    const auto s = oracles::complement_inequality(x, a, r, comp);
    EXPECT_GE(s.lhs, s.rhs * (1.0 - 1e-12));
    const auto ref = oracles::ref_complement(x, a, r);
    for (std::size_t k = 0; k < 3; ++k)
      EXPECT_LT((comp[k] * comp[k].transpose() - ref[k] * ref[k].transpose()).norm(), 1e-8);
  }
}

TEST(PartialProject, CoreSupportedInputPicksBranchZero) {
  std::mt19937_64 rng(58);
  const TuckerTensor x = rand_point({5, 4, 6}, {2, 2, 3}, rng);
  // A in span(U_1) (x) span(U_2) (x) span(U_3)
  DenseTensor a = rand_dense({2, 2, 3}, rng);
  for (std::size_t k = 0; k < 3; ++k) a = mode_product(a, k, x.factor(k));
  const PartialProjection p = partial_project(x, a, x.rank());
  EXPECT_EQ(p.branch, 0u);
  EXPECT_LT(rel_err(embed(p.direction), a), 1e-10);
}

TEST(PartialProject, ZeroInputTiesToCore) {
  std::mt19937_64 rng(59);
  const TuckerTensor x = rand_point({4, 4, 4}, {1, 2, 2}, rng);
  const PartialProjection p = partial_project(x, DenseTensor({4, 4, 4}), {2, 2, 2});
  EXPECT_EQ(p.branch, 0u);
  EXPECT_EQ(p.direction.norm_squared(), 0.0);
}

TEST(PartialProject, StepStaysInVariety) {
  std::mt19937_64 rng(60);
  const RankTuple r{3, 3, 3};
  for (unsigned pattern = 0; pattern < 8; ++pattern) {
    const TuckerTensor x = rand_point({6, 5, 7}, checks::detail::pattern_rank(r, pattern), rng);
    const DenseTensor a = rand_dense({6, 5, 7}, rng);
    const PartialProjection p = partial_project(x, a, r);
    const DenseTensor sum = to_dense(x) + embed(p.direction);
    EXPECT_TRUE(tucker_rank(sum, 1e-10).all_leq(r)) << "pattern " << pattern;
    if (p.branch > 0) {
      EXPECT_TRUE(tucker_rank(sum, 1e-10).all_leq(x.rank()));
    }
    EXPECT_EQ(p.branch_norms.size(), 4u);
    const oracles::RefPartial ref = oracles::ref_partial_project(x, a, r);
    EXPECT_EQ(ref.branch, p.branch);
    EXPECT_LT(rel_err(embed(p.direction), ref.direction), 1e-10);
    const DenseTensor e = embed(p.direction);
    EXPECT_NEAR(inner(a, e), inner(e, e), 1e-10 * inner(e, e));
  }
}

TEST(TangentSpaceProject, FixedPointNormalKernelAndContraction) {
  std::mt19937_64 rng(61);
  const TuckerTensor x = rand_point({5, 6, 4}, {2, 3, 2}, rng);
  const DenseTensor t = embed(manifold_tangent(x, rng));
  EXPECT_LT(rel_err(embed(tangent_space_project(x, t)), t), 1e-10);

  const DenseTensor w = sample_normal(x, x.rank(), 7);
  ASSERT_GT(fro_norm(w), 0.0);
  EXPECT_LT(fro_norm(embed(tangent_space_project(x, w))), 1e-10 * fro_norm(w));

  for (int trial = 0; trial < 100; ++trial) {
    const DenseTensor a = rand_dense({5, 6, 4}, rng);
    const DenseTensor p = embed(tangent_space_project(x, a));
    EXPECT_LE(fro_norm(p), fro_norm(a) * (1.0 + 1e-12));
    // orthogonal projector: A - P(A) is orthogonal to P(A)
    EXPECT_NEAR(inner_dense(a - p, p), 0.0, 1e-10 * fro_norm(a) * fro_norm(p));
  }
}

TEST(Stationarity, ZeroGradientAndAllDeficient) {
  std::mt19937_64 rng(62);
  const TuckerTensor x = rand_point({4, 5, 3}, {1, 1, 1}, rng);
  EXPECT_EQ(stationarity_measure(x, DenseTensor({4, 5, 3}), {2, 2, 2}).value, 0.0);
  const DenseTensor g = rand_dense({4, 5, 3}, rng);
  const StationarityReport rep = stationarity_measure(x, g, {2, 2, 2});
  EXPECT_NEAR(rep.value, fro_norm(g), 1e-12 * fro_norm(g));
  EXPECT_EQ(rep.deficient_modes.size(), 3u);
  // the zero tensor has every mode deficient as well
  const TuckerTensor z = TuckerTensor::zeros({4, 5, 3});
  EXPECT_NEAR(stationarity_measure(z, g, {1, 1, 1}).value, fro_norm(g), 1e-12 * fro_norm(g));
}

TEST(Stationarity, NormalConeElementsAreStationary) {
  std::mt19937_64 rng(63);
  const RankTuple r{3, 3, 3};
  for (unsigned pattern = 0; pattern < 7; ++pattern) {
    const TuckerTensor x = rand_point({6, 5, 7}, checks::detail::pattern_rank(r, pattern), rng);
    const DenseTensor w = sample_normal(x, r, 100 + pattern);
    ASSERT_GT(fro_norm(w), 0.0);
    const DenseTensor grad = -1.0 * w;
    EXPECT_LE(stationarity_measure(x, grad, r).value, 1e-10 * fro_norm(grad));
    // a generic gradient is not stationary
    const DenseTensor g = rand_dense({6, 5, 7}, rng);
    const double v = stationarity_measure(x, g, r).value;
    EXPECT_GT(v, 1e-3);
    EXPECT_NEAR(v, oracles::ref_stationarity(x, g, r), 1e-10 * std::max(1.0, v));
  }
}

TEST(SampleNormal, AllDeficientIsZeroAndOrthogonalToTangents) {
  std::mt19937_64 rng(64);
  const TuckerTensor x = rand_point({5, 5, 5}, {1, 1, 1}, rng);
  EXPECT_EQ(fro_norm(sample_normal(x, {2, 2, 2}, 1)), 0.0);

  const RankTuple r{3, 3, 3};
  for (unsigned pattern = 0; pattern < 8; ++pattern) {
    const TuckerTensor y = rand_point({6, 5, 7}, checks::detail::pattern_rank(r, pattern), rng);
    for (int trial = 0; trial < 10; ++trial) {
      const DenseTensor w = sample_normal(y, r, rng());
      const TangentVector v = checks::detail::random_tangent(y, r, rng);
      const DenseTensor e = embed(v);
      EXPECT_LE(std::abs(inner(w, e)), 1e-10 * fro_norm(w) * fro_norm(e) + 1e-300);
    }
  }
  EXPECT_TRUE(checks::normal_suite(checks::CheckOptions{}, 5)[0].pass);
}

TEST(AngleConstants, Examples) {
  const AngleConstants none = angle_constants({4, 4, 4}, {2, 2, 2}, {2, 2, 2});
  EXPECT_DOUBLE_EQ(none.omega_tilde, 1.0);
  EXPECT_DOUBLE_EQ(none.omega_hat, 0.5);
  const AngleConstants all = angle_constants({4, 4, 4}, {2, 2, 2}, {1, 1, 1});
  EXPECT_DOUBLE_EQ(all.omega_tilde, 1.0 / 16.0);
  EXPECT_LE(all.omega_hat, all.omega_tilde);
  for (const RankTuple& rbar : {RankTuple{1, 2, 2}, RankTuple{2, 1, 1}, RankTuple{2, 2, 2}}) {
    const AngleConstants c = angle_constants({5, 6, 4}, {2, 2, 2}, rbar);
    EXPECT_LE(c.omega_hat, c.omega_tilde);
  }
  EXPECT_THROW(angle_constants({4, 4, 4}, {2, 2, 2}, {3, 2, 2}), PreconditionError);
}
