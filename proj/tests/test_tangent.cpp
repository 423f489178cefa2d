#include "test_support.hpp"

using namespace tuckeropt;

TEST(Tangent, EmbedMatchesReference) {
  std::mt19937_64 rng(41);
  const RankTuple r{3, 3, 3};
  for (unsigned pattern = 0; pattern < 8; ++pattern) {
    const RankTuple rbar = checks::detail::pattern_rank(r, pattern);
    const TuckerTensor x = rand_point({5, 6, 4}, rbar, rng);
    const TangentVector v = checks::detail::random_tangent(x, r, rng);
    EXPECT_LT(v.constraint_defect(), 1e-12);
    const DenseTensor ref = oracles::ref_embed(v);
    EXPECT_LT(rel_err(embed(v), ref), 1e-12) << "pattern " << pattern;
    EXPECT_NEAR(v.norm_squared(), inner(ref, ref), 1e-10 * inner(ref, ref));
  }
}

TEST(Tangent, ZeroVector) {
  std::mt19937_64 rng(42);
  const TuckerTensor x = rand_point({4, 4, 4}, {2, 2, 2}, rng);
  std::vector<Matrix> comp;
  for (std::size_t k = 0; k < 3; ++k) comp.push_back(orthonormal_complement(x.factor(k), 1));
  const TangentVector v = TangentVector::zero(x, {3, 3, 3}, comp);
  EXPECT_EQ(v.norm_squared(), 0.0);
  EXPECT_EQ(fro_norm(embed(v)), 0.0);
  EXPECT_EQ(v.extended_factor(0).cols(), 3);
}

TEST(Tangent, ScaledIsLinear) {
  std::mt19937_64 rng(43);
  const TuckerTensor x = rand_point({4, 5, 3}, {2, 2, 2}, rng);
  const TangentVector v = checks::detail::random_tangent(x, {3, 2, 2}, rng);
  EXPECT_LT(rel_err(embed(v.scaled(-2.5)), -2.5 * embed(v)), 1e-13);
}

TEST(Tangent, EntriesMatchEmbedding) {
  std::mt19937_64 rng(44);
  const TuckerTensor x = rand_point({4, 5, 3}, {2, 1, 2}, rng);
  const TangentVector v = checks::detail::random_tangent(x, {3, 2, 2}, rng);
  const DenseTensor full = embed(v);
  std::vector<std::size_t> idx;
  for (std::size_t e = 0; e < full.size(); ++e) {
    const auto mi = oracles::naive::multi_index(e, full.dims());
    idx.insert(idx.end(), mi.begin(), mi.end());
  }
  const auto vals = tangent_entries(v, idx);
  for (std::size_t e = 0; e < full.size(); ++e) EXPECT_NEAR(vals[e], full.values()[e], 1e-12);
}

TEST(AddScaledTangent, ExactSumAndRankBound) {
  std::mt19937_64 rng(45);
  const RankTuple r{3, 3, 3};
  for (unsigned pattern = 0; pattern < 8; ++pattern) {
    const TuckerTensor x = rand_point({5, 6, 4}, checks::detail::pattern_rank(r, pattern), rng);
    const TangentVector v = checks::detail::random_tangent(x, r, rng);
    const double s = 0.7;
    const TuckerTensor y = add_scaled_tangent(x, s, v);
    EXPECT_LT(rel_err(to_dense(y), oracles::ref_add_scaled_tangent(x, s, v)), 1e-12);
    EXPECT_LT(y.max_orthonormality_defect(), 1e-12);
    // X + sV lies in M_{<= 2r} and generically above r in the factor directions
    for (std::size_t k = 0; k < 3; ++k) EXPECT_LE(y.rank()[k], 2 * r[k]);
    EXPECT_EQ(tucker_rank(to_dense(y)), y.rank());
  }
}

TEST(AddScaledTangent, WrongAnchorThrows) {
  std::mt19937_64 rng(46);
  const TuckerTensor x = rand_point({4, 4, 4}, {2, 2, 2}, rng);
  const TuckerTensor z = rand_point({4, 4, 4}, {2, 2, 2}, rng);
  const TangentVector v = checks::detail::random_tangent(x, {2, 2, 2}, rng);
  EXPECT_THROW(add_scaled_tangent(z, 1.0, v), PreconditionError);
}

TEST(AddScaledTangent, CoreOnlyStepStaysInManifold) {
  // only the core moves: X + sV keeps rank rbar when udot = 0 and ucomp empty
  std::mt19937_64 rng(47);
  const TuckerTensor x = rand_point({4, 5, 3}, {2, 2, 2}, rng);
  std::vector<Matrix> empty;
  for (std::size_t n : x.dims()) empty.emplace_back(static_cast<Eigen::Index>(n), 0);
  TangentVector v = TangentVector::zero(x, x.rank(), empty);
  v.core = rand_dense({2, 2, 2}, rng);
  const TuckerTensor y = add_scaled_tangent(x, 1.0, v);
  EXPECT_EQ(y.rank(), x.rank());
}

TEST(AddScaledTangent, ZeroStepAndZeroVector) {
  std::mt19937_64 rng(48);
  const TuckerTensor x = rand_point({4, 5, 3}, {2, 1, 2}, rng);
  const TangentVector v = checks::detail::random_tangent(x, {3, 2, 2}, rng);
  const TuckerTensor y0 = add_scaled_tangent(x, 0.0, v);
  EXPECT_EQ(y0.rank(), x.rank());
  EXPECT_LT(rel_err(to_dense(y0), to_dense(x)), 1e-12);
  const TuckerTensor y1 = add_scaled_tangent(x, 1.0, v.scaled(0.0));
  EXPECT_LT(rel_err(to_dense(y1), to_dense(x)), 1e-12);
}
