#include <random>

#include <gtest/gtest.h>

#include "amc/chain.hpp"
#include "amc/monte_carlo.hpp"
#include "fixtures.hpp"

namespace amc {
namespace {

TEST(MonteCarloOracle, ThreeTokenFixture) {
  const auto d = decompose(testing::abc_p());
  const auto est = mc_visitation_oracle(d, 200000, 42);
  // 3 sigma for p = 0.6 at 200k walks is about 0.0033.
  EXPECT_NEAR(est(0, 2), 0.6, 0.01);
  EXPECT_NEAR(est(0, 1), 0.5, 0.01);
  EXPECT_NEAR(est(1, 2), 0.6, 0.01);
  EXPECT_EQ(est(0, 0), 1.0);
  EXPECT_EQ(est(2, 0), 0.0);
}

TEST(MonteCarloOracle, ZeroQAbsorbsImmediately) {
  const auto d = AbsorbingDecomposition::create(Matrix(5), std::vector<double>(5, 1.0), 1e-6);
  EXPECT_EQ(mc_visitation_oracle(d, 1000, 1), Matrix::identity(5));
}

TEST(MonteCarloOracle, DeterministicPerSeed) {
  std::mt19937_64 rng(1);
  const auto d = decompose(testing::random_upper_stochastic(8, rng));
  EXPECT_EQ(mc_visitation_oracle(d, 5000, 99), mc_visitation_oracle(d, 5000, 99));
  EXPECT_NE(mc_visitation_oracle(d, 5000, 99), mc_visitation_oracle(d, 5000, 100));
}

TEST(MonteCarloOracle, RejectsZeroWalks) {
  const auto d = decompose(testing::abc_p());
  EXPECT_THROW(mc_visitation_oracle(d, 0, 1), ConfigError);
}

TEST(MonteCarloOracle, AgreesWithSubstitutionOnRandomChains) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 11;
    const auto d = decompose(testing::random_upper_stochastic(n, rng), 1e-6);
    const auto v = visitation(fundamental(d));
    const auto est = mc_visitation_oracle(d, 50000, 1000 + trial);
    // 50k walks: 3 sigma <= 0.0068.
    EXPECT_LT(max_abs_diff(est, v.matrix()), 0.01) << "trial " << trial;
  }
}

}  // namespace
}  // namespace amc
