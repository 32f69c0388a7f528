#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "doge/confidence.hpp"
#include "doge/rng.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace doge {
namespace {

TEST(Confidence, OneHotIsFullyConfident) {
  const ProbDist d(std::vector<double>{0.0, 1.0, 0.0});
  const ConfidenceScore s = factual_confidence(d, 1.0, 0.0);
  EXPECT_DOUBLE_EQ(s.p_max, 1.0);
  EXPECT_DOUBLE_EQ(s.entropy_bits, 0.0);
  EXPECT_DOUBLE_EQ(s.score, 1.0);
}

TEST(Confidence, UniformPairGeometric) {
  const ProbDist d(std::vector<double>{0.5, 0.5});
  const ConfidenceScore s = factual_confidence(d, 1.0, 0.3);
  EXPECT_DOUBLE_EQ(s.entropy_bits, 1.0);
  EXPECT_NEAR(s.score, 0.2, 1e-15);
}

TEST(Confidence, UniformPairOtherMeans) {
  const ProbDist d(std::vector<double>{0.5, 0.5});
  // a = 0.5, b = 0.5: every mean of equal values is 0.5.
  EXPECT_NEAR(factual_confidence(d, 1.0, 0.3, ConfidenceVariant::kArithmetic).score, 0.2, 1e-15);
  EXPECT_NEAR(factual_confidence(d, 1.0, 0.3, ConfidenceVariant::kHarmonic).score, 0.2, 1e-15);
}

TEST(Confidence, MeansDifferOnSkewedInput) {
  // p = (0.75, 0.25): H = 0.811278..., a = 0.75, b = 1 / 1.811278...
  const ProbDist d(std::vector<double>{0.75, 0.25});
  const double h = -(0.75 * std::log2(0.75) + 0.25 * std::log2(0.25));
  const double b = 1.0 / (h + 1.0);
  EXPECT_NEAR(factual_confidence(d, 1.0, 0.0, ConfidenceVariant::kGeometric).score, std::sqrt(0.75 * b), 1e-15);
  EXPECT_NEAR(factual_confidence(d, 1.0, 0.0, ConfidenceVariant::kArithmetic).score, (0.75 + b) / 2, 1e-15);
  EXPECT_NEAR(factual_confidence(d, 1.0, 0.0, ConfidenceVariant::kHarmonic).score, 2 * 0.75 * b / (0.75 + b),
              1e-15);
}

TEST(Confidence, RandomizedAgainstOracle) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 15);
    const ProbDist d = testing::random_dist(rng, n);
    const double eta = rng.uniform(0.0, 3.0);
    const double gamma = rng.uniform(-0.5, 0.5);
    for (auto v : {ConfidenceVariant::kGeometric, ConfidenceVariant::kArithmetic, ConfidenceVariant::kHarmonic}) {
      EXPECT_NEAR(factual_confidence(d, eta, gamma, v).score, oracle::confidence(d.values(), eta, gamma, v), 1e-12);
    }
  }
}

TEST(Confidence, GeometricMonotonicity) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const double h = rng.uniform(0.0, 8.0);
    const double p1 = rng.uniform(0.01, 1.0), p2 = rng.uniform(0.01, 1.0);
    if (p1 == p2) continue;
    const double lo = std::min(p1, p2), hi = std::max(p1, p2);
    EXPECT_LT(combine_confidence(lo, h, 1.0, 0.3), combine_confidence(hi, h, 1.0, 0.3));
    const double p = rng.uniform(0.01, 1.0);
    const double h1 = rng.uniform(0.0, 8.0), h2 = rng.uniform(0.0, 8.0);
    if (h1 == h2) continue;
    EXPECT_GT(combine_confidence(p, std::min(h1, h2), 1.0, 0.3), combine_confidence(p, std::max(h1, h2), 1.0, 0.3));
  }
}

TEST(Confidence, GeometricRange) {
  Rng rng(5);
  const double gamma = 0.3;
  for (int i = 0; i < 300; ++i) {
    const ProbDist d = testing::random_dist(rng, 2 + static_cast<std::size_t>(rng.uniform() * 30));
    const double s = factual_confidence(d, 1.0, gamma).score;
    EXPECT_GT(s, -gamma);
    EXPECT_LE(s, 1.0 - gamma);
  }
}

TEST(Confidence, NegativeEtaRejected) {
  const ProbDist d(std::vector<double>{0.5, 0.5});
  EXPECT_THROW(factual_confidence(d, -0.1, 0.3), ConfigError);
}

TEST(Confidence, EntropyIgnoresZeros) {
  const ProbDist d(std::vector<double>{0.5, 0.0, 0.5, 0.0});
  EXPECT_DOUBLE_EQ(global_uncertainty(d), 1.0);
}

ConfidenceScore with_score(double s) {
  ConfidenceScore c;
  c.score = s;
  return c;
}

TEST(BranchIndicator, ConfidentMaskedStreamDiversifies) {
  EXPECT_EQ(branch_indicator(with_score(0.1), with_score(0.9)), Branch::kDiversify);
}

TEST(BranchIndicator, KnowledgeLoweringConfidenceDiversifies) {
  EXPECT_EQ(branch_indicator(with_score(-0.1), with_score(-0.2)), Branch::kDiversify);
}

TEST(BranchIndicator, OtherwiseGround) {
  EXPECT_EQ(branch_indicator(with_score(-0.1), with_score(0.2)), Branch::kGround);
  EXPECT_EQ(branch_indicator(with_score(0.0), with_score(0.5)), Branch::kGround);
}

TEST(BranchIndicator, TieGrounds) {
  EXPECT_EQ(branch_indicator(with_score(-0.05), with_score(-0.05)), Branch::kGround);
}

TEST(BranchIndicator, RandomizedAgainstDirectRule) {
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    const double fc = rng.uniform(-0.5, 0.5), fk = rng.uniform(-0.5, 0.5);
    const bool diversify = fc > 0.0 || fk < fc;
    EXPECT_EQ(branch_indicator(with_score(fc), with_score(fk)) == Branch::kDiversify, diversify);
  }
}

TEST(Confidence, NamesRoundTrip) {
  for (auto v : {ConfidenceVariant::kGeometric, ConfidenceVariant::kArithmetic, ConfidenceVariant::kHarmonic}) {
    EXPECT_EQ(parse_confidence_variant(to_string(v)), v);
  }
  EXPECT_EQ(parse_branch("GROUND"), Branch::kGround);
  EXPECT_THROW(parse_confidence_variant("median"), ConfigError);
}

}  // namespace
}  // namespace doge
