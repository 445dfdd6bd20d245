#include <cmath>

#include <boost/math/distributions/students_t.hpp>
#include <gtest/gtest.h>

#include "gradibd/checks/oracles.hpp"
#include "gradibd/metrics.hpp"
#include "gradibd/random.hpp"
#include "test_util.hpp"

namespace gradibd {
namespace {

using testing::error_code_of;

using Scores = std::vector<double>;
using Labels = std::vector<int>;

TEST(Auroc, Examples) {
  EXPECT_DOUBLE_EQ(auroc(Scores{0.1, 0.4, 0.35, 0.8}, Labels{0, 0, 1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(auroc(Scores{0.1, 0.2, 0.8, 0.9}, Labels{0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(auroc(Scores{0.3, 0.3, 0.3, 0.3}, Labels{1, 0, 0, 1}), 0.5);
  EXPECT_EQ(error_code_of([] { auroc(Scores{0.1, 0.2}, Labels{1, 1}); }), ErrorCode::SingleClass);
  EXPECT_EQ(error_code_of([] { auroc(Scores{0.1}, Labels{1, 0}); }), ErrorCode::ShapeMismatch);
}

TEST(AveragePrecision, Examples) {
  EXPECT_DOUBLE_EQ(average_precision(Scores{0.9, 0.5, 0.4, 0.1}, Labels{1, 0, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(average_precision(Scores{0.9, 0.5, 0.4, 0.1}, Labels{0, 0, 0, 1}), 0.25);
  EXPECT_EQ(error_code_of([] { average_precision(Scores{0.1, 0.2}, Labels{0, 0}); }), ErrorCode::NoPositives);
}

TEST(F1, Examples) {
  EXPECT_DOUBLE_EQ(f1_at_threshold(Scores{0.9, 0.1}, Labels{1, 0}, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(f1_at_threshold(Scores{0.1, 0.2}, Labels{1, 0}, 0.5), 0.0);
  // TP=2, FP=1, FN=1
  EXPECT_NEAR(f1_at_threshold(Scores{0.9, 0.8, 0.7, 0.2, 0.1}, Labels{1, 1, 0, 1, 0}, 0.5), 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(f1_at_threshold(Scores{0.5}, Labels{1}, 0.5), 1.0);
}

TEST(Metrics, AgreeWithBruteForceOracles) {
  auto rng = make_rng(41);
  std::uniform_int_distribution<int> size(2, 60);
  std::uniform_int_distribution<int> coarse(0, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = static_cast<std::size_t>(size(rng));
    Scores s(n);
    Labels y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 == 0 ? u(rng) : coarse(rng) / 4.0;
      y[i] = u(rng) < 0.4 ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(auroc(s, y), checks::pairwise_auroc(s, y), 1e-12);
    EXPECT_NEAR(average_precision(s, y), checks::rank_walk_ap(s, y), 1e-12);
  }
}

TEST(Metrics, RankMetricsIgnoreMonotoneTransforms) {
  auto rng = make_rng(42);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    Scores s(40), t(40);
    Labels y(40);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = u(rng);
      t[i] = 1.0 / (1.0 + std::exp(-2.0 * s[i]));
      y[i] = i % 3 == 0;
    }
    EXPECT_DOUBLE_EQ(auroc(s, y), auroc(t, y));
    EXPECT_DOUBLE_EQ(average_precision(s, y), average_precision(t, y));
  }
}

TEST(TInterval, MatchesFormula) {
  auto rng = make_rng(43);
  std::normal_distribution<double> n(0.8, 0.05);
  for (std::size_t k : {2u, 3u, 10u, 25u}) {
    std::vector<double> values(k);
    for (auto& v : values) v = n(rng);
    const boost::math::students_t dist(static_cast<double>(k - 1));
    const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
    const auto got = t_interval(values);
    const auto want = checks::t_interval_formula(values, t);
    EXPECT_NEAR(got.mean, want.mean, 1e-12);
    EXPECT_NEAR(got.ci_lo, want.ci_lo, 1e-9);
    EXPECT_NEAR(got.ci_hi, want.ci_hi, 1e-9);
  }
}

TEST(TInterval, KnownCriticalValue) {
  // t_{0.975, 9} = 2.262157
  const std::vector<double> values = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto ci = t_interval(values);
  const double sd = std::sqrt(82.5 / 9.0);
  EXPECT_DOUBLE_EQ(ci.mean, 5.5);
  EXPECT_NEAR(ci.ci_hi - ci.mean, 2.262157 * sd / std::sqrt(10.0), 1e-5);
}

TEST(TInterval, DegenerateInputs) {
  const auto same = t_interval(std::vector<double>{0.7, 0.7, 0.7});
  EXPECT_NEAR(same.ci_hi - same.ci_lo, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(t_interval(std::vector<double>{0.7, 0.8}).mean, 0.75);
  EXPECT_EQ(error_code_of([] { t_interval(std::vector<double>{}); }), ErrorCode::EmptyInput);
}

}  // namespace
}  // namespace gradibd
