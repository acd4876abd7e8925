#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mcra/fairness.hpp"
#include "mcra/rng.hpp"

using namespace mcra;

TEST(Fairness, GammaTarget) {
  EXPECT_DOUBLE_EQ(gamma_target(5, 2), 0.4);
  EXPECT_DOUBLE_EQ(gamma_target(2, 4), 1.0);
  EXPECT_DOUBLE_EQ(gamma_target(10, 4), 0.4);
  EXPECT_THROW(gamma_target(0, 2), SimError);
}

TEST(Fairness, GammaTargetMonotonicity) {
  for (int n = 1; n <= 6; ++n) {
    for (int k = 1; k < 40; ++k) {
      EXPECT_GE(gamma_target(k, n) + 1e-15, gamma_target(k + 1, n));
      EXPECT_LE(gamma_target(k, n), gamma_target(k, n + 1) + 1e-15);
    }
  }
}

TEST(Fairness, RateTarget) {
  const std::vector<double> rates{3e6, 5e6};
  EXPECT_DOUBLE_EQ(rate_target(5, 2, rates), 2e6);
  EXPECT_DOUBLE_EQ(rate_target(1, 2, rates), 5e6);
  EXPECT_THROW(rate_target(3, 2, std::vector<double>{}), SimError);

  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 6));
    const int k = static_cast<int>(rng.uniform_int(1, 12));
    std::vector<double> r(static_cast<std::size_t>(n));
    double best = 0.0;
    for (double& x : r) {
      x = rng.uniform() * 1e7;
      best = std::max(best, x);
    }
    EXPECT_DOUBLE_EQ(rate_target(k, n, r),
                     std::min(1.0, static_cast<double>(n) / k) * best);
  }
}

TEST(Fairness, WindowedAverageBasics) {
  const std::vector<double> constant(50, 0.4);
  EXPECT_DOUBLE_EQ(windowed_average(constant, 30, 1, 20), 0.4);

  const std::vector<double> alternating{1, 0, 1, 0};
  EXPECT_DOUBLE_EQ(windowed_average(alternating, 4, 1, 20), 0.5);
}

TEST(Fairness, WindowedAverageMatchesDirectSum) {
  Rng rng(17);
  std::vector<double> series(300);
  for (double& x : series) x = rng.uniform();
  const SlotIndex t_arr = 10;
  for (SlotIndex t = t_arr; t < t_arr + 300; ++t) {
    const int t_w = 20;
    const SlotIndex lo = std::max(t_arr, t - t_w);
    double sum = 0.0;
    for (SlotIndex i = lo; i <= t; ++i) sum += series[static_cast<std::size_t>(i - t_arr)];
    const double want = sum / static_cast<double>(t - lo + 1);
    EXPECT_NEAR(windowed_average(series, t, t_arr, t_w), want, 1e-12);
  }
}

TEST(Fairness, WindowCoversTwPlusOneSlotsPastWarmup) {
  // past warm-up the inclusive window [t - T_w : t] holds T_w + 1 samples
  std::vector<double> series(100, 0.0);
  series[79 - 20] = 1.0;  // slot t_arr + 59, i.e. t - T_w for t = t_arr + 79
  const double avg = windowed_average(series, 80, 1, 20);
  EXPECT_DOUBLE_EQ(avg, 1.0 / 21.0);
}

namespace {

FairnessLedger make_random_ledger(Rng& rng, int n_users, int horizon) {
  FairnessLedger ledger;
  for (UserId k = 1; k <= n_users; ++k) {
    const SlotIndex t_arr = rng.uniform_int(1, 10);
    const SlotIndex t_dep = t_arr + rng.uniform_int(20, horizon);
    for (SlotIndex t = t_arr; t <= t_dep; ++t) {
      ledger.on_slot(k, t, rng.uniform(), rng.uniform());
    }
    ledger.close_user(k, t_dep);
  }
  return ledger;
}

// Direct transcription of the loss definition, windowed means recomputed
// slot by slot with plain sums.
double loss_oracle(const FairnessLedger& ledger, UserId user, int t_w,
                   ThroughputMode mode) {
  const SlotIndex t_arr = ledger.arrival(user);
  const SlotIndex t_dep = ledger.departure(user);
  double acc = 0.0;
  for (SlotIndex t = t_arr; t <= t_dep; ++t) {
    const SlotIndex lo = std::max(t_arr, t - t_w);
    double sum_g = 0.0, sum_t = 0.0;
    for (SlotIndex i = lo; i <= t; ++i) {
      sum_g += ledger.gamma_at(user, i);
      sum_t += ledger.target_at(user, i);
    }
    const double count = static_cast<double>(t - lo + 1);
    const double ach = sum_g / count;
    const double tgt = sum_t / count;
    if (mode == ThroughputMode::indicator) {
      acc += std::max(tgt - ach, 0.0);
    } else if (tgt > 0.0) {
      acc += std::max((tgt - ach) / tgt, 0.0);
    }
  }
  return acc / static_cast<double>(t_dep - t_arr + 1);
}

}  // namespace

TEST(Fairness, ThroughputLossBasics) {
  FairnessLedger ledger;
  for (SlotIndex t = 1; t <= 100; ++t) ledger.on_slot(1, t, 0.5, 0.4);
  ledger.close_user(1, 100);
  EXPECT_DOUBLE_EQ(ledger.throughput_loss(1, 20, ThroughputMode::indicator), 0.0);

  for (SlotIndex t = 1; t <= 100; ++t) ledger.on_slot(2, t, 0.0, 0.4);
  ledger.close_user(2, 100);
  EXPECT_NEAR(ledger.throughput_loss(2, 20, ThroughputMode::indicator), 0.4, 1e-12);
}

TEST(Fairness, ThroughputLossMatchesOracle) {
  Rng rng(23);
  FairnessLedger ledger = make_random_ledger(rng, 8, 200);
  for (UserId k = 1; k <= 8; ++k) {
    for (int t_w : {5, 10, 20}) {
      EXPECT_NEAR(ledger.throughput_loss(k, t_w, ThroughputMode::indicator),
                  loss_oracle(ledger, k, t_w, ThroughputMode::indicator), 1e-12);
      EXPECT_NEAR(ledger.throughput_loss(k, t_w, ThroughputMode::rate),
                  loss_oracle(ledger, k, t_w, ThroughputMode::rate), 1e-12);
    }
  }
}

TEST(Fairness, RateModeZeroTargetSlotsContributeNothing) {
  FairnessLedger ledger;
  for (SlotIndex t = 1; t <= 10; ++t) ledger.on_slot(1, t, 0.0, 0.0);
  ledger.close_user(1, 10);
  EXPECT_DOUBLE_EQ(ledger.throughput_loss(1, 5, ThroughputMode::rate), 0.0);
}

TEST(Fairness, WeightedObjective) {
  {
    FairnessLedger ledger;
    for (SlotIndex t = 1; t <= 10; ++t) ledger.on_slot(1, t, 0.3, 0.4);
    ledger.close_user(1, 10);
    EXPECT_NEAR(ledger.weighted_objective(20, ThroughputMode::indicator), 0.1, 1e-12);
  }
  {
    // two users, durations 10 and 30, losses 0.4 and 0: objective 0.25 * 0.4
    FairnessLedger ledger;
    for (SlotIndex t = 1; t <= 10; ++t) ledger.on_slot(1, t, 0.0, 0.4);
    ledger.close_user(1, 10);
    for (SlotIndex t = 1; t <= 30; ++t) ledger.on_slot(2, t, 0.4, 0.4);
    ledger.close_user(2, 30);
    EXPECT_NEAR(ledger.weighted_objective(20, ThroughputMode::indicator), 0.1, 1e-12);
  }
}

TEST(Fairness, WeightedObjectiveMatchesOracleAndWeightsSumToOne) {
  Rng rng(31);
  FairnessLedger ledger = make_random_ledger(rng, 20, 120);
  double total_duration = 0.0;
  double acc = 0.0;
  double weight_sum = 0.0;
  for (UserId k = 1; k <= 20; ++k)
    total_duration += static_cast<double>(ledger.active_duration(k));
  for (UserId k = 1; k <= 20; ++k) {
    const double w = static_cast<double>(ledger.active_duration(k)) / total_duration;
    weight_sum += w;
    acc += w * loss_oracle(ledger, k, 10, ThroughputMode::indicator);
  }
  EXPECT_NEAR(weight_sum, 1.0, 1e-12);
  EXPECT_NEAR(ledger.weighted_objective(10, ThroughputMode::indicator), acc, 1e-12);
}

TEST(Fairness, IndicatorSeriesStayInUnitRange) {
  Rng rng(41);
  FairnessLedger ledger;
  for (SlotIndex t = 1; t <= 500; ++t) {
    const double g = rng.uniform() < 0.4 ? 1.0 : 0.0;
    ledger.on_slot(1, t, g, gamma_target(static_cast<int>(rng.uniform_int(1, 9)), 2));
  }
  ledger.close_user(1, 500);
  for (SlotIndex t = 1; t <= 500; ++t) {
    const double g = ledger.windowed_gamma(1, t, 20);
    EXPECT_GE(g, 0.0);
    EXPECT_LE(g, 1.0);
  }
  for (int t_w : {5, 10, 20}) {
    const double d = ledger.throughput_loss(1, t_w, ThroughputMode::indicator);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
}
