#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rcrm/trial_engine.hpp"

using namespace rcrm;

namespace {

TrialConfig default_config(DesignVariant v = DesignVariant::CRM) {
  TrialConfig c;
  c.variant = v;
  return c;
}

int plain_argmin(const std::vector<double>& probs, double target) {
  int best = 0;
  for (int d = 1; d < static_cast<int>(probs.size()); ++d) {
    if (std::abs(probs[d] - target) < std::abs(probs[best] - target)) best = d;
  }
  return best + 1;
}

// Plays a whole trial with outcomes drawn from `gen`; returns the DLT counts fed in.
std::vector<int> play(const TrialEngine& engine, TrialState& state, RandomStream& rng, std::mt19937_64& gen) {
  std::vector<int> counts;
  std::uniform_int_distribution<int> dlts(0, engine.config().cohort_size);
  while (!state.terminal()) {
    // skew toward few DLTs so trials usually run to completion
    const int k = std::min(dlts(gen), dlts(gen));
    counts.push_back(k);
    state = engine.record_outcomes(state, k, rng);
  }
  return counts;
}

}  // namespace

TEST_CASE("start_trial treats the first cohort at dose 1") {
  const TrialEngine engine(default_config());
  const TrialState s = engine.start();
  REQUIRE(s.cohorts.size() == 1);
  CHECK(s.cohorts[0].index == 1);
  CHECK(s.cohorts[0].dose == 1);
  CHECK_FALSE(s.cohorts[0].dlt_count.has_value());
  CHECK(s.cohorts[0].decision.baseline);
  CHECK_FALSE(s.cohorts[0].decision.randomized);
  CHECK(s.status == TrialStatus::AwaitingOutcomes);
  CHECK(s.current_dose() == 1);
  CHECK(s.posterior.mtd_probs.size() == 6);
}

TEST_CASE("smallest possible trial") {
  TrialConfig c = default_config();
  c.cohort_size = 1;
  c.max_subjects = 1;
  const TrialEngine engine(c);
  RandomStream rng(1);
  const TrialState done = engine.record_outcomes(engine.start(), 0, rng);
  CHECK(done.status == TrialStatus::Completed);
  CHECK(done.final_mtd.has_value());
}

TEST_CASE("configuration errors") {
  TrialConfig c = default_config();
  c.max_subjects = 44;
  CHECK_THROWS_WITH_AS(TrialEngine{c}, "max_subjects must be divisible by cohort_size", ConfigError);
  c = default_config();
  c.stop_threshold = 1.0;
  CHECK_THROWS_AS(TrialEngine{c}, ConfigError);
  c = default_config();
  c.cohort_size = 0;
  CHECK_THROWS_AS(TrialEngine{c}, ConfigError);
}

TEST_CASE("no DLTs in the first cohort escalates by one level only") {
  // The fine-grid oracle puts the unconstrained estimate at dose 6 for
  // n1 = 3, y1 = 0; the no-skip rule caps it at d_max + 1 = 2.
  const ModelConfig model;
  ObservationSet obs(6);
  obs.add(1, 3, 0);
  const auto means = oracle::trapezoid_dose_means(model, obs, 200'001);
  REQUIRE(plain_argmin(means, 0.30) == 6);

  for (auto v : {DesignVariant::CRM, DesignVariant::RCRM1, DesignVariant::RCRM2}) {
    const TrialEngine engine(default_config(v));
    RandomStream rng(3);
    const TrialState s = engine.record_outcomes(engine.start(), 0, rng);
    REQUIRE(s.cohorts.size() == 2);
    CHECK(s.cohorts[1].dose == 2);
    CHECK(s.cohorts[1].index == 2);
    CHECK_FALSE(s.cohorts[1].decision.randomized);
    CHECK(s.max_tried == 2);
    CHECK(rng.draws() == 0);
  }
}

TEST_CASE("three DLTs in the first cohort stop the trial") {
  ObservationSet obs(6);
  obs.add(1, 3, 3);
  // oracle value 0.98779 (fine-grid trapezoid) exceeds the 0.90 threshold
  REQUIRE(oracle::trapezoid_overtoxicity(ModelConfig{}, obs, 200'001) == doctest::Approx(0.98779).epsilon(1e-4));

  const TrialEngine engine(default_config());
  RandomStream rng(1);
  const TrialState s = engine.record_outcomes(engine.start(), 3, rng);
  CHECK(s.status == TrialStatus::StoppedOvertoxic);
  CHECK_FALSE(s.final_mtd.has_value());
  CHECK_FALSE(s.current_dose().has_value());
  CHECK(cohorts_at_dose(s, 1) == 1);
}

TEST_CASE("stop after four cohorts at dose 1") {
  // 6 DLTs in 12 subjects at dose 1: oracle P(theta1 > 0.3) = 0.92029
  ObservationSet obs(6);
  obs.add(1, 12, 6);
  REQUIRE(oracle::trapezoid_overtoxicity(ModelConfig{}, obs, 200'001) == doctest::Approx(0.92029).epsilon(1e-4));

  const TrialEngine engine(default_config());
  RandomStream rng(1);
  TrialState s = engine.start();
  for (int k : {1, 1, 1}) {
    s = engine.record_outcomes(s, k, rng);
    REQUIRE(s.status == TrialStatus::AwaitingOutcomes);
    REQUIRE(s.current_dose() == 1);
  }
  s = engine.record_outcomes(s, 3, rng);
  CHECK(s.status == TrialStatus::StoppedOvertoxic);
  int total = 0;
  for (int d = 1; d <= 6; ++d) total += cohorts_at_dose(s, d);
  CHECK(total == 4);
  CHECK(total_dlts(s) == 6);
  CHECK(total_subjects(s, 3) == 12);
}

TEST_CASE("a full trial completes with an unconstrained final MTD") {
  const TrialEngine engine(default_config(DesignVariant::RCRM2));
  RandomStream rng(5);
  TrialState s = engine.start();
  CHECK(cohorts_at_dose(s, 1) == 0);
  for (int i = 0; i < 15; ++i) {
    REQUIRE_FALSE(s.terminal());
    s = engine.record_outcomes(s, i % 3 == 0 ? 1 : 0, rng);
  }
  REQUIRE(s.status == TrialStatus::Completed);
  REQUIRE(s.final_mtd.has_value());
  int total = 0;
  for (int d = 1; d <= 6; ++d) total += cohorts_at_dose(s, d);
  CHECK(total == 15);

  const auto means = oracle::trapezoid_dose_means(ModelConfig{}, engine.observations(s), 200'001);
  CHECK(*s.final_mtd == plain_argmin(means, 0.30));

  CHECK_THROWS_AS(engine.record_outcomes(s, 0, rng), StateError);
}

TEST_CASE("outcome validation") {
  const TrialEngine engine(default_config());
  RandomStream rng(1);
  const TrialState s = engine.start();
  CHECK_THROWS_AS(engine.record_outcomes(s, 4, rng), StateError);
  CHECK_THROWS_AS(engine.record_outcomes(s, -1, rng), StateError);
}

TEST_CASE("property: replaying outcomes through a fresh engine reproduces the state") {
  std::mt19937_64 gen(21);
  for (auto v : {DesignVariant::CRM, DesignVariant::RCRM1, DesignVariant::RCRM2}) {
    for (int t = 0; t < 25; ++t) {
      const std::uint64_t seed = gen();
      const TrialEngine engine(default_config(v));
      RandomStream rng(seed);
      TrialState live = engine.start();
      const auto counts = play(engine, live, rng, gen);

      const TrialEngine fresh(default_config(v));
      RandomStream again(seed);
      CHECK(replay(fresh, counts, again) == live);

      const auto events = event_log(live);
      REQUIRE(events.size() == counts.size());
      for (std::size_t i = 0; i < events.size(); ++i) {
        CHECK(events[i].dlt_count == counts[i]);
        CHECK(events[i].dose == live.cohorts[i].dose);
      }
    }
  }
}

TEST_CASE("property: trajectories respect no-skip, sample size and absorbing states") {
  std::mt19937_64 gen(33);
  for (auto v : {DesignVariant::CRM, DesignVariant::RCRM1, DesignVariant::RCRM2}) {
    const TrialEngine engine(default_config(v));
    for (int t = 0; t < 40; ++t) {
      RandomStream rng(gen());
      TrialState s = engine.start();
      int max_tried = 1;
      std::uniform_int_distribution<int> dlts(0, 3);
      while (!s.terminal()) {
        const int k = std::min({dlts(gen), dlts(gen), dlts(gen)});
        const TrialState next = engine.record_outcomes(s, k, rng);
        CHECK(total_subjects(next, 3) <= 45);
        if (!next.terminal()) {
          const int dose = *next.current_dose();
          CHECK(dose >= 1);
          CHECK(dose <= max_tried + 1);
          max_tried = std::max(max_tried, dose);
          CHECK(next.max_tried == max_tried);
        }
        CHECK((next.status == TrialStatus::Completed) == next.final_mtd.has_value());
        s = next;
      }
      CHECK_THROWS_AS(engine.record_outcomes(s, 0, rng), StateError);
    }
  }
}
