#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rcrm/simulator.hpp"

using namespace rcrm;

namespace {

TrialConfig default_config(DesignVariant v = DesignVariant::CRM) {
  TrialConfig c;
  c.variant = v;
  return c;
}

}  // namespace

TEST_CASE("built-in scenarios") {
  const auto s = paper_scenarios();
  REQUIRE(s.size() == 6);
  const int expected_mtd[] = {4, 2, 6, 3, 5, 4};
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s[i].true_mtd == expected_mtd[i]);
    CHECK(std::is_sorted(s[i].true_probs.begin(), s[i].true_probs.end()));
    CHECK(s[i].true_probs[s[i].true_mtd - 1] == doctest::Approx(0.30));
  }
  CHECK(s[2].name == "S3");
}

TEST_CASE("scenario validation") {
  CHECK_THROWS_AS(Scenario::make("bad", {0.2, 0.1}, 0.3), ConfigError);
  CHECK_THROWS_AS(Scenario::make("bad", {0.0, 0.1}, 0.3), ConfigError);
  CHECK_THROWS_AS(Scenario::make("bad", {}, 0.3), ConfigError);
  CHECK(Scenario::make("tie", {0.2, 0.4}, 0.3).true_mtd == 1);
}

TEST_CASE("simulate_trial with harmless doses escalates to the top") {
  const TrialEngine engine(default_config());
  const Scenario safe = Scenario::make("safe", std::vector<double>(6, 1e-9), 0.30);
  RandomStream rng(12);
  const TrialState s = simulate_trial(engine, safe, rng);
  CHECK(s.status == TrialStatus::Completed);
  CHECK(s.final_mtd == 6);
  for (std::size_t i = 0; i < s.cohorts.size(); ++i) {
    CHECK(s.cohorts[i].dose == std::min<int>(static_cast<int>(i) + 1, 6));
  }
}

TEST_CASE("simulate_trial with a toxic lowest dose stops") {
  const TrialEngine engine(default_config());
  const Scenario toxic = Scenario::make("toxic", {0.999, 0.9991, 0.9992, 0.9993, 0.9994, 0.9995}, 0.30);
  RandomStream rng(12);
  const TrialState s = simulate_trial(engine, toxic, rng);
  CHECK(s.status == TrialStatus::StoppedOvertoxic);
}

TEST_CASE("simulate_trial is deterministic per stream") {
  const TrialEngine engine(default_config(DesignVariant::RCRM1));
  const Scenario s6 = paper_scenarios()[5];
  RandomStream a(77, 3);
  RandomStream b(77, 3);
  CHECK(simulate_trial(engine, s6, a) == simulate_trial(engine, s6, b));
}

TEST_CASE("simulate_trial rejects a scenario of the wrong size") {
  const TrialEngine engine(default_config());
  RandomStream rng(1);
  CHECK_THROWS(simulate_trial(engine, Scenario::make("short", {0.1, 0.3}, 0.3), rng));
}

TEST_CASE("run_study with one trial") {
  const auto scenario = paper_scenarios()[0];
  const ScenarioResult r = run_study(default_config(), scenario, 1, 5, 1);
  CHECK(r.n_trials == 1);
  CHECK(r.sd_cohorts_at_mtd() == 0.0);
  const long nonzero = std::count_if(r.cohorts_at_mtd.begin(), r.cohorts_at_mtd.end(), [](long c) { return c > 0; });
  CHECK(nonzero == 1);
  RandomStream rng(5, 0);
  const TrialState s = simulate_trial(TrialEngine(default_config()), scenario, rng);
  CHECK(r.mean_cohorts_at_mtd() == cohorts_at_dose(s, scenario.true_mtd));
}

TEST_CASE("run_study is independent of thread count and merge order") {
  const TrialEngine engine(default_config(DesignVariant::RCRM2));
  const auto scenario = paper_scenarios()[1];
  const ScenarioResult one = run_study(engine, scenario, 120, 99, 1);
  const ScenarioResult four = run_study(engine, scenario, 120, 99, 4);
  CHECK(one == four);

  ScenarioResult forward(6, 15);
  ScenarioResult backward(6, 15);
  std::vector<ScenarioResult> parts;
  for (int i = 0; i < 5; ++i) {
    ScenarioResult part(6, 15);
    RandomStream rng(99, static_cast<std::uint64_t>(i));
    part.add_trial(simulate_trial(engine, scenario, rng), scenario.true_mtd, 3);
    parts.push_back(part);
  }
  for (const auto& p : parts) forward.merge(p);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) backward.merge(*it);
  CHECK(forward == backward);
}

TEST_CASE("property: result tallies partition the trials") {
  for (auto v : {DesignVariant::CRM, DesignVariant::RCRM1, DesignVariant::RCRM2}) {
    const TrialEngine engine(default_config(v));
    for (const auto& scenario : paper_scenarios()) {
      const ScenarioResult r = run_study(engine, scenario, 60, 2024);
      long selected = r.overtoxic_count;
      for (long c : r.selection_counts) selected += c;
      CHECK(selected == r.n_trials);
      long mass = 0;
      for (long c : r.cohorts_at_mtd) mass += c;
      CHECK(mass == r.n_trials);
      CHECK(r.total_subjects <= 45L * r.n_trials);
      CHECK(r.sd_cohorts_at_mtd() >= 0.0);
    }
  }
}

TEST_CASE("property: no simulated trajectory skips a dose") {
  for (auto v : {DesignVariant::CRM, DesignVariant::RCRM1, DesignVariant::RCRM2}) {
    const TrialEngine engine(default_config(v));
    for (const auto& scenario : paper_scenarios()) {
      for (std::uint64_t i = 0; i < 40; ++i) {
        RandomStream rng(8, i);
        const TrialState s = simulate_trial(engine, scenario, rng);
        int max_tried = 0;
        for (const auto& c : s.cohorts) {
          CHECK(c.dose <= max_tried + 1);
          max_tried = std::max(max_tried, c.dose);
        }
        CHECK(total_subjects(s, 3) <= 45);
      }
    }
  }
}

TEST_CASE("average DLTs when every dose sits at the target") {
  const Scenario flat = Scenario::make("flat", std::vector<double>(6, 0.30), 0.30);

  SUBCASE("full enrollment gives 0.30 x 45 DLTs per trial") {
    // A threshold this close to 1 never fires, so every trial enrolls 45.
    TrialConfig c = default_config();
    c.stop_threshold = 0.999999;
    const ScenarioResult r = run_study(c, flat, 1000, 31);
    CHECK(r.overtoxic_count == 0);
    CHECK(r.total_subjects == 45L * 1000);
    CHECK(std::abs(r.avg_dlts() - 13.5) <= 0.5);
  }
  SUBCASE("with the 0.90 stop rule the per-subject DLT rate is unchanged") {
    // Early stops at dose 1 shorten about a quarter of the trials, which
    // lowers DLTs per trial but not DLTs per subject.
    const ScenarioResult r = run_study(default_config(), flat, 1000, 31);
    CHECK(r.overtoxic_count > 0);
    const double rate = static_cast<double>(r.total_dlts) / static_cast<double>(r.total_subjects);
    CHECK(std::abs(rate - 0.30) <= 0.01);
    CHECK(std::abs(r.avg_dlts() - 0.30 * static_cast<double>(r.total_subjects) / r.n_trials) <= 0.5);
  }
}

TEST_CASE("operating characteristics at 1000 trials") {
  const auto scenarios = paper_scenarios();
  SUBCASE("scenario 1, CRM") {
    const ScenarioResult r = run_study(default_config(), scenarios[0], 1000, 1);
    CHECK(std::abs(r.selection_probs()[3] - 0.78) <= 0.05);
    CHECK(std::abs(r.avg_dlts() - 12.4) <= 0.75);
  }
  SUBCASE("scenario 2, rCRM2") {
    const ScenarioResult r = run_study(default_config(DesignVariant::RCRM2), scenarios[1], 1000, 1);
    CHECK(std::abs(r.selection_probs()[1] - 0.64) <= 0.05);
    CHECK(std::abs(r.overtoxic_prob() - 0.03) <= 0.03);
  }
}
