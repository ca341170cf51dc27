#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcrm/random_stream.hpp"
#include "rcrm/trial_engine.hpp"

namespace rcrm {

struct Scenario {
  std::string name;
  std::vector<double> true_probs;
  int true_mtd = 1;  // 1-based

  // Derives true_mtd for the given target; throws ConfigError on bad probabilities.
  static Scenario make(std::string name, std::vector<double> true_probs, double target);

  bool operator==(const Scenario&) const = default;
};

// The six dose-toxicity scenarios of the operating-characteristic study.
std::vector<Scenario> paper_scenarios(double target = 0.30);

/// Operating characteristics accumulated over simulated trials.
///
/// Only integer tallies are stored, so merging partial results is exact and
/// independent of merge order.
struct ScenarioResult {
  int n_trials = 0;
  std::vector<long> selection_counts;  // per dose
  long overtoxic_count = 0;
  long total_dlts = 0;
  long total_subjects = 0;
  std::vector<long> cohorts_at_mtd;    // trials per count 0..max_cohorts

  ScenarioResult() = default;
  ScenarioResult(int doses, int max_cohorts);

  void add_trial(const TrialState& state, int true_mtd, int cohort_size);
  void merge(const ScenarioResult& other);

  std::vector<double> selection_probs() const;
  double overtoxic_prob() const;
  double avg_dlts() const;
  double mean_cohorts_at_mtd() const;
  // Sample standard deviation; 0 for a single trial.
  double sd_cohorts_at_mtd() const;

  bool operator==(const ScenarioResult&) const = default;
};

// Runs one trial to termination, drawing each subject's DLT as
// uniform < true_probs[dose] in enrollment order.
TrialState simulate_trial(const TrialEngine& engine, const Scenario& scenario, RandomStream& rng);

// Trial i uses RandomStream(master_seed, i). threads == 0 picks the hardware
// concurrency. The result does not depend on the thread count.
ScenarioResult run_study(const TrialEngine& engine, const Scenario& scenario, int n_trials,
                         std::uint64_t master_seed, unsigned threads = 0);
ScenarioResult run_study(const TrialConfig& config, const Scenario& scenario, int n_trials,
                         std::uint64_t master_seed, unsigned threads = 0);

}  // namespace rcrm
