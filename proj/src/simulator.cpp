#include "rcrm/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace rcrm {

Scenario Scenario::make(std::string name, std::vector<double> true_probs, double target) {
  if (true_probs.empty()) throw ConfigError("scenario '" + name + "' has no doses");
  for (std::size_t i = 0; i < true_probs.size(); ++i) {
    if (!(true_probs[i] > 0.0 && true_probs[i] < 1.0)) {
      throw ConfigError("scenario '" + name + "' probabilities must lie in (0, 1)");
    }
    if (i > 0 && true_probs[i] < true_probs[i - 1]) {
      throw ConfigError("scenario '" + name + "' probabilities must be nondecreasing");
    }
  }
  const int mtd = static_cast<int>(closest_to_target(true_probs, target)) + 1;
  return Scenario{std::move(name), std::move(true_probs), mtd};
}

std::vector<Scenario> paper_scenarios(double target) {
  return {
      Scenario::make("S1", {0.02, 0.05, 0.14, 0.30, 0.54, 0.76}, target),
      Scenario::make("S2", {0.19, 0.30, 0.44, 0.59, 0.72, 0.83}, target),
      Scenario::make("S3", {0.01, 0.03, 0.05, 0.10, 0.18, 0.30}, target),
      Scenario::make("S4", {0.04, 0.11, 0.30, 0.59, 0.83, 0.94}, target),
      Scenario::make("S5", {0.02, 0.04, 0.08, 0.16, 0.30, 0.49}, target),
      Scenario::make("S6", {0.08, 0.14, 0.21, 0.30, 0.41, 0.54}, target),
  };
}

ScenarioResult::ScenarioResult(int doses, int max_cohorts)
    : selection_counts(static_cast<std::size_t>(doses), 0),
      cohorts_at_mtd(static_cast<std::size_t>(max_cohorts) + 1, 0) {}

void ScenarioResult::add_trial(const TrialState& state, int true_mtd, int cohort_size) {
  if (!state.terminal()) throw std::invalid_argument("add_trial expects a finished trial");
  ++n_trials;
  if (state.status == TrialStatus::StoppedOvertoxic) {
    ++overtoxic_count;
  } else {
    ++selection_counts.at(static_cast<std::size_t>(*state.final_mtd - 1));
  }
  total_dlts += rcrm::total_dlts(state);
  total_subjects += rcrm::total_subjects(state, cohort_size);
  ++cohorts_at_mtd.at(static_cast<std::size_t>(cohorts_at_dose(state, true_mtd)));
}

void ScenarioResult::merge(const ScenarioResult& other) {
  if (selection_counts.size() != other.selection_counts.size() ||
      cohorts_at_mtd.size() != other.cohorts_at_mtd.size()) {
    throw std::invalid_argument("cannot merge results of different shapes");
  }
  n_trials += other.n_trials;
  for (std::size_t i = 0; i < selection_counts.size(); ++i) selection_counts[i] += other.selection_counts[i];
  overtoxic_count += other.overtoxic_count;
  total_dlts += other.total_dlts;
  total_subjects += other.total_subjects;
  for (std::size_t i = 0; i < cohorts_at_mtd.size(); ++i) cohorts_at_mtd[i] += other.cohorts_at_mtd[i];
}

std::vector<double> ScenarioResult::selection_probs() const {
  std::vector<double> p;
  p.reserve(selection_counts.size());
  for (long c : selection_counts) p.push_back(n_trials ? static_cast<double>(c) / n_trials : 0.0);
  return p;
}

double ScenarioResult::overtoxic_prob() const {
  return n_trials ? static_cast<double>(overtoxic_count) / n_trials : 0.0;
}

double ScenarioResult::avg_dlts() const {
  return n_trials ? static_cast<double>(total_dlts) / n_trials : 0.0;
}

double ScenarioResult::mean_cohorts_at_mtd() const {
  if (n_trials == 0) return 0.0;
  long sum = 0;
  for (std::size_t k = 0; k < cohorts_at_mtd.size(); ++k) sum += static_cast<long>(k) * cohorts_at_mtd[k];
  return static_cast<double>(sum) / n_trials;
}

double ScenarioResult::sd_cohorts_at_mtd() const {
  if (n_trials < 2) return 0.0;
  // integer sums keep this exact up to the final division
  long sum = 0;
  long sum_sq = 0;
  for (std::size_t k = 0; k < cohorts_at_mtd.size(); ++k) {
    const long kk = static_cast<long>(k);
    sum += kk * cohorts_at_mtd[k];
    sum_sq += kk * kk * cohorts_at_mtd[k];
  }
  const double n = n_trials;
  const double numerator = static_cast<double>(n_trials * sum_sq - sum * sum);
  return std::sqrt(std::max(0.0, numerator / (n * (n - 1.0))));
}

TrialState simulate_trial(const TrialEngine& engine, const Scenario& scenario, RandomStream& rng) {
  const TrialConfig& cfg = engine.config();
  if (static_cast<int>(scenario.true_probs.size()) != cfg.doses()) {
    throw std::invalid_argument("scenario '" + scenario.name + "' dose count does not match the model");
  }
  TrialState state = engine.start();
  while (!state.terminal()) {
    const double p = scenario.true_probs[static_cast<std::size_t>(*state.current_dose() - 1)];
    int dlts = 0;
    for (int s = 0; s < cfg.cohort_size; ++s) {
      if (rng.uniform() < p) ++dlts;
    }
    state = engine.record_outcomes(state, dlts, rng);
  }
  return state;
}

ScenarioResult run_study(const TrialEngine& engine, const Scenario& scenario, int n_trials,
                         std::uint64_t master_seed, unsigned threads) {
  if (n_trials < 1) throw std::invalid_argument("n_trials must be at least 1");
  const TrialConfig& cfg = engine.config();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n_trials));

  std::vector<ScenarioResult> partial(threads, ScenarioResult(cfg.doses(), cfg.max_cohorts()));
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(threads);

  auto worker = [&](unsigned slot) {
    try {
      for (int i = next++; i < n_trials; i = next++) {
        RandomStream rng(master_seed, static_cast<std::uint64_t>(i));
        partial[slot].add_trial(simulate_trial(engine, scenario, rng), scenario.true_mtd,
                                cfg.cohort_size);
      }
    } catch (...) {
      errors[slot] = std::current_exception();
      next = n_trials;
    }
  };

  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ScenarioResult result(cfg.doses(), cfg.max_cohorts());
  for (const auto& p : partial) result.merge(p);
  return result;
}

ScenarioResult run_study(const TrialConfig& config, const Scenario& scenario, int n_trials,
                         std::uint64_t master_seed, unsigned threads) {
  return run_study(TrialEngine(config), scenario, n_trials, master_seed, threads);
}

}  // namespace rcrm
