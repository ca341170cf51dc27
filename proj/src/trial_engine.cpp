#include "rcrm/trial_engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rcrm {

void TrialConfig::validate() const {
  model.validate();
  if (cohort_size < 1) throw ConfigError("cohort_size must be positive");
  if (max_subjects < 1) throw ConfigError("max_subjects must be positive");
  if (max_subjects % cohort_size != 0) {
    throw ConfigError("max_subjects must be divisible by cohort_size");
  }
  if (!(stop_threshold > 0.0 && stop_threshold < 1.0)) {
    throw ConfigError("stop_threshold must lie in (0, 1)");
  }
}

std::string_view to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::AwaitingOutcomes: return "AwaitingOutcomes";
    case TrialStatus::Completed: return "Completed";
    case TrialStatus::StoppedOvertoxic: return "StoppedOvertoxic";
  }
  return "?";
}

std::optional<int> TrialState::current_dose() const {
  if (terminal() || cohorts.empty()) return std::nullopt;
  return cohorts.back().dose;
}

int TrialState::completed_cohorts() const {
  return static_cast<int>(std::count_if(cohorts.begin(), cohorts.end(),
                                        [](const CohortRecord& c) { return c.dlt_count.has_value(); }));
}

TrialEngine::TrialEngine(TrialConfig config)
    : config_((config.validate(), std::move(config))), model_(config_.model) {}

TrialState TrialEngine::start() const {
  TrialState state;
  state.cohorts.push_back(CohortRecord{1, 1, std::nullopt, DoseDecision::first_cohort()});
  state.max_tried = 1;
  state.posterior = model_.summarize(ObservationSet(config_.doses()));
  return state;
}

ObservationSet TrialEngine::observations(const TrialState& state) const {
  ObservationSet obs(config_.doses());
  for (const auto& c : state.cohorts) {
    if (c.dlt_count) obs.add(c.dose, config_.cohort_size, *c.dlt_count);
  }
  return obs;
}

TrialState TrialEngine::record_outcomes(const TrialState& state, int dlt_count,
                                        RandomStream& rng) const {
  if (state.status != TrialStatus::AwaitingOutcomes) {
    throw StateError("trial is " + std::string(to_string(state.status)) +
                     "; no cohort awaits outcomes");
  }
  if (state.cohorts.empty() || state.cohorts.back().dlt_count) {
    throw StateError("no open cohort");
  }
  if (dlt_count < 0 || dlt_count > config_.cohort_size) {
    throw StateError("dlt_count must lie in [0, " + std::to_string(config_.cohort_size) + "]");
  }

  TrialState next = state;
  next.cohorts.back().dlt_count = dlt_count;
  next.posterior = model_.summarize(observations(next));

  const DecisionRule rule = config_.rule();
  if (should_stop(next.posterior, rule)) {
    next.status = TrialStatus::StoppedOvertoxic;
    return next;
  }
  if (next.completed_cohorts() >= config_.max_cohorts()) {
    next.status = TrialStatus::Completed;
    next.final_mtd = static_cast<int>(closest_to_target(next.posterior.dose_means, rule.target)) + 1;
    return next;
  }

  const DosingHistory history{next.cohorts.back().dose, next.max_tried};
  DoseDecision decision = decide(config_.variant, next.posterior, history, rule, rng);
  // the stop check above already ran on the same posterior
  const int dose = decision.dose.value();
  const int index = static_cast<int>(next.cohorts.size()) + 1;
  next.cohorts.push_back(CohortRecord{index, dose, std::nullopt, std::move(decision)});
  next.max_tried = std::max(next.max_tried, dose);
  return next;
}

int cohorts_at_dose(const TrialState& state, int dose) {
  return static_cast<int>(std::count_if(state.cohorts.begin(), state.cohorts.end(), [&](const CohortRecord& c) {
    return c.dose == dose && c.dlt_count.has_value();
  }));
}

int total_dlts(const TrialState& state) {
  int total = 0;
  for (const auto& c : state.cohorts) total += c.dlt_count.value_or(0);
  return total;
}

int total_subjects(const TrialState& state, int cohort_size) {
  return state.completed_cohorts() * cohort_size;
}

std::vector<TrialEvent> event_log(const TrialState& state) {
  std::vector<TrialEvent> events;
  for (const auto& c : state.cohorts) {
    if (!c.dlt_count) break;
    events.push_back(TrialEvent{c.index, c.dose, c.decision, *c.dlt_count});
  }
  return events;
}

TrialState replay(const TrialEngine& engine, std::span<const int> dlt_counts, RandomStream& rng) {
  TrialState state = engine.start();
  for (int k : dlt_counts) state = engine.record_outcomes(state, k, rng);
  return state;
}

}  // namespace rcrm
