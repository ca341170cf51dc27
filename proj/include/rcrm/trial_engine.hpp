#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "rcrm/dose_finder.hpp"
#include "rcrm/random_stream.hpp"
#include "rcrm/toxicity_model.hpp"

namespace rcrm {

class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct TrialConfig {
  ModelConfig model;
  DesignVariant variant = DesignVariant::CRM;
  int cohort_size = 3;
  int max_subjects = 45;
  double stop_threshold = 0.90;

  int doses() const { return model.doses(); }
  int max_cohorts() const { return max_subjects / cohort_size; }
  DecisionRule rule() const { return {model.target, stop_threshold}; }

  void validate() const;

  bool operator==(const TrialConfig&) const = default;
};

struct CohortRecord {
  int index = 1;  // 1-based
  int dose = 1;
  std::optional<int> dlt_count;  // absent until outcomes are recorded
  DoseDecision decision;         // the decision that assigned this cohort

  bool operator==(const CohortRecord&) const = default;
};

enum class TrialStatus { AwaitingOutcomes, Completed, StoppedOvertoxic };

std::string_view to_string(TrialStatus s);

struct TrialState {
  std::vector<CohortRecord> cohorts;
  int max_tried = 1;
  TrialStatus status = TrialStatus::AwaitingOutcomes;
  std::optional<int> final_mtd;
  PosteriorSummary posterior;  // after the most recent recorded outcomes (prior at start)

  bool terminal() const { return status != TrialStatus::AwaitingOutcomes; }
  // Dose of the cohort awaiting outcomes; absent once terminal.
  std::optional<int> current_dose() const;
  int completed_cohorts() const;

  bool operator==(const TrialState&) const = default;
};

// One entry of the serializable trial-event log.
struct TrialEvent {
  int cohort = 1;
  int dose = 1;
  DoseDecision decision;
  int dlt_count = 0;

  bool operator==(const TrialEvent&) const = default;
};

/// Runs one trial as a sequence of immutable states. The same engine serves
/// simulated trials (outcomes drawn by the simulator) and live ones
/// (outcomes entered by a person).
class TrialEngine {
 public:
  explicit TrialEngine(TrialConfig config);

  const TrialConfig& config() const { return config_; }
  const ToxicityModel& model() const { return model_; }

  TrialState start() const;

  // Incorporates the open cohort's DLT count and advances to the next cohort
  // or a terminal state. Draws from `rng` only when a randomized design
  // randomizes.
  TrialState record_outcomes(const TrialState& state, int dlt_count, RandomStream& rng) const;

  ObservationSet observations(const TrialState& state) const;

 private:
  TrialConfig config_;
  ToxicityModel model_;
};

// Cohorts at `dose` whose outcomes have been recorded.
int cohorts_at_dose(const TrialState& state, int dose);
int total_dlts(const TrialState& state);
int total_subjects(const TrialState& state, int cohort_size);

// Recorded cohorts as an ordered event log.
std::vector<TrialEvent> event_log(const TrialState& state);

// Rebuilds a state from a fresh engine by feeding the outcome sequence.
TrialState replay(const TrialEngine& engine, std::span<const int> dlt_counts, RandomStream& rng);

}  // namespace rcrm
