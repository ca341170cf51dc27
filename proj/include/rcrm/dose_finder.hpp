#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rcrm/random_stream.hpp"
#include "rcrm/toxicity_model.hpp"

namespace rcrm {

enum class DesignVariant { CRM, RCRM1, RCRM2 };

std::string_view to_string(DesignVariant v);
// Accepts "CRM", "RCRM1", "RCRM2" in any letter case.
DesignVariant parse_variant(std::string_view text);

enum class DecisionKind { Assign, Stop };

/// Outcome of one dose-finding step, with enough provenance to audit or
/// replay a randomized assignment.
struct DoseDecision {
  DecisionKind kind = DecisionKind::Assign;
  std::optional<int> dose;  // present iff kind == Assign
  bool randomized = false;
  bool baseline = false;    // first cohort, assigned before any data
  std::optional<int> estimate;  // constrained estimate d*, absent for baseline/stop
  std::vector<int> candidate_doses;
  std::vector<double> candidate_probs;
  std::optional<double> random_draw;  // present iff randomized

  static DoseDecision first_cohort();

  bool operator==(const DoseDecision&) const = default;
};

struct DecisionRule {
  double target = 0.30;
  double stop_threshold = 0.90;
};

// Dose of the previous cohort and highest dose tried so far.
struct DosingHistory {
  int previous_dose = 1;
  int max_tried = 1;
};

/// Dose whose posterior mean toxicity is closest to the target, capped at one
/// level above the highest dose tried.
int constrained_estimate(const PosteriorSummary& posterior, int max_tried, double target);

// True when the overtoxicity rule fires: P(theta(1) > target | data) > threshold.
bool should_stop(const PosteriorSummary& posterior, const DecisionRule& rule);

/// Inverse-CDF pick over candidates in the given order using one uniform
/// draw in [0, 1). Zero-probability candidates are never selected.
int select_by_draw(std::span<const int> candidates, std::span<const double> probs, double u);

DoseDecision crm_decide(const PosteriorSummary& posterior, DosingHistory history,
                        const DecisionRule& rule);
DoseDecision rcrm1_decide(const PosteriorSummary& posterior, DosingHistory history,
                          const DecisionRule& rule, RandomStream& rng);
DoseDecision rcrm2_decide(const PosteriorSummary& posterior, DosingHistory history,
                          const DecisionRule& rule, RandomStream& rng);

DoseDecision decide(DesignVariant variant, const PosteriorSummary& posterior,
                    DosingHistory history, const DecisionRule& rule, RandomStream& rng);

}  // namespace rcrm
