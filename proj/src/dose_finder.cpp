#include "rcrm/dose_finder.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace rcrm {

namespace {

DoseDecision stop_decision() {
  DoseDecision d;
  d.kind = DecisionKind::Stop;
  return d;
}

DoseDecision assign(int dose, int estimate) {
  DoseDecision d;
  d.dose = dose;
  d.estimate = estimate;
  return d;
}

void check_history(const PosteriorSummary& posterior, DosingHistory h) {
  const int doses = static_cast<int>(posterior.dose_means.size());
  if (doses == 0 || posterior.mtd_probs.size() != posterior.dose_means.size()) {
    throw std::invalid_argument("posterior summary has inconsistent dose count");
  }
  if (h.previous_dose < 1 || h.previous_dose > h.max_tried || h.max_tried > doses) {
    throw std::invalid_argument("dosing history needs 1 <= previous <= max tried <= doses");
  }
}

// Randomize among `candidates` (ascending) proportionally to their MTD
// probabilities. Falls back to staying put if they carry no mass at all.
DoseDecision randomize(const PosteriorSummary& posterior, int stay, int estimate,
                       std::vector<int> candidates, RandomStream& rng) {
  std::vector<double> probs;
  probs.reserve(candidates.size());
  double total = 0.0;
  for (int c : candidates) {
    probs.push_back(posterior.mtd_probs[static_cast<std::size_t>(c - 1)]);
    total += probs.back();
  }
  if (!(total > 0.0)) return assign(stay, estimate);
  for (double& p : probs) p /= total;

  const double u = rng.uniform();
  DoseDecision d;
  d.dose = select_by_draw(candidates, probs, u);
  d.estimate = estimate;
  d.randomized = true;
  d.candidate_doses = std::move(candidates);
  d.candidate_probs = std::move(probs);
  d.random_draw = u;
  return d;
}

}  // namespace

std::string_view to_string(DesignVariant v) {
  switch (v) {
    case DesignVariant::CRM: return "CRM";
    case DesignVariant::RCRM1: return "RCRM1";
    case DesignVariant::RCRM2: return "RCRM2";
  }
  return "?";
}

DesignVariant parse_variant(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "CRM") return DesignVariant::CRM;
  if (upper == "RCRM1") return DesignVariant::RCRM1;
  if (upper == "RCRM2") return DesignVariant::RCRM2;
  throw std::invalid_argument("unknown design variant '" + std::string(text) + "'");
}

DoseDecision DoseDecision::first_cohort() {
  DoseDecision d;
  d.dose = 1;
  d.baseline = true;
  return d;
}

int constrained_estimate(const PosteriorSummary& posterior, int max_tried, double target) {
  const int doses = static_cast<int>(posterior.dose_means.size());
  if (max_tried < 1 || max_tried > doses) throw std::invalid_argument("max_tried out of range");
  const int best = static_cast<int>(closest_to_target(posterior.dose_means, target)) + 1;
  return std::min({best, max_tried + 1, doses});
}

bool should_stop(const PosteriorSummary& posterior, const DecisionRule& rule) {
  return posterior.p_overtoxic > rule.stop_threshold;
}

int select_by_draw(std::span<const int> candidates, std::span<const double> probs, double u) {
  if (candidates.empty() || candidates.size() != probs.size()) {
    throw std::invalid_argument("select_by_draw: candidates and probabilities must align");
  }
  double cumulative = 0.0;
  std::size_t last_positive = candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    cumulative += probs[i];
    if (u < cumulative) return candidates[i];
  }
  if (last_positive == candidates.size()) {
    throw std::invalid_argument("select_by_draw: no candidate has positive probability");
  }
  // u landed in the rounding gap above the final cumulative sum
  return candidates[last_positive];
}

DoseDecision crm_decide(const PosteriorSummary& posterior, DosingHistory history,
                        const DecisionRule& rule) {
  check_history(posterior, history);
  if (should_stop(posterior, rule)) return stop_decision();
  const int est = constrained_estimate(posterior, history.max_tried, rule.target);
  return assign(est, est);
}

DoseDecision rcrm1_decide(const PosteriorSummary& posterior, DosingHistory history,
                          const DecisionRule& rule, RandomStream& rng) {
  check_history(posterior, history);
  if (should_stop(posterior, rule)) return stop_decision();
  const int est = constrained_estimate(posterior, history.max_tried, rule.target);
  if (est != history.previous_dose) return assign(est, est);

  const int doses = static_cast<int>(posterior.dose_means.size());
  std::vector<int> candidates;
  for (int d = history.previous_dose - 1; d <= history.previous_dose + 1; ++d) {
    if (d >= 1 && d <= doses) candidates.push_back(d);
  }
  return randomize(posterior, history.previous_dose, est, std::move(candidates), rng);
}

DoseDecision rcrm2_decide(const PosteriorSummary& posterior, DosingHistory history,
                          const DecisionRule& rule, RandomStream& rng) {
  check_history(posterior, history);
  if (should_stop(posterior, rule)) return stop_decision();
  const int est = constrained_estimate(posterior, history.max_tried, rule.target);
  if (est != history.previous_dose) return assign(est, est);

  const int doses = static_cast<int>(posterior.dose_means.size());
  std::vector<int> candidates;
  for (int d = 1; d <= std::min(history.max_tried + 1, doses); ++d) candidates.push_back(d);
  return randomize(posterior, history.previous_dose, est, std::move(candidates), rng);
}

DoseDecision decide(DesignVariant variant, const PosteriorSummary& posterior,
                    DosingHistory history, const DecisionRule& rule, RandomStream& rng) {
  switch (variant) {
    case DesignVariant::CRM: return crm_decide(posterior, history, rule);
    case DesignVariant::RCRM1: return rcrm1_decide(posterior, history, rule, rng);
    case DesignVariant::RCRM2: return rcrm2_decide(posterior, history, rule, rng);
  }
  throw std::invalid_argument("unknown design variant");
}

}  // namespace rcrm
