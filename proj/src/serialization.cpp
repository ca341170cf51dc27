#include "rcrm/serialization.hpp"

#include <string>
#include <type_traits>

namespace rcrm {

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
  }
  try {
    out = it->template get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(key) + " has the wrong type");
  }
}

json optional_int(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const ModelConfig& c) {
  return json{{"skeleton", c.skeleton},   {"target", c.target},   {"prior_mean", c.prior_mean},
              {"prior_sd", c.prior_sd},   {"grid_lo", c.grid_lo}, {"grid_hi", c.grid_hi},
              {"grid_points", c.grid_points}};
}

json to_json(const TrialConfig& c) {
  json j = to_json(c.model);
  j["variant"] = std::string(to_string(c.variant));
  j["cohort_size"] = c.cohort_size;
  j["max_subjects"] = c.max_subjects;
  j["stop_threshold"] = c.stop_threshold;
  return j;
}

json to_json(const PosteriorSummary& p) {
  return json{{"dose_means", p.dose_means}, {"mtd_probs", p.mtd_probs}, {"p_overtoxic", p.p_overtoxic}};
}

json to_json(const DoseDecision& d) {
  json j{{"kind", d.kind == DecisionKind::Stop ? "Stop" : "Assign"},
         {"dose", optional_int(d.dose)},
         {"randomized", d.randomized},
         {"baseline", d.baseline},
         {"estimate", optional_int(d.estimate)},
         {"candidate_doses", d.candidate_doses},
         {"candidate_probs", d.candidate_probs}};
  j["random_draw"] = d.random_draw ? json(*d.random_draw) : json(nullptr);
  return j;
}

json to_json(const CohortRecord& c) {
  return json{{"index", c.index},
              {"dose", c.dose},
              {"dlt_count", optional_int(c.dlt_count)},
              {"decision", to_json(c.decision)}};
}

json to_json(const TrialState& s) {
  json cohorts = json::array();
  for (const auto& c : s.cohorts) cohorts.push_back(to_json(c));
  return json{{"status", std::string(to_string(s.status))},
              {"current_dose", optional_int(s.current_dose())},
              {"max_tried", s.max_tried},
              {"final_mtd", optional_int(s.final_mtd)},
              {"cohorts", std::move(cohorts)},
              {"posterior", to_json(s.posterior)}};
}

json to_json(const TrialEvent& e) {
  return json{{"cohort", e.cohort}, {"dose", e.dose}, {"dlt_count", e.dlt_count}, {"decision", to_json(e.decision)}};
}

json to_json(const Scenario& s) {
  return json{{"name", s.name}, {"true_probs", s.true_probs}, {"true_mtd", s.true_mtd}};
}

json to_json(const ScenarioResult& r) {
  return json{{"n_trials", r.n_trials},
              {"selection_counts", r.selection_counts},
              {"overtoxic_count", r.overtoxic_count},
              {"total_dlts", r.total_dlts},
              {"total_subjects", r.total_subjects},
              {"cohorts_at_mtd", r.cohorts_at_mtd}};
}

DoseDecision decision_from_json(const json& j) {
  DoseDecision d;
  d.kind = j.at("kind").get<std::string>() == "Stop" ? DecisionKind::Stop : DecisionKind::Assign;
  if (!j.at("dose").is_null()) d.dose = j.at("dose").get<int>();
  d.randomized = j.at("randomized").get<bool>();
  d.baseline = j.value("baseline", false);
  if (j.contains("estimate") && !j.at("estimate").is_null()) d.estimate = j.at("estimate").get<int>();
  d.candidate_doses = j.at("candidate_doses").get<std::vector<int>>();
  d.candidate_probs = j.at("candidate_probs").get<std::vector<double>>();
  if (!j.at("random_draw").is_null()) d.random_draw = j.at("random_draw").get<double>();
  return d;
}

TrialEvent event_from_json(const json& j) {
  return TrialEvent{j.at("cohort").get<int>(), j.at("dose").get<int>(), decision_from_json(j.at("decision")),
                    j.at("dlt_count").get<int>()};
}

ModelConfig model_config_from_json(const json& j, ModelConfig base) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  read_field(j, "skeleton", base.skeleton);
  read_field(j, "target", base.target);
  read_field(j, "prior_mean", base.prior_mean);
  read_field(j, "prior_sd", base.prior_sd);
  read_field(j, "grid_lo", base.grid_lo);
  read_field(j, "grid_hi", base.grid_hi);
  read_field(j, "grid_points", base.grid_points);
  return base;
}

TrialConfig trial_config_from_json(const json& j, TrialConfig base) {
  base.model = model_config_from_json(j, base.model);
  if (const auto it = j.find("variant"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("variant has the wrong type");
    try {
      base.variant = parse_variant(it->get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  read_field(j, "cohort_size", base.cohort_size);
  read_field(j, "max_subjects", base.max_subjects);
  read_field(j, "stop_threshold", base.stop_threshold);
  return base;
}

}  // namespace rcrm
