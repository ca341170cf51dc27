#pragma once

#include <json.hpp>

#include "rcrm/dose_finder.hpp"
#include "rcrm/simulator.hpp"
#include "rcrm/trial_engine.hpp"

// JSON forms of the domain types. Doubles are written with round-trip
// precision, so decoded decisions and draws compare bit-exactly.
namespace rcrm {

using json = nlohmann::json;

json to_json(const ModelConfig& c);
json to_json(const TrialConfig& c);
json to_json(const PosteriorSummary& p);
json to_json(const DoseDecision& d);
json to_json(const CohortRecord& c);
json to_json(const TrialState& s);
json to_json(const TrialEvent& e);
json to_json(const Scenario& s);
json to_json(const ScenarioResult& r);

DoseDecision decision_from_json(const json& j);
TrialEvent event_from_json(const json& j);

// Reads the model/trial fields present in `j` on top of `base`. Unknown keys
// are left for the caller; type mismatches throw ConfigError.
ModelConfig model_config_from_json(const json& j, ModelConfig base = {});
TrialConfig trial_config_from_json(const json& j, TrialConfig base = {});

}  // namespace rcrm
