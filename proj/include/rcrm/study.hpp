#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rcrm/serialization.hpp"
#include "rcrm/simulator.hpp"

namespace rcrm {

// Error in a study file: malformed JSON (message carries line and column) or
// a violated invariant (message names it).
class SpecError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Everything needed to regenerate a simulation study. Omitted fields take
/// the defaults of the built-in six-scenario study.
struct StudySpec {
  TrialConfig trial;  // trial.variant is unused; see `designs`
  std::vector<Scenario> scenarios = paper_scenarios();
  int n_trials = 1000;
  std::uint64_t master_seed = 1;
  std::vector<DesignVariant> designs{DesignVariant::CRM, DesignVariant::RCRM1, DesignVariant::RCRM2};
  std::string output_dir;

  void validate() const;

  bool operator==(const StudySpec&) const = default;
};

StudySpec parse_study_spec(std::string_view text);
json to_json(const StudySpec& spec);

// Hex SHA-256 of the canonical spec JSON, excluding output_dir.
std::string spec_hash(const StudySpec& spec);

struct StudyCell {
  std::string scenario;
  DesignVariant design;
  int true_mtd = 1;
  ScenarioResult result;
};

// Scenario-major, designs in spec order.
std::vector<StudyCell> run_spec(const StudySpec& spec, unsigned threads = 0);

struct EmittedFiles {
  std::filesystem::path table;
  std::filesystem::path histogram;
  std::filesystem::path summary;
};

/// Writes table.csv, histogram.csv and summary.json into `out_dir`.
/// Throws std::runtime_error if the directory or a file cannot be written.
EmittedFiles emit_results(const std::vector<StudyCell>& cells, const StudySpec& spec,
                          const std::filesystem::path& out_dir);

// Human-readable selection table at two decimals.
std::string format_table(const std::vector<StudyCell>& cells, const StudySpec& spec);

}  // namespace rcrm
