#include "rcrm/study.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rcrm {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "skeleton",     "target",         "prior_mean", "prior_sd",    "grid_lo",   "grid_hi",
      "grid_points",  "cohort_size",    "max_subjects", "stop_threshold", "scenarios", "n_trials",
      "master_seed",  "designs",        "output_dir"};
  return keys;
}

std::string line_context(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

Scenario scenario_from_json(const json& j, double target) {
  if (!j.is_object()) throw SpecError("each scenario must be a JSON object");
  std::string name;
  std::vector<double> probs;
  try {
    name = j.at("name").get<std::string>();
    probs = j.at("true_probs").get<std::vector<double>>();
  } catch (const json::exception&) {
    throw SpecError("scenario needs a string name and a numeric true_probs array");
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "name" && key != "true_probs" && key != "true_mtd") {
      throw SpecError("unknown scenario key '" + key + "'");
    }
  }
  Scenario s = Scenario::make(std::move(name), std::move(probs), target);
  if (const auto it = j.find("true_mtd"); it != j.end()) {
    if (!it->is_number_integer() || it->get<int>() != s.true_mtd) {
      throw SpecError("scenario '" + s.name + "' true_mtd does not match its true_probs");
    }
  }
  return s;
}

std::string fixed(double x, int decimals) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.*f", decimals, x);
  return buf.data();
}

double rounded(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(x * scale) / scale;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << contents;
  out.close();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void StudySpec::validate() const {
  trial.validate();
  if (scenarios.empty()) throw SpecError("scenarios must not be empty");
  std::set<std::string> names;
  for (const auto& s : scenarios) {
    if (static_cast<int>(s.true_probs.size()) != trial.doses()) {
      throw SpecError("scenario '" + s.name + "' must have one probability per skeleton dose");
    }
    if (!names.insert(s.name).second) throw SpecError("scenario names must be unique");
  }
  if (n_trials < 1) throw SpecError("n_trials must be at least 1");
  if (designs.empty()) throw SpecError("designs must not be empty");
}

StudySpec parse_study_spec(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw SpecError("parse error at " + line_context(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
  }
  if (!j.is_object()) throw SpecError("study spec must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known_keys().contains(key)) throw SpecError("unknown key '" + key + "'");
  }

  StudySpec spec;
  try {
    spec.trial = trial_config_from_json(j);
  } catch (const SpecError&) {
    throw;
  } catch (const ConfigError& e) {
    throw SpecError(e.what());
  }
  spec.trial.variant = DesignVariant::CRM;
  try {
    spec.trial.model.validate();
  } catch (const ConfigError& e) {
    throw SpecError(e.what());
  }

  if (const auto it = j.find("scenarios"); it != j.end()) {
    if (!it->is_array()) throw SpecError("scenarios must be an array");
    spec.scenarios.clear();
    try {
      for (const auto& s : *it) spec.scenarios.push_back(scenario_from_json(s, spec.trial.model.target));
    } catch (const SpecError&) {
      throw;
    } catch (const ConfigError& e) {
      throw SpecError(e.what());
    }
  } else {
    spec.scenarios = paper_scenarios(spec.trial.model.target);
  }

  if (const auto it = j.find("n_trials"); it != j.end()) {
    if (!it->is_number_integer()) throw SpecError("n_trials must be an integer");
    spec.n_trials = it->get<int>();
  }
  if (const auto it = j.find("master_seed"); it != j.end()) {
    if (!it->is_number_unsigned()) throw SpecError("master_seed must be a nonnegative integer");
    spec.master_seed = it->get<std::uint64_t>();
  }
  if (const auto it = j.find("designs"); it != j.end()) {
    if (!it->is_array()) throw SpecError("designs must be an array of variant names");
    spec.designs.clear();
    for (const auto& d : *it) {
      if (!d.is_string()) throw SpecError("designs must be an array of variant names");
      try {
        const DesignVariant v = parse_variant(d.get<std::string>());
        if (std::find(spec.designs.begin(), spec.designs.end(), v) != spec.designs.end()) {
          throw SpecError("designs must not repeat a variant");
        }
        spec.designs.push_back(v);
      } catch (const SpecError&) {
        throw;
      } catch (const std::invalid_argument& e) {
        throw SpecError(e.what());
      }
    }
  }
  if (const auto it = j.find("output_dir"); it != j.end()) {
    if (!it->is_string()) throw SpecError("output_dir must be a string");
    spec.output_dir = it->get<std::string>();
  }

  try {
    spec.validate();
  } catch (const SpecError&) {
    throw;
  } catch (const ConfigError& e) {
    throw SpecError(e.what());
  }
  return spec;
}

json to_json(const StudySpec& spec) {
  json j = to_json(spec.trial);
  j.erase("variant");
  json scenarios = json::array();
  for (const auto& s : spec.scenarios) scenarios.push_back(to_json(s));
  j["scenarios"] = std::move(scenarios);
  j["n_trials"] = spec.n_trials;
  j["master_seed"] = spec.master_seed;
  json designs = json::array();
  for (auto d : spec.designs) designs.push_back(std::string(to_string(d)));
  j["designs"] = std::move(designs);
  j["output_dir"] = spec.output_dir;
  return j;
}

std::string spec_hash(const StudySpec& spec) {
  json j = to_json(spec);
  j.erase("output_dir");
  const std::string canonical = j.dump();

  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::vector<StudyCell> run_spec(const StudySpec& spec, unsigned threads) {
  spec.validate();
  std::vector<StudyCell> cells;
  for (DesignVariant design : spec.designs) {
    TrialConfig cfg = spec.trial;
    cfg.variant = design;
    const TrialEngine engine(cfg);
    for (const auto& scenario : spec.scenarios) {
      cells.push_back(StudyCell{scenario.name, design, scenario.true_mtd,
                                run_study(engine, scenario, spec.n_trials, spec.master_seed, threads)});
    }
  }
  // scenario-major order for output
  std::stable_sort(cells.begin(), cells.end(), [&](const StudyCell& a, const StudyCell& b) {
    const auto pos = [&](const std::string& name) {
      return std::find_if(spec.scenarios.begin(), spec.scenarios.end(),
                          [&](const Scenario& s) { return s.name == name; }) -
             spec.scenarios.begin();
    };
    return pos(a.scenario) < pos(b.scenario);
  });
  return cells;
}

EmittedFiles emit_results(const std::vector<StudyCell>& cells, const StudySpec& spec,
                          const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " + ec.message());

  const int doses = spec.trial.doses();
  const std::string seed = std::to_string(spec.master_seed);
  const std::string hash = spec_hash(spec);

  std::ostringstream table;
  table << "scenario,design";
  for (int d = 1; d <= doses; ++d) table << ",dose_" << d;
  table << ",overtoxic,avg_dlts,master_seed,spec_hash\n";
  for (const auto& scenario : spec.scenarios) {
    table << scenario.name << ",P(DLT)";
    for (double p : scenario.true_probs) table << ',' << fixed(p, 4);
    table << ",,," << seed << ',' << hash << '\n';
    for (const auto& cell : cells) {
      if (cell.scenario != scenario.name) continue;
      table << cell.scenario << ',' << to_string(cell.design);
      for (double p : cell.result.selection_probs()) table << ',' << fixed(p, 4);
      table << ',' << fixed(cell.result.overtoxic_prob(), 4) << ',' << fixed(cell.result.avg_dlts(), 4) << ','
            << seed << ',' << hash << '\n';
    }
  }

  std::ostringstream hist;
  hist << "scenario,design,cohorts_at_mtd,trials,master_seed,spec_hash\n";
  for (const auto& cell : cells) {
    for (std::size_t k = 0; k < cell.result.cohorts_at_mtd.size(); ++k) {
      hist << cell.scenario << ',' << to_string(cell.design) << ',' << k << ',' << cell.result.cohorts_at_mtd[k]
           << ',' << seed << ',' << hash << '\n';
    }
  }

  json results = json::array();
  for (const auto& cell : cells) {
    json probs = json::array();
    for (double p : cell.result.selection_probs()) probs.push_back(rounded(p, 4));
    results.push_back(json{{"scenario", cell.scenario},
                           {"design", std::string(to_string(cell.design))},
                           {"true_mtd", cell.true_mtd},
                           {"n_trials", cell.result.n_trials},
                           {"selection_probs", std::move(probs)},
                           {"overtoxic_prob", rounded(cell.result.overtoxic_prob(), 4)},
                           {"avg_dlts", rounded(cell.result.avg_dlts(), 4)},
                           {"cohorts_at_mtd_mean", rounded(cell.result.mean_cohorts_at_mtd(), 4)},
                           {"cohorts_at_mtd_sd", rounded(cell.result.sd_cohorts_at_mtd(), 4)},
                           {"cohorts_at_mtd_histogram", cell.result.cohorts_at_mtd},
                           {"counts", to_json(cell.result)}});
  }
  json summary{{"master_seed", spec.master_seed}, {"spec_hash", hash}, {"spec", to_json(spec)},
               {"results", std::move(results)}};

  EmittedFiles files{out_dir / "table.csv", out_dir / "histogram.csv", out_dir / "summary.json"};
  write_file(files.table, table.str());
  write_file(files.histogram, hist.str());
  write_file(files.summary, summary.dump(2) + "\n");
  return files;
}

std::string format_table(const std::vector<StudyCell>& cells, const StudySpec& spec) {
  const int doses = spec.trial.doses();
  std::ostringstream out;
  const auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  std::string header = pad("", 8) + pad("", 8);
  for (int d = 1; d <= doses; ++d) header += pad("Dose " + std::to_string(d), 8);
  header += pad("Overtox", 9) + "Avg DLTs";
  for (const auto& scenario : spec.scenarios) {
    out << header << '\n';
    std::string row = pad(scenario.name, 8) + pad("P(DLT)", 8);
    for (double p : scenario.true_probs) row += pad(fixed(p, 2), 8);
    out << row << pad("--", 9) << "--\n";
    for (const auto& cell : cells) {
      if (cell.scenario != scenario.name) continue;
      std::string line = pad("", 8) + pad(std::string(to_string(cell.design)), 8);
      const auto probs = cell.result.selection_probs();
      for (int d = 1; d <= doses; ++d) {
        std::string v = fixed(probs[static_cast<std::size_t>(d - 1)], 2);
        if (d == scenario.true_mtd) v = "*" + v;
        line += pad(v, 8);
      }
      line += pad(fixed(cell.result.overtoxic_prob(), 2), 9) + fixed(cell.result.avg_dlts(), 1);
      out << line << "   (cohorts at MTD: mean " << fixed(cell.result.mean_cohorts_at_mtd(), 2) << ", sd "
          << fixed(cell.result.sd_cohorts_at_mtd(), 2) << ")\n";
    }
    out << '\n';
  }
  out << "master seed " << spec.master_seed << ", " << spec.n_trials << " trials per cell; * marks the true MTD\n";
  return out.str();
}

}  // namespace rcrm
