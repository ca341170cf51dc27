// rcrm: run dose-escalation simulation studies and serve live trial sessions.
//
//   rcrm run --spec study.json --out results/ [--seed N] [--trials N] [--designs crm,rcrm1]
//   rcrm scenarios --paper
//   rcrm serve --port 8080 --state-dir sessions/

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rcrm/conduct_service.hpp"
#include "rcrm/study.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<rcrm::DesignVariant> parse_designs(const std::string& list) {
  std::vector<rcrm::DesignVariant> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(rcrm::parse_variant(item));
  }
  return out;
}

int run_command(const std::string& spec_path, std::string out_dir, const std::optional<std::uint64_t>& seed,
                const std::optional<int>& trials, const std::string& designs, unsigned threads, bool quiet) {
  rcrm::StudySpec spec = spec_path.empty() ? rcrm::parse_study_spec("{}") : rcrm::parse_study_spec(read_file(spec_path));
  if (seed) spec.master_seed = *seed;
  if (trials) spec.n_trials = *trials;
  if (!designs.empty()) spec.designs = parse_designs(designs);
  spec.validate();

  if (out_dir.empty()) out_dir = spec.output_dir;
  if (out_dir.empty()) {
    const char* env = std::getenv("RCRM_OUTPUT_DIR");
    out_dir = env && *env ? env : "rcrm-results";
  }

  const auto cells = rcrm::run_spec(spec, threads);
  const auto files = rcrm::emit_results(cells, spec, out_dir);
  if (!quiet) std::cout << rcrm::format_table(cells, spec);
  std::cerr << "wrote " << files.table.string() << ", " << files.histogram.string() << ", "
            << files.summary.string() << '\n';
  return 0;
}

int scenarios_command() {
  rcrm::json out = rcrm::json::array();
  for (const auto& s : rcrm::paper_scenarios()) out.push_back(rcrm::to_json(s));
  std::cout << out.dump(2) << '\n';
  return 0;
}

int serve_command(const std::string& host, int port, const std::string& state_dir, const std::string& ui_dir) {
  rcrm::ConductService service(state_dir);
  httplib::Server server;
  rcrm::mount_routes(server, service);
  if (!ui_dir.empty() && !server.set_mount_point("/", ui_dir)) {
    throw std::runtime_error("cannot serve UI assets from " + ui_dir);
  }
  std::cerr << "rcrm: " << service.session_count() << " session(s) restored from " << state_dir
            << "; listening on http://" << host << ':' << port << '\n';
  if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized CRM dose-escalation simulator and trial-conduct service"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Simulate a study and write table.csv, histogram.csv, summary.json");
  std::string spec_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::string designs;
  unsigned threads = 0;
  bool quiet = false;
  run->add_option("--spec", spec_path, "Study JSON file (omit for the built-in six-scenario study)");
  run->add_option("--out", out_dir, "Output directory (default: spec output_dir, then $RCRM_OUTPUT_DIR)");
  run->add_option("--seed", seed, "Master seed override");
  run->add_option("--trials", trials, "Trials per scenario and design")->check(CLI::PositiveNumber);
  run->add_option("--designs", designs, "Comma-separated subset of crm,rcrm1,rcrm2");
  run->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");
  run->add_flag("--quiet", quiet, "Do not print the summary table");

  auto* scenarios = app.add_subcommand("scenarios", "Print built-in scenarios as JSON");
  bool paper = false;
  scenarios->add_flag("--paper", paper, "The six built-in dose-toxicity scenarios")->required();

  auto* serve = app.add_subcommand("serve", "Run the HTTP trial-conduct service");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string state_dir = "rcrm-sessions";
  std::string ui_dir;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  serve->add_option("--state-dir", state_dir, "Directory holding per-session event logs");
  serve->add_option("--ui-dir", ui_dir, "Static frontend assets to serve at /");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(spec_path, out_dir, seed, trials, designs, threads, quiet);
    if (*scenarios) return scenarios_command();
    if (*serve) return serve_command(host, port, state_dir, ui_dir);
  } catch (const std::exception& e) {
    std::cerr << "rcrm: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
