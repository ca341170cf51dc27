#include "rcrm/conduct_service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <httplib.h>

#include <array>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace rcrm {

namespace {

constexpr const char* kExportFormat = "rcrm-session-log/1";

const std::set<std::string>& create_keys() {
  static const std::set<std::string> keys{"skeleton",     "target",       "prior_mean",     "prior_sd",
                                          "grid_lo",      "grid_hi",      "grid_points",    "variant",
                                          "cohort_size",  "max_subjects", "stop_threshold", "seed"};
  return keys;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::array<char, 32> buf{};
  std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf.data();
}

std::string new_session_id() {
  std::random_device rd;
  static constexpr char hex[] = "0123456789abcdef";
  std::string id;
  for (int i = 0; i < 8; ++i) {
    std::uint32_t v = rd();
    for (int k = 0; k < 4; ++k) {
      id.push_back(hex[v & 0xF]);
      v >>= 4;
    }
  }
  return id;
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::uint64_t fresh_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) | rd();
}

json next_decision(const TrialState& state) {
  if (state.status == TrialStatus::AwaitingOutcomes) return to_json(state.cohorts.back().decision);
  if (state.status == TrialStatus::StoppedOvertoxic) {
    DoseDecision stop;
    stop.kind = DecisionKind::Stop;
    return to_json(stop);
  }
  return nullptr;
}

json outcome_event(const TrialState& after, int cohort, int dose, int dlt_count) {
  return json{{"type", "outcome"},
              {"cohort", cohort},
              {"dose", dose},
              {"dlt_count", dlt_count},
              {"status", std::string(to_string(after.status))},
              {"next", next_decision(after)},
              {"final_mtd", after.final_mtd ? json(*after.final_mtd) : json(nullptr)}};
}

ServiceError mismatch(const std::string& detail) { return ServiceError(422, "replay_mismatch", detail); }

void write_all(int fd, const std::string& data, const std::filesystem::path& path) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ServiceError(500, "storage_error", "write to " + path.string() + " failed: " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

void durable_write(const std::filesystem::path& path, const std::string& data, bool append) {
  const int flags = O_WRONLY | O_CREAT | O_CLOEXEC | (append ? O_APPEND : O_TRUNC);
  const int fd = ::open(path.c_str(), flags, 0644);
  if (fd < 0) {
    throw ServiceError(500, "storage_error", "cannot open " + path.string() + ": " + std::strerror(errno));
  }
  try {
    write_all(fd, data, path);
    if (::fsync(fd) != 0) {
      throw ServiceError(500, "storage_error", "fsync " + path.string() + " failed: " + std::strerror(errno));
    }
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

}  // namespace

ConductService::ConductService(std::filesystem::path state_dir) : state_dir_(std::move(state_dir)) {
  if (!state_dir_.empty()) {
    std::filesystem::create_directories(state_dir_);
    load_all();
  }
}

std::unique_ptr<ConductService::Session> ConductService::rebuild(const std::vector<json>& log) {
  if (log.empty()) throw mismatch("event log is empty");
  const json& created = log.front();
  if (!created.is_object() || created.value("type", "") != "created") {
    throw mismatch("event log must start with a 'created' record");
  }

  auto s = std::make_unique<Session>();
  TrialConfig config;
  try {
    s->id = created.at("id").get<std::string>();
    s->created_at = created.at("created_at").get<std::string>();
    s->rng_seed = created.at("rng_seed").get<std::uint64_t>();
    config = trial_config_from_json(created.at("config"));
  } catch (const ConfigError& e) {
    throw ServiceError(400, "validation_error", e.what());
  } catch (const json::exception& e) {
    throw mismatch(std::string("malformed 'created' record: ") + e.what());
  }
  if (!valid_id(s->id)) throw mismatch("session id must be alphanumeric");
  try {
    s->engine = std::make_unique<TrialEngine>(config);
  } catch (const ConfigError& e) {
    throw ServiceError(400, "validation_error", e.what());
  }
  s->rng = RandomStream(s->rng_seed);
  s->state = s->engine->start();
  if (created.contains("decision") && decision_from_json(created.at("decision")) != s->state.cohorts.back().decision) {
    throw mismatch("baseline decision differs from replay");
  }

  for (std::size_t i = 1; i < log.size(); ++i) {
    const json& ev = log[i];
    try {
      if (ev.value("type", "") != "outcome") throw mismatch("record " + std::to_string(i) + " is not an outcome");
      if (s->state.terminal()) throw mismatch("outcome recorded after the trial ended");
      const int cohort = ev.at("cohort").get<int>();
      const int dose = ev.at("dose").get<int>();
      const CohortRecord& open = s->state.cohorts.back();
      if (cohort != open.index || dose != open.dose) {
        throw mismatch("record " + std::to_string(i) + " does not match the open cohort");
      }
      s->state = s->engine->record_outcomes(s->state, ev.at("dlt_count").get<int>(), s->rng);
      if (outcome_event(s->state, cohort, dose, ev.at("dlt_count").get<int>()) != ev) {
        throw mismatch("record " + std::to_string(i) + " differs from the replayed decision");
      }
    } catch (const json::exception& e) {
      throw mismatch("malformed record " + std::to_string(i) + ": " + e.what());
    } catch (const StateError& e) {
      throw mismatch("record " + std::to_string(i) + ": " + e.what());
    }
  }
  s->log = log;
  return s;
}

json ConductService::view(const Session& s) {
  json v = to_json(s.state);
  v["id"] = s.id;
  v["created_at"] = s.created_at;
  v["rng_seed"] = s.rng_seed;
  v["config"] = to_json(s.engine->config());
  v["recommendation"] = next_decision(s.state);
  return v;
}

std::shared_ptr<ConductService::Session> ConductService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "not_found", "no session '" + id + "'");
  return it->second;
}

void ConductService::persist_new(const Session& s) const {
  if (state_dir_.empty()) return;
  std::string data;
  for (const auto& ev : s.log) data += ev.dump() + "\n";
  durable_write(state_dir_ / (s.id + ".jsonl"), data, false);
}

void ConductService::append(const Session& s, const json& event) const {
  if (state_dir_.empty()) return;
  durable_write(state_dir_ / (s.id + ".jsonl"), event.dump() + "\n", true);
}

void ConductService::load_all() {
  for (const auto& entry : std::filesystem::directory_iterator(state_dir_)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".jsonl") continue;
    std::ifstream in(entry.path());
    std::vector<json> log;
    std::string line;
    bool torn_tail = false;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        log.push_back(json::parse(line));
      } catch (const json::parse_error&) {
        // an interrupted append can leave a partial last line
        torn_tail = in.peek() == std::char_traits<char>::eof();
        if (!torn_tail) throw mismatch("corrupt event log " + entry.path().string());
        break;
      }
    }
    auto session = std::shared_ptr<Session>(rebuild(log));
    if (session->id + ".jsonl" != entry.path().filename().string()) {
      throw mismatch("event log " + entry.path().string() + " belongs to session " + session->id);
    }
    if (torn_tail) persist_new(*session);
    sessions_.emplace(session->id, std::move(session));
  }
}

json ConductService::create_session(const json& request) {
  const json body = request.is_null() ? json::object() : request;
  if (!body.is_object()) throw ServiceError(400, "validation_error", "request body must be a JSON object");
  for (const auto& [key, value] : body.items()) {
    if (!create_keys().contains(key)) throw ServiceError(400, "validation_error", "unknown key '" + key + "'");
  }
  TrialConfig defaults;
  defaults.variant = DesignVariant::RCRM1;
  TrialConfig config;
  try {
    config = trial_config_from_json(body, defaults);
    config.validate();
  } catch (const ConfigError& e) {
    throw ServiceError(400, "validation_error", e.what());
  }
  std::uint64_t seed = 0;
  if (const auto it = body.find("seed"); it != body.end()) {
    if (!it->is_number_integer() || (!it->is_number_unsigned() && it->get<std::int64_t>() < 0)) {
      throw ServiceError(400, "validation_error", "seed must be a nonnegative integer");
    }
    seed = it->get<std::uint64_t>();
  } else {
    seed = fresh_seed();
  }

  auto s = std::make_shared<Session>();
  s->created_at = utc_now();
  s->rng_seed = seed;
  s->engine = std::make_unique<TrialEngine>(config);
  s->rng = RandomStream(seed);
  s->state = s->engine->start();

  std::unique_lock lock(sessions_mutex_);
  do {
    s->id = new_session_id();
  } while (sessions_.contains(s->id));
  s->log.push_back(json{{"type", "created"},
                        {"id", s->id},
                        {"created_at", s->created_at},
                        {"rng_seed", s->rng_seed},
                        {"config", to_json(config)},
                        {"cohort", 1},
                        {"dose", 1},
                        {"decision", to_json(s->state.cohorts.back().decision)}});
  persist_new(*s);
  sessions_.emplace(s->id, s);
  return view(*s);
}

json ConductService::submit_cohort(const std::string& id, const json& request) {
  const auto s = find(id);
  std::lock_guard lock(s->mutex);
  if (s->state.terminal()) {
    throw ServiceError(409, "conflict", "session is " + std::string(to_string(s->state.status)));
  }
  if (!request.is_object() || !request.contains("dlt_count") || !request.at("dlt_count").is_number_integer()) {
    throw ServiceError(400, "validation_error", "body must be {\"dlt_count\": <integer>}");
  }
  const int dlts = request.at("dlt_count").get<int>();
  const int m = s->engine->config().cohort_size;
  if (dlts < 0 || dlts > m) {
    throw ServiceError(400, "validation_error", "dlt_count must lie in [0, " + std::to_string(m) + "]");
  }

  const CohortRecord open = s->state.cohorts.back();
  RandomStream rng = s->rng;
  TrialState next = s->engine->record_outcomes(s->state, dlts, rng);
  const json event = outcome_event(next, open.index, open.dose, dlts);
  append(*s, event);  // durable before the new state becomes visible

  s->state = std::move(next);
  s->rng = rng;
  s->log.push_back(event);
  return view(*s);
}

json ConductService::get_session(const std::string& id) const {
  const auto s = find(id);
  std::lock_guard lock(s->mutex);
  return view(*s);
}

json ConductService::export_session(const std::string& id) const {
  const auto s = find(id);
  std::lock_guard lock(s->mutex);
  return json{{"format", kExportFormat}, {"id", s->id}, {"events", s->log}};
}

json ConductService::import_session(const json& audit) {
  if (!audit.is_object() || audit.value("format", "") != kExportFormat || !audit.contains("events") ||
      !audit.at("events").is_array()) {
    throw ServiceError(400, "validation_error", std::string("expected an export document with format '") +
                                                    kExportFormat + "'");
  }
  const std::vector<json> log = audit.at("events").get<std::vector<json>>();
  std::shared_ptr<Session> s = rebuild(log);
  if (audit.contains("id") && audit.at("id") != s->id) throw mismatch("export id differs from its log");

  std::unique_lock lock(sessions_mutex_);
  if (const auto it = sessions_.find(s->id); it != sessions_.end()) {
    std::lock_guard session_lock(it->second->mutex);
    if (it->second->log == log) return view(*it->second);
    throw ServiceError(409, "conflict", "session '" + s->id + "' exists with a different log");
  }
  persist_new(*s);
  sessions_.emplace(s->id, s);
  return view(*s);
}

std::size_t ConductService::session_count() const {
  std::shared_lock lock(sessions_mutex_);
  return sessions_.size();
}

void mount_routes(httplib::Server& server, ConductService& service) {
  const auto reply = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  // Runs `fn` and maps failures onto the JSON error body.
  const auto guarded = [reply](httplib::Response& res, int ok_status, auto&& fn) {
    try {
      reply(res, ok_status, fn());
    } catch (const ServiceError& e) {
      reply(res, e.status(), e.body());
    } catch (const std::exception& e) {
      reply(res, 500, json{{"error", "internal"}, {"detail", e.what()}});
    }
  };
  const auto parse_body = [](const httplib::Request& req) {
    if (req.body.empty()) return json(nullptr);
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw ServiceError(400, "bad_request", std::string("invalid JSON body: ") + e.what());
    }
  };

  server.Get("/healthz", [&service, guarded](const httplib::Request&, httplib::Response& res) {
    guarded(res, 200, [&] { return json{{"status", "ok"}, {"sessions", service.session_count()}}; });
  });
  server.Post("/sessions", [&service, guarded, parse_body](const httplib::Request& req, httplib::Response& res) {
    guarded(res, 201, [&] { return service.create_session(parse_body(req)); });
  });
  server.Post("/sessions/import",
              [&service, guarded, parse_body](const httplib::Request& req, httplib::Response& res) {
                guarded(res, 200, [&] { return service.import_session(parse_body(req)); });
              });
  server.Get(R"(/sessions/([A-Za-z0-9]+))", [&service, guarded](const httplib::Request& req, httplib::Response& res) {
    guarded(res, 200, [&] { return service.get_session(req.matches[1]); });
  });
  server.Post(R"(/sessions/([A-Za-z0-9]+)/cohorts)",
              [&service, guarded, parse_body](const httplib::Request& req, httplib::Response& res) {
                guarded(res, 200, [&] { return service.submit_cohort(req.matches[1], parse_body(req)); });
              });
  server.Get(R"(/sessions/([A-Za-z0-9]+)/export)",
             [&service, guarded](const httplib::Request& req, httplib::Response& res) {
               guarded(res, 200, [&] { return service.export_session(req.matches[1]); });
             });
}

}  // namespace rcrm
