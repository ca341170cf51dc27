#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcrm/serialization.hpp"
#include "rcrm/trial_engine.hpp"

namespace httplib {
class Server;
}

namespace rcrm {

// Carries the HTTP status and the machine-readable code of the error body
// {"error": code, "detail": text}.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string code, const std::string& detail)
      : std::runtime_error(detail), status_(status), code_(std::move(code)) {}

  int status() const { return status_; }
  const std::string& code() const { return code_; }
  json body() const { return json{{"error", code_}, {"detail", what()}}; }

 private:
  int status_;
  std::string code_;
};

/// Live trial-conduct sessions backed by append-only event logs.
///
/// Each session is persisted as `<state_dir>/<id>.jsonl`, one JSON event per
/// line: a "created" record followed by one "outcome" record per cohort.
/// Trial state is never stored; it is rebuilt by replaying the log through
/// the engine and the session's seeded random stream, and every recorded
/// decision is checked against the replay.
///
/// Requests on distinct sessions run concurrently; requests on one session
/// are serialized.
class ConductService {
 public:
  // An empty state_dir keeps sessions in memory only.
  explicit ConductService(std::filesystem::path state_dir = {});

  json create_session(const json& request);
  json submit_cohort(const std::string& id, const json& request);
  json get_session(const std::string& id) const;
  json export_session(const std::string& id) const;
  // Rebuilds a session from an export. Importing a log identical to an
  // existing session's returns that session unchanged.
  json import_session(const json& audit);

  std::size_t session_count() const;

 private:
  struct Session {
    std::string id;
    std::string created_at;
    std::uint64_t rng_seed = 0;
    std::unique_ptr<TrialEngine> engine;
    TrialState state;
    RandomStream rng{0};
    std::vector<json> log;
    mutable std::mutex mutex;
  };

  static std::unique_ptr<Session> rebuild(const std::vector<json>& log);
  static json view(const Session& s);
  std::shared_ptr<Session> find(const std::string& id) const;
  void persist_new(const Session& s) const;
  void append(const Session& s, const json& event) const;
  void load_all();

  std::filesystem::path state_dir_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

// Registers the HTTP+JSON routes:
//   GET  /healthz
//   POST /sessions                      (body: config overrides, optional "seed")
//   POST /sessions/import               (body: an export document)
//   GET  /sessions/{id}
//   POST /sessions/{id}/cohorts         (body: {"dlt_count": k})
//   GET  /sessions/{id}/export
void mount_routes(httplib::Server& server, ConductService& service);

}  // namespace rcrm
