#pragma once

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sarplan/exec/runner.hpp"
#include "sarplan/exec/session.hpp"

namespace sarplan::service {

struct ServiceConfig {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string log_dir = "sessions";
  // Used when POST /sessions leaves a text out.
  std::string domain_text;
  std::string problem_text;
  std::string config_text;
  std::size_t threads = 32;  // long-lived event streams each hold one
};

/// Keys: host, port, log_dir, and domain/problem/config file paths
/// (relative to `base_dir`). Throws std::invalid_argument.
ServiceConfig service_config_from_json(const nlohmann::json& j, const std::string& base_dir);
ServiceConfig load_service_config(const std::string& path);
/// PORT and LOG_DIR from the environment win over the file.
void apply_env_overrides(ServiceConfig& cfg);

enum class PromptStatus { Open, Answered, Expired };
std::string_view to_string(PromptStatus s);

/// One operator question set: the initial queries, or the operator-channel
/// fluents of a pending action request. A request with no world fluents at
/// all gets a single acknowledgement question.
struct Prompt {
  std::string id;                  // "initial" or "turn-<n>"
  std::optional<std::size_t> turn;  // empty for the initial prompt
  std::string action;
  std::string group;
  std::optional<double> deadline;  // session clock
  nlohmann::json questions = nlohmann::json::array();  // [{fluent, kind, schema}]
  PromptStatus status = PromptStatus::Open;
};

nlohmann::json to_json(const Prompt& p, double now);

struct ApiError {
  int status = 400;
  std::string message;
};

/// Session hosted by the service, driven by its own TurnRunner.
class ApiSession {
 public:
  explicit ApiSession(std::shared_ptr<exec::Session> session, bool run = true);
  ~ApiSession();
  ApiSession(const ApiSession&) = delete;
  ApiSession& operator=(const ApiSession&) = delete;

  exec::Session& session() { return *session_; }
  const std::shared_ptr<exec::Session>& handle() const { return session_; }

  /// Prompts still waiting for an answer.
  std::vector<Prompt> pending_prompts();
  /// Every prompt seen so far, by id.
  std::optional<Prompt> prompt(const std::string& id);

  /// Turn an answer into an ObservationBundle and hand it to the session.
  /// Body: {"answers": {fluent: value}} or {"value": v} for a single question.
  /// Errors: 404 unknown prompt, 409 answered/expired/wrong phase, 400 bad body.
  nlohmann::json answer(const std::string& prompt_id, const nlohmann::json& body);

  void shutdown();

 private:
  void sync_locked(const nlohmann::json& snapshot);
  Prompt make_prompt(const std::string& id, std::optional<std::size_t> turn, const nlohmann::json& request) const;
  exec::ObservationBundle bundle_for(const Prompt& p, const nlohmann::json& body) const;

  std::shared_ptr<exec::Session> session_;
  std::unique_ptr<exec::TurnRunner> runner_;
  std::mutex mu_;  // never held across a call that takes the session's lock for a turn change
  std::map<std::string, Prompt> prompts_;
};

class Service {
 public:
  explicit Service(ServiceConfig cfg);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Bind and serve on a background thread. Port 0 picks a free port.
  /// Returns the bound port, or -1 when binding failed.
  int start();
  /// Serve on the calling thread until stop().
  bool listen();
  void stop();

  std::shared_ptr<ApiSession> find(const std::string& id) const;
  std::vector<std::string> session_ids() const;
  const std::vector<std::string>& warnings() const { return warnings_; }
  const ServiceConfig& config() const { return cfg_; }

 private:
  struct Impl;
  ServiceConfig cfg_;
  std::vector<std::string> warnings_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sarplan::service
