#include "sarplan/service/api.hpp"

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "sarplan/planner/branched_plan.hpp"
#include "sarplan/service/persist.hpp"

namespace sarplan::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json question_schema(exec::PromptKind kind) {
  if (kind == exec::PromptKind::Anxiety) return {{"type", "string"}, {"enum", {"low", "medium", "high"}}};
  return {{"type", "boolean"}};
}

bool terminal_phase(const std::string& phase) { return phase == "done" || phase == "stopped"; }

}  // namespace

// --- configuration --------------------------------------------------------

ServiceConfig service_config_from_json(const json& j, const std::string& base_dir) {
  ServiceConfig cfg;
  if (!j.is_object()) throw std::invalid_argument("service config must be a JSON object");
  auto path_text = [&](const char* key) -> std::string {
    if (!j.contains(key)) return {};
    fs::path p = j.at(key).get<std::string>();
    if (p.is_relative()) p = fs::path(base_dir) / p;
    return slurp(p);
  };
  try {
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
    cfg.log_dir = j.value("log_dir", cfg.log_dir);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.domain_text = path_text("domain");
    cfg.problem_text = path_text("problem");
    cfg.config_text = path_text("config");
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed service config: ") + e.what());
  }
  if (cfg.port < 0 || cfg.port > 65535) throw std::invalid_argument("port out of range");
  if (cfg.threads == 0) throw std::invalid_argument("threads must be positive");
  return cfg;
}

ServiceConfig load_service_config(const std::string& path) {
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("service config " + path + " is not JSON: " + e.what());
  }
  return service_config_from_json(j, fs::path(path).parent_path().string());
}

void apply_env_overrides(ServiceConfig& cfg) {
  if (const char* port = std::getenv("PORT"); port && *port) {
    char* end = nullptr;
    const long v = std::strtol(port, &end, 10);
    if (*end != '\0' || v < 0 || v > 65535) throw std::invalid_argument(std::string("bad PORT ") + port);
    cfg.port = static_cast<int>(v);
  }
  if (const char* dir = std::getenv("LOG_DIR"); dir && *dir) cfg.log_dir = dir;
}

// --- prompts ---------------------------------------------------------------

std::string_view to_string(PromptStatus s) {
  switch (s) {
    case PromptStatus::Open: return "open";
    case PromptStatus::Answered: return "answered";
    case PromptStatus::Expired: return "expired";
  }
  return "open";
}

json to_json(const Prompt& p, double now) {
  json j{{"id", p.id},
         {"turn", p.turn ? json(*p.turn) : json(nullptr)},
         {"action", p.action},
         {"group", p.group},
         {"questions", p.questions},
         {"status", std::string(to_string(p.status))}};
  if (p.deadline) {
    j["deadline"] = *p.deadline;
    j["expires_in"] = std::max(0.0, *p.deadline - now);
  }
  return j;
}

ApiSession::ApiSession(std::shared_ptr<exec::Session> session, bool run) : session_(std::move(session)) {
  const auto phase = session_->phase();
  if (run && phase != exec::Phase::Done && phase != exec::Phase::Stopped) {
    runner_ = std::make_unique<exec::TurnRunner>(session_);
    runner_->start();
  }
}

ApiSession::~ApiSession() { shutdown(); }

void ApiSession::shutdown() {
  if (runner_) runner_->shutdown();
}

Prompt ApiSession::make_prompt(const std::string& id, std::optional<std::size_t> turn, const json& request) const {
  const auto& task = session_->task();
  const auto& cfg = session_->config();
  Prompt p;
  p.id = id;
  p.turn = turn;
  auto ask = [&](FluentId f) {
    if (cfg.channel(f) != exec::Channel::Operator) return;
    const auto kind = cfg.prompt_kind(task.fluents[f]);
    p.questions.push_back({{"key", task.fluents[f]},
                           {"fluent", task.fluents[f]},
                           {"kind", std::string(exec::to_string(kind))},
                           {"schema", question_schema(kind)}});
  };
  if (!turn) {
    p.action = "initial-state";
    p.group = "explicit-query";
    for (auto f : cfg.initial_queries) ask(f);
    return p;
  }
  p.action = request.at("action").get<std::string>();
  p.group = request.at("group").get<std::string>();
  p.deadline = request.at("deadline").get<double>();
  const auto& world = request.at("world_fluents");
  for (const auto& name : world) ask(*task.find_fluent(name.get<std::string>()));
  if (world.empty()) {
    p.questions.push_back({{"key", "acknowledge"},
                           {"fluent", nullptr},
                           {"kind", "acknowledge"},
                           {"schema", {{"type", "boolean"}, {"const", true}}}});
  }
  return p;
}

void ApiSession::sync_locked(const json& snap) {
  const std::string phase = snap.at("phase");
  std::set<std::string> live;
  if (!terminal_phase(phase) && snap.at("awaiting_initial").get<bool>()) {
    if (!prompts_.count("initial")) {
      auto p = make_prompt("initial", std::nullopt, nullptr);
      if (!p.questions.empty()) prompts_.emplace(p.id, std::move(p));
    }
    live.insert("initial");
  }
  const auto& req = snap.at("pending_request");
  if (phase == "awaiting-observation" && req.is_object() && !req.value("terminal", false)) {
    const auto turn = req.at("turn").get<std::size_t>();
    const auto id = "turn-" + std::to_string(turn);
    if (!prompts_.count(id)) {
      auto p = make_prompt(id, turn, req);
      if (!p.questions.empty()) prompts_.emplace(p.id, std::move(p));
    }
    live.insert(id);
  }
  for (auto& [id, p] : prompts_) {
    if (p.status == PromptStatus::Open && !live.count(id)) p.status = PromptStatus::Expired;
  }
}

std::vector<Prompt> ApiSession::pending_prompts() {
  const auto snap = session_->snapshot();
  std::lock_guard lock(mu_);
  sync_locked(snap);
  std::vector<Prompt> out;
  for (const auto& [id, p] : prompts_) {
    if (p.status == PromptStatus::Open) out.push_back(p);
  }
  return out;
}

std::optional<Prompt> ApiSession::prompt(const std::string& id) {
  const auto snap = session_->snapshot();
  std::lock_guard lock(mu_);
  sync_locked(snap);
  auto it = prompts_.find(id);
  if (it == prompts_.end()) return std::nullopt;
  return it->second;
}

exec::ObservationBundle ApiSession::bundle_for(const Prompt& p, const json& body) const {
  if (!body.is_object()) throw ApiError{400, "answer body must be a JSON object"};
  json answers;
  if (body.contains("answers")) {
    answers = body.at("answers");
    if (!answers.is_object()) throw ApiError{400, "answers must be an object keyed by question"};
  } else if (body.contains("value")) {
    if (p.questions.size() != 1) throw ApiError{400, "prompt has several questions; use \"answers\""};
    answers[p.questions.front().at("key").get<std::string>()] = body.at("value");
  } else {
    throw ApiError{400, "answer body needs \"value\" or \"answers\""};
  }
  for (const auto& [key, _] : answers.items()) {
    const bool asked = std::any_of(p.questions.begin(), p.questions.end(), [&](const json& q) { return q.at("key") == key; });
    if (!asked) throw ApiError{400, "no question " + key + " in prompt " + p.id};
  }

  const auto& task = session_->task();
  exec::ObservationBundle b;
  b.source = exec::Source::Operator;
  const double now = session_->clock().now();
  for (const auto& q : p.questions) {
    const std::string key = q.at("key");
    if (!answers.contains(key)) throw ApiError{400, "missing answer for " + key};
    const auto& v = answers.at(key);
    const std::string kind = q.at("kind");
    if (kind == "acknowledge") {
      if (v != true) throw ApiError{400, "acknowledge takes true"};
      continue;
    }
    const auto f = *task.find_fluent(key);
    bool value = false;
    if (kind == "anxiety") {
      auto level = v.is_string() ? exec::parse_anxiety(v.get<std::string>()) : std::nullopt;
      if (!level) throw ApiError{400, key + " takes one of low, medium, high"};
      value = exec::anxiety_ok(*level);
      b.anxiety = *level;
    } else {
      if (!v.is_boolean()) throw ApiError{400, key + " takes a boolean"};
      value = v.get<bool>();
    }
    b.put({f, value, exec::Channel::Operator, now, exec::Source::Operator});
  }
  return b;
}

json ApiSession::answer(const std::string& prompt_id, const json& body) {
  const auto snap = session_->snapshot();
  Prompt p;
  exec::ObservationBundle bundle;
  {
    std::lock_guard lock(mu_);
    sync_locked(snap);
    auto it = prompts_.find(prompt_id);
    if (it == prompts_.end()) throw ApiError{404, "unknown prompt " + prompt_id};
    if (it->second.status != PromptStatus::Open) {
      throw ApiError{409, "prompt " + prompt_id + " is " + std::string(to_string(it->second.status))};
    }
    bundle = bundle_for(it->second, body);
    it->second.status = PromptStatus::Answered;  // claims the prompt; a second answer sees 409
    p = it->second;
  }
  auto set_status = [&](PromptStatus s) {
    std::lock_guard lock(mu_);
    prompts_[prompt_id].status = s;
    p.status = s;
  };
  try {
    const double now = session_->clock().now();
    if (!p.turn) {
      session_->observe_initial(bundle);
      return {{"prompt", to_json(p, now)}, {"phase", std::string(exec::to_string(session_->phase()))}};
    }
    const auto r = session_->apply_outcome(bundle, *p.turn);
    const auto& task = session_->task();
    const auto action = task.find_action(p.action);
    return {{"prompt", to_json(p, now)},
            {"outcome", r.outcome},
            {"label", action ? planner::outcome_label(task, *action, r.outcome) : ""},
            {"consistent", r.consistent},
            {"phase", std::string(exec::to_string(r.phase))}};
  } catch (const exec::WrongPhase& e) {
    set_status(PromptStatus::Expired);
    throw ApiError{409, e.what()};
  } catch (const exec::Stopped& e) {
    set_status(PromptStatus::Expired);
    throw ApiError{409, e.what()};
  } catch (const exec::UnknownFluent& e) {
    set_status(PromptStatus::Open);
    throw ApiError{400, e.what()};
  }
}

// --- HTTP service ----------------------------------------------------------

struct Service::Impl {
  httplib::Server svr;
  std::thread thread;
  mutable std::mutex mu;
  std::map<std::string, std::shared_ptr<ApiSession>> sessions;
  std::set<std::string> reserved;  // ids whose sessions are being built
  std::size_t next_id = 1;
  std::atomic<bool> stopping{false};
  bool stopped = false;
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const ApiError& e) {
    reply(res, e.status, {{"error", e.message}});
  } catch (const json::exception& e) {
    reply(res, 400, {{"error", std::string("malformed body: ") + e.what()}});
  } catch (const std::exception& e) {
    reply(res, 500, {{"error", e.what()}});
  }
}

json parse_body(const httplib::Request& req, bool allow_empty = false) {
  if (req.body.empty()) {
    if (allow_empty) return json::object();
    throw ApiError{400, "request body required"};
  }
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ApiError{400, std::string("body is not JSON: ") + e.what()};
  }
}

json prompts_json(ApiSession& api) {
  const double now = api.session().clock().now();
  json list = json::array();
  for (const auto& p : api.pending_prompts()) list.push_back(to_json(p, now));
  return list;
}

}  // namespace

Service::Service(ServiceConfig cfg) : cfg_(std::move(cfg)), impl_(std::make_unique<Impl>()) {
  auto& impl = *impl_;
  std::vector<std::string> skipped;
  for (auto& r : recover_sessions(cfg_.log_dir, &skipped)) {
    for (const auto& w : r.warnings) warnings_.push_back(r.session->id() + ": " + w);
    impl.sessions.emplace(r.session->id(), std::make_shared<ApiSession>(r.session));
  }
  warnings_.insert(warnings_.end(), skipped.begin(), skipped.end());

  const auto threads = cfg_.threads;
  impl.svr.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };

  auto lookup = [this](const httplib::Request& req) {
    auto api = find(req.matches[1]);
    if (!api) throw ApiError{404, "unknown session " + std::string(req.matches[1])};
    return api;
  };

  impl.svr.Get("/health", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, {{"ok", true}}); });

  impl.svr.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      json list = json::array();
      for (const auto& id : session_ids()) {
        if (auto api = find(id)) list.push_back(api->session().snapshot());
      }
      reply(res, 200, {{"sessions", list}});
    });
  });

  impl.svr.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parse_body(req);
      if (!body.is_object()) throw ApiError{400, "body must be a JSON object"};
      auto text = [&](const char* key, const std::string& fallback) {
        if (!body.contains(key)) return fallback;
        const auto& v = body.at(key);
        if (v.is_string()) return v.get<std::string>();
        if (v.is_object() && std::string(key) == "config") return v.dump();
        throw ApiError{400, std::string(key) + " must be a string"};
      };
      exec::SessionInputs inputs{text("domain", cfg_.domain_text), text("problem", cfg_.problem_text),
                                 text("config", cfg_.config_text)};
      if (inputs.domain_text.empty() || inputs.problem_text.empty() || inputs.config_text.empty()) {
        throw ApiError{400, "domain, problem and config are required"};
      }

      std::string id = body.value("id", std::string());
      {
        std::lock_guard lock(impl_->mu);
        if (id.empty()) {
          do {
            id = "s" + std::to_string(impl_->next_id++);
          } while (impl_->sessions.count(id) || impl_->reserved.count(id) || fs::exists(log_path_for(cfg_.log_dir, id)));
        }
        if (!valid_session_id(id)) throw ApiError{400, "session id must match [A-Za-z0-9_-]{1,64}"};
        if (impl_->sessions.count(id) || impl_->reserved.count(id) || fs::exists(log_path_for(cfg_.log_dir, id))) {
          throw ApiError{409, "session " + id + " already exists"};
        }
        impl_->reserved.insert(id);
      }
      std::shared_ptr<exec::Session> session;
      try {
        session = create_persistent(cfg_.log_dir, id, inputs);
      } catch (const std::exception& e) {
        {
          std::lock_guard lock(impl_->mu);
          impl_->reserved.erase(id);
        }
        if (dynamic_cast<const planner::Unsolvable*>(&e) || dynamic_cast<const planner::ResourceLimit*>(&e)) {
          throw ApiError{422, e.what()};
        }
        throw ApiError{400, e.what()};
      }
      auto api = std::make_shared<ApiSession>(session);
      {
        std::lock_guard lock(impl_->mu);
        impl_->reserved.erase(id);
        impl_->sessions.emplace(id, api);
      }
      auto snap = session->snapshot();
      snap["prompts"] = prompts_json(*api);
      reply(res, 201, snap);
    });
  });

  impl.svr.Get(R"(/sessions/([A-Za-z0-9_-]+))", [lookup](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto api = lookup(req);
      auto snap = api->session().snapshot();
      snap["prompts"] = prompts_json(*api);
      reply(res, 200, snap);
    });
  });

  impl.svr.Get(R"(/sessions/([A-Za-z0-9_-]+)/events)", [this, lookup](const httplib::Request& req,
                                                                      httplib::Response& res) {
    guarded(res, [&] {
      auto api = lookup(req);
      std::size_t from = 0;
      try {
        if (req.has_param("from")) from = std::stoul(req.get_param_value("from"));
        if (req.has_header("Last-Event-ID")) from = std::stoul(req.get_header_value("Last-Event-ID")) + 1;
      } catch (const std::exception&) {
        throw ApiError{400, "from must be an event index"};
      }
      res.set_header("Cache-Control", "no-cache");
      auto* impl = impl_.get();
      res.set_chunked_content_provider(
          "text/event-stream", [api, impl, seen = from](std::size_t, httplib::DataSink& sink) mutable {
            auto& s = api->session();
            if (impl->stopping) {
              sink.done();
              return true;
            }
            // Phase first: once it reads terminal the closing event is already logged.
            const auto phase = s.phase();
            const auto n = s.wait_for_event(seen, 0.25);
            if (n > seen) {
              const auto lines = s.log().lines();
              for (; seen < lines.size(); ++seen) {
                const auto chunk = "id: " + std::to_string(seen) + "\ndata: " + lines[seen] + "\n\n";
                if (!sink.write(chunk.data(), chunk.size())) return false;
              }
            }
            if ((phase == exec::Phase::Done || phase == exec::Phase::Stopped) && seen >= s.log().size()) sink.done();
            return true;
          });
    });
  });

  impl.svr.Get(R"(/sessions/([A-Za-z0-9_-]+)/prompts)", [lookup](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto api = lookup(req);
      reply(res, 200, {{"prompts", prompts_json(*api)}});
    });
  });

  impl.svr.Post(R"(/sessions/([A-Za-z0-9_-]+)/prompts/([A-Za-z0-9_-]+))",
                [lookup](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    auto api = lookup(req);
                    const auto body = parse_body(req);
                    reply(res, 200, api->answer(req.matches[2], body));
                  });
                });

  impl.svr.Post(R"(/sessions/([A-Za-z0-9_-]+)/stop)", [lookup](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto api = lookup(req);
      const auto body = parse_body(req, true);
      const auto reason = body.is_object() ? body.value("reason", std::string("operator")) : std::string("operator");
      const bool stopped = api->session().stop(reason);
      reply(res, 200, {{"stopped", stopped}, {"phase", std::string(exec::to_string(api->session().phase()))}});
    });
  });

  impl.svr.Get(R"(/sessions/([A-Za-z0-9_-]+)/plan)", [lookup](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto api = lookup(req);
      auto& s = api->session();
      const auto from = req.has_param("from") ? req.get_param_value("from") : std::string("current");
      if (from != "current" && from != "initial") throw ApiError{400, "from must be current or initial"};
      const auto state = from == "initial" ? s.task().init : s.state();
      const auto policy = s.policy();
      planner::BranchedPlan plan;
      try {
        plan = planner::unfold(s.task(), policy, 256, state);
      } catch (const planner::DepthExceeded& e) {
        throw ApiError{409, e.what()};
      }
      reply(res, 200,
            {{"class", std::string(planner::to_string(policy.solution_class))},
             {"from", from},
             {"state", exec::true_fluents(s.task(), state)},
             {"plan", planner::plan_to_json(s.task(), plan)}});
    });
  });

  // Sensor-side input: a raw observation bundle for the pending turn.
  impl.svr.Post(R"(/sessions/([A-Za-z0-9_-]+)/observations)",
                [lookup](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    auto api = lookup(req);
                    auto& s = api->session();
                    const auto body = parse_body(req);
                    exec::ObservationBundle b;
                    try {
                      b = exec::bundle_from_json(s.task(), body);
                    } catch (const std::invalid_argument& e) {
                      throw ApiError{400, e.what()};
                    }
                    std::optional<std::size_t> turn;
                    if (body.contains("turn")) turn = body.at("turn").get<std::size_t>();
                    try {
                      const auto r = s.apply_outcome(b, turn);
                      reply(res, 200,
                            {{"outcome", r.outcome},
                             {"consistent", r.consistent},
                             {"phase", std::string(exec::to_string(r.phase))}});
                    } catch (const exec::WrongPhase& e) {
                      throw ApiError{409, e.what()};
                    } catch (const exec::Stopped& e) {
                      throw ApiError{409, e.what()};
                    } catch (const exec::UnknownFluent& e) {
                      throw ApiError{400, e.what()};
                    }
                  });
                });

  impl.svr.Post(R"(/sessions/([A-Za-z0-9_-]+)/signals)", [lookup](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto api = lookup(req);
      const auto body = parse_body(req);
      exec::SimulatedSignals signals;
      try {
        signals = exec::signals_from_json(body);
      } catch (const std::invalid_argument& e) {
        throw ApiError{400, e.what()};
      }
      try {
        reply(res, 200, {{"affect", exec::to_json(api->session().estimate_affect(signals))}});
      } catch (const exec::WrongPhase& e) {
        throw ApiError{409, e.what()};
      }
    });
  });
}

Service::~Service() { stop(); }

int Service::start() {
  int port = cfg_.port;
  if (port == 0) {
    port = impl_->svr.bind_to_any_port(cfg_.host);
  } else if (!impl_->svr.bind_to_port(cfg_.host, port)) {
    port = -1;
  }
  if (port < 0) return -1;
  impl_->thread = std::thread([this] { impl_->svr.listen_after_bind(); });
  impl_->svr.wait_until_ready();
  return port;
}

bool Service::listen() { return impl_->svr.listen(cfg_.host, cfg_.port); }

void Service::stop() {
  if (impl_->stopped) return;
  impl_->stopped = true;
  impl_->stopping = true;
  impl_->svr.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  std::lock_guard lock(impl_->mu);
  for (auto& [id, api] : impl_->sessions) api->shutdown();
}

std::shared_ptr<ApiSession> Service::find(const std::string& id) const {
  std::lock_guard lock(impl_->mu);
  auto it = impl_->sessions.find(id);
  return it == impl_->sessions.end() ? nullptr : it->second;
}

std::vector<std::string> Service::session_ids() const {
  std::lock_guard lock(impl_->mu);
  std::vector<std::string> ids;
  for (const auto& [id, _] : impl_->sessions) ids.push_back(id);
  return ids;
}

}  // namespace sarplan::service
