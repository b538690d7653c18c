#pragma once

#include <condition_variable>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sarplan/exec/affect.hpp"
#include "sarplan/exec/clock.hpp"
#include "sarplan/exec/config.hpp"
#include "sarplan/exec/event_log.hpp"
#include "sarplan/exec/observation.hpp"
#include "sarplan/planner/policy.hpp"
#include "sarplan/planner/branched_plan.hpp"
#include "sarplan/planner/solver.hpp"

namespace sarplan::exec {

class Stopped : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class WrongPhase : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownFluent : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoApplicableRule : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Phase { AwaitingAction, AwaitingObservation, Reconciling, Stopped, Done };

std::string_view to_string(Phase p);

/// Texts a session is built from; embedded verbatim in the session-start
/// event so a log is self-contained.
struct SessionInputs {
  std::string domain_text;
  std::string problem_text;
  std::string config_text;
};

struct ActionRequest {
  bool terminal = false;  // goal reached; no action
  std::size_t turn = 0;
  ActionId action = 0;
  std::string name;
  ActionGroup group = ActionGroup::RobotBehaviour;
  std::vector<std::vector<FluentLiteral>> outcomes;  // expected effects per outcome
  std::vector<FluentId> world_fluents;               // world-determined fluents any outcome sets
  double deadline = 0.0;

  std::size_t outcome_count() const { return outcomes.size(); }
};

struct TurnResult {
  std::size_t outcome = 0;
  std::vector<std::size_t> scores;
  bool consistent = true;
  std::vector<FluentLiteral> deltas;  // fluents whose value changed, with the new value
  Phase phase = Phase::AwaitingAction;
};

/// Outcome selection: argmax over outcomes of the number of readings that
/// agree with the state the outcome predicts; ties go to the lowest index.
/// Consistent when nothing was observed or the best score reaches `threshold`.
struct OutcomeChoice {
  std::size_t outcome = 0;
  std::vector<std::size_t> scores;
  bool consistent = true;
};

OutcomeChoice choose_outcome(const State& current, const std::vector<std::vector<FluentLiteral>>& outcomes,
                             const ObservationBundle& obs, std::size_t threshold);

struct SessionOptions {
  std::shared_ptr<Clock> clock;  // defaults to a SteadyClock
  std::string log_path;          // append-only JSONL file, empty for memory only
  std::vector<EventLog::Subscriber> subscribers;
};

/// One patient session: the serialized turn loop over a solved task.
/// All public members are thread-safe; turn-mutating calls serialize on a
/// per-session mutex.
class Session {
 public:
  /// Parses, grounds, resolves the config and solves eagerly. Throws
  /// pddl::ParseError, BadConfig, planner::Unsolvable or ResourceLimit.
  Session(std::string id, SessionInputs inputs, SessionOptions options = {});

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }
  const SessionInputs& inputs() const { return inputs_; }
  const GroundedTask& task() const { return task_; }
  const SessionConfig& config() const { return config_; }
  const Clock& clock() const { return *clock_; }
  EventLog& log() { return log_; }
  const EventLog& log() const { return log_; }

  planner::Policy policy() const;
  State state() const;
  AffectiveState affect() const;
  std::size_t turn() const;
  std::size_t request_count() const;
  Phase phase() const;
  std::optional<ActionRequest> pending_request() const;
  bool awaiting_initial() const;
  std::string stop_reason() const;
  nlohmann::json snapshot() const;

  /// Initial world-fluent readings, before the first action.
  void observe_initial(const ObservationBundle& obs);
  /// Fill unanswered initial queries with their current values.
  void apply_initial_default();

  /// Throws Stopped, WrongPhase, planner::Unsolvable (session halts).
  ActionRequest next_action();
  /// `turn_key` guards against answers for a turn that already closed.
  /// Throws WrongPhase or UnknownFluent.
  TurnResult apply_outcome(const ObservationBundle& obs, std::optional<std::size_t> turn_key = std::nullopt);
  /// Resolve the inconsistent observation stored by apply_outcome.
  /// Throws WrongPhase or NoApplicableRule (session halts).
  State reconcile();
  /// When the pending request has expired, build its default observation,
  /// log it and apply it. Returns nullopt when nothing had expired.
  std::optional<ObservationBundle> handle_timeout();
  /// Returns true when this call stopped the session.
  bool stop(const std::string& reason = "operator");
  AffectiveState estimate_affect(const SimulatedSignals& signals);

  /// Block until the log grows past `seen` events or `seconds` elapse.
  /// Returns the log size.
  std::size_t wait_for_event(std::size_t seen, double seconds) const;

  /// Default observation for a request, as the timeout path would build it.
  ObservationBundle default_observation(const ActionRequest& request) const;

 private:
  const nlohmann::json& emit(const char* kind, nlohmann::json payload);
  void validate(const ObservationBundle& obs) const;
  ObservationBundle normalized(const ObservationBundle& obs) const;
  void initial_default_locked();
  TurnResult apply_locked(const ObservationBundle& obs);
  ObservationBundle default_locked(const ActionRequest& request) const;
  void replan_locked();
  void halt_locked(const std::string& reason);
  nlohmann::json deltas_json(const State& before, const State& after) const;

  std::string id_;
  SessionInputs inputs_;
  pddl::DomainModel domain_;
  GroundedTask task_;
  SessionConfig config_;
  std::shared_ptr<Clock> clock_;
  EventLog log_;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  planner::Policy policy_;
  State state_;
  AffectiveState affect_;
  std::size_t turn_ = 0;
  std::size_t requests_ = 0;
  Phase phase_ = Phase::AwaitingAction;
  bool initial_pending_ = false;
  std::optional<ActionRequest> request_;
  ObservationBundle pending_;       // sensed readings gathered this turn
  ObservationBundle inconsistent_;  // stored for reconcile
  std::size_t inconsistent_outcome_ = 0;
  std::optional<std::size_t> replanned_turn_;
  std::string stop_reason_;
};

/// Names of fluents true in `s`, in fluent order.
std::vector<std::string> true_fluents(const GroundedTask& task, const State& s);

nlohmann::json to_json(const GroundedTask& task, const ActionRequest& r);

}  // namespace sarplan::exec
