#include "sarplan/exec/session.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace sarplan::exec {

namespace {

nlohmann::json literal_list(const GroundedTask& task, const std::vector<FluentLiteral>& lits) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& l : lits) out.push_back(task.format(l));
  return out;
}

// "(okanxiety ?p)" with ?p -> s1, normalized to "(okanxiety s1)".
std::string substitute(const std::string& atom, const pddl::ActionSchema* schema, const GroundAction& a) {
  std::string spaced;
  for (char c : atom) {
    if (c == '(' || c == ')') {
      spaced += ' ';
    } else {
      spaced += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  std::istringstream in(spaced);
  std::vector<std::string> tokens;
  for (std::string tok; in >> tok;) {
    if (tok.front() == '?' && schema) {
      for (std::size_t i = 0; i < schema->params.size() && i < a.args.size(); ++i) {
        if (schema->params[i].name == tok) tok = a.args[i];
      }
    }
    tokens.push_back(tok);
  }
  std::string out = "(";
  for (std::size_t i = 0; i < tokens.size(); ++i) out += (i ? " " : "") + tokens[i];
  return out + ")";
}

}  // namespace

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::AwaitingAction:
      return "awaiting-action";
    case Phase::AwaitingObservation:
      return "awaiting-observation";
    case Phase::Reconciling:
      return "reconciling";
    case Phase::Stopped:
      return "stopped";
    case Phase::Done:
      return "done";
  }
  return "stopped";
}

std::vector<std::string> true_fluents(const GroundedTask& task, const State& s) {
  std::vector<std::string> out;
  for (FluentId f = 0; f < task.num_fluents(); ++f) {
    if (s.get(f)) out.push_back(task.fluents[f]);
  }
  return out;
}

nlohmann::json to_json(const GroundedTask& task, const ActionRequest& r) {
  if (r.terminal) return {{"terminal", true}, {"turn", r.turn}};
  nlohmann::json outcomes = nlohmann::json::array();
  for (const auto& o : r.outcomes) outcomes.push_back(literal_list(task, o));
  nlohmann::json world = nlohmann::json::array();
  for (auto f : r.world_fluents) world.push_back(task.fluents[f]);
  return {{"terminal", false},
          {"turn", r.turn},
          {"action", r.name},
          {"group", std::string(pddl::to_string(r.group))},
          {"outcomes", std::move(outcomes)},
          {"world_fluents", std::move(world)},
          {"deadline", r.deadline}};
}

OutcomeChoice choose_outcome(const State& current, const std::vector<std::vector<FluentLiteral>>& outcomes,
                             const ObservationBundle& obs, std::size_t threshold) {
  OutcomeChoice c;
  c.scores.assign(outcomes.size(), 0);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto predicted = current.applied(outcomes[i]);
    for (const auto& r : obs.readings) {
      if (predicted.get(r.fluent) == r.value) ++c.scores[i];
    }
    if (c.scores[i] > c.scores[c.outcome]) c.outcome = i;
  }
  c.consistent = obs.empty() || (!outcomes.empty() && c.scores[c.outcome] >= threshold);
  return c;
}

Session::Session(std::string id, SessionInputs inputs, SessionOptions options)
    : id_(std::move(id)), inputs_(std::move(inputs)), clock_(std::move(options.clock)) {
  if (!clock_) clock_ = std::make_shared<SteadyClock>();
  domain_ = pddl::parse_domain(inputs_.domain_text);
  task_ = ground(domain_, pddl::parse_problem(inputs_.problem_text, domain_));
  config_ = load_config(task_, inputs_.config_text);
  state_ = task_.init;
  policy_ = planner::solve(task_, {.semantics = config_.semantics, .expansion_budget = config_.expansion_budget});
  initial_pending_ = !config_.initial_queries.empty();

  for (auto& s : options.subscribers) log_.subscribe(std::move(s));
  if (!options.log_path.empty()) log_.attach_file(options.log_path);

  std::lock_guard lock(mu_);
  nlohmann::json queries = nlohmann::json::array();
  for (auto f : config_.initial_queries) queries.push_back(task_.fluents[f]);
  emit("session-start", {{"id", id_},
                         {"domain", inputs_.domain_text},
                         {"problem", inputs_.problem_text},
                         {"config", inputs_.config_text},
                         {"state", state_.bitstring()},
                         {"policy_size", policy_.size()},
                         {"class", std::string(planner::to_string(policy_.solution_class))},
                         {"initial_queries", std::move(queries)}});
}

const nlohmann::json& Session::emit(const char* kind, nlohmann::json payload) {
  payload["kind"] = kind;
  payload["turn"] = turn_;
  payload["t"] = clock_->now();
  const auto& e = log_.append(std::move(payload));
  cv_.notify_all();
  return e;
}

planner::Policy Session::policy() const {
  std::lock_guard lock(mu_);
  return policy_;
}

State Session::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

AffectiveState Session::affect() const {
  std::lock_guard lock(mu_);
  return affect_;
}

std::size_t Session::turn() const {
  std::lock_guard lock(mu_);
  return turn_;
}

std::size_t Session::request_count() const {
  std::lock_guard lock(mu_);
  return requests_;
}

Phase Session::phase() const {
  std::lock_guard lock(mu_);
  return phase_;
}

std::optional<ActionRequest> Session::pending_request() const {
  std::lock_guard lock(mu_);
  return request_;
}

bool Session::awaiting_initial() const {
  std::lock_guard lock(mu_);
  return initial_pending_;
}

std::string Session::stop_reason() const {
  std::lock_guard lock(mu_);
  return stop_reason_;
}

nlohmann::json Session::snapshot() const {
  std::lock_guard lock(mu_);
  return {{"id", id_},
          {"phase", std::string(to_string(phase_))},
          {"turn", turn_},
          {"requests", requests_},
          {"state", true_fluents(task_, state_)},
          {"goal", task_.is_goal(state_)},
          {"affect", to_json(affect_)},
          {"stop_reason", stop_reason_},
          {"awaiting_initial", initial_pending_},
          {"pending_request", request_ ? to_json(task_, *request_) : nlohmann::json(nullptr)},
          {"policy_size", policy_.size()},
          {"class", std::string(planner::to_string(policy_.solution_class))}};
}

void Session::validate(const ObservationBundle& obs) const {
  for (const auto& r : obs.readings) {
    if (r.fluent >= task_.num_fluents()) throw UnknownFluent("reading for unknown fluent id " + std::to_string(r.fluent));
    if (!config_.world(r.fluent)) throw UnknownFluent("reading for modelled fluent " + task_.fluents[r.fluent]);
  }
}

ObservationBundle Session::normalized(const ObservationBundle& obs) const {
  ObservationBundle out = obs;
  for (auto& r : out.readings) r.channel = config_.channel(r.fluent);
  return out;
}

void Session::observe_initial(const ObservationBundle& obs) {
  std::lock_guard lock(mu_);
  if (!initial_pending_ || phase_ != Phase::AwaitingAction) throw WrongPhase("no initial observation pending");
  validate(obs);
  auto b = normalized(obs);
  if (b.anxiety) affect_.anxiety = *b.anxiety;
  for (const auto& r : b.readings) state_.set(r.fluent, r.value);
  initial_pending_ = false;
  emit("observation", {{"initial", true}, {"bundle", to_json(task_, b)}, {"state", state_.bitstring()}});
}

void Session::apply_initial_default() {
  std::lock_guard lock(mu_);
  if (!initial_pending_ || phase_ != Phase::AwaitingAction) throw WrongPhase("no initial observation pending");
  initial_default_locked();
}

// Unanswered initial queries keep their closed-world values.
void Session::initial_default_locked() {
  ObservationBundle b;
  b.source = Source::Default;
  for (auto f : config_.initial_queries) {
    b.put({f, state_.get(f), config_.channel(f), clock_->now(), Source::Default});
  }
  initial_pending_ = false;
  emit("timeout-default", {{"initial", true}, {"bundle", to_json(task_, b)}, {"state", state_.bitstring()}});
}

void Session::halt_locked(const std::string& reason) {
  stop_reason_ = reason;
  const bool closes = phase_ == Phase::AwaitingObservation || phase_ == Phase::Reconciling;
  emit("stop", {{"reason", reason}, {"closes_turn", closes}, {"state", state_.bitstring()}});
  if (closes) ++turn_;
  phase_ = Phase::Stopped;
  request_.reset();
  cv_.notify_all();
}

void Session::replan_locked() {
  if (replanned_turn_ == turn_) {
    halt_locked("replan-failed");
    throw planner::Unsolvable("replanning did not cover the current state");
  }
  replanned_turn_ = turn_;
  planner::Policy fresh;
  try {
    fresh = planner::solve(task_, {.semantics = config_.semantics,
                                   .expansion_budget = config_.expansion_budget,
                                   .from = state_});
  } catch (const planner::Unsolvable& e) {
    halt_locked("unsolvable");
    throw;
  } catch (const planner::ResourceLimit& e) {
    halt_locked("resource-limit");
    throw planner::Unsolvable(e.what());
  }
  policy_ = std::move(fresh);
  emit("replan", {{"reason", "unmapped"},
                  {"state", state_.bitstring()},
                  {"policy_size", policy_.size()},
                  {"class", std::string(planner::to_string(policy_.solution_class))}});
}

ActionRequest Session::next_action() {
  std::lock_guard lock(mu_);
  if (phase_ == Phase::Stopped) throw Stopped("session " + id_ + " is stopped (" + stop_reason_ + ")");
  if (phase_ == Phase::Done) return ActionRequest{.terminal = true, .turn = turn_};
  if (phase_ != Phase::AwaitingAction) throw WrongPhase(std::string("next_action during ") + std::string(to_string(phase_)));

  if (initial_pending_) initial_default_locked();

  if (task_.is_goal(state_)) {
    phase_ = Phase::Done;
    emit("done", {{"state", state_.bitstring()}, {"requests", requests_}});
    return ActionRequest{.terminal = true, .turn = turn_};
  }
  if (turn_ >= config_.max_turns) {
    halt_locked("turn-limit");
    throw Stopped("turn limit reached");
  }

  auto action = policy_.lookup(state_);
  if (!action) {
    replan_locked();
    action = policy_.lookup(state_);
    if (!action) {
      halt_locked("replan-failed");
      throw planner::Unsolvable("replanned policy does not map the current state");
    }
  }
  const auto& ga = task_.actions.at(*action);
  if (!ga.applicable(state_)) {
    halt_locked("inapplicable-action");
    throw planner::Unsolvable("policy action " + ga.name() + " is not applicable");
  }

  ActionRequest req;
  req.turn = turn_;
  req.action = *action;
  req.name = ga.name();
  req.group = ga.group;
  req.outcomes = ga.outcomes;
  std::set<FluentId> world;
  for (const auto& o : ga.outcomes) {
    for (const auto& l : o) {
      if (config_.world(l.fluent)) world.insert(l.fluent);
    }
  }
  req.world_fluents.assign(world.begin(), world.end());
  req.deadline = clock_->now() + config_.timeout(ga.group).seconds;

  request_ = req;
  pending_ = ObservationBundle{};
  pending_.source = Source::Simulator;
  phase_ = Phase::AwaitingObservation;
  ++requests_;
  auto payload = to_json(task_, req);
  payload["request"] = requests_;
  emit("action-request", std::move(payload));
  return req;
}

nlohmann::json Session::deltas_json(const State& before, const State& after) const {
  nlohmann::json out = nlohmann::json::array();
  for (FluentId f = 0; f < task_.num_fluents(); ++f) {
    if (before.get(f) != after.get(f)) out.push_back({{"fluent", task_.fluents[f]}, {"value", after.get(f)}});
  }
  return out;
}

TurnResult Session::apply_locked(const ObservationBundle& merged) {
  const auto& req = *request_;
  const auto choice = choose_outcome(state_, req.outcomes, merged, config_.consistency_threshold);
  TurnResult result;
  result.outcome = choice.outcome;
  result.scores = choice.scores;
  result.consistent = choice.consistent;
  const std::size_t best = choice.outcome;

  nlohmann::json payload = {{"action", req.name},
                            {"outcome", best},
                            {"label", planner::outcome_label(task_, req.action, best)},
                            {"scores", result.scores},
                            {"consistent", result.consistent}};
  if (!result.consistent) {
    inconsistent_ = merged;
    inconsistent_outcome_ = best;
    phase_ = Phase::Reconciling;
    result.phase = phase_;
    emit("outcome-chosen", std::move(payload));
    return result;
  }

  State next = state_;
  for (const auto& l : req.outcomes[best]) {
    if (!config_.world(l.fluent)) next.set(l.fluent, l.value);
  }
  for (const auto& r : merged.readings) next.set(r.fluent, r.value);
  for (FluentId f = 0; f < task_.num_fluents(); ++f) {
    if (state_.get(f) != next.get(f)) result.deltas.push_back({f, next.get(f)});
  }
  payload["deltas"] = deltas_json(state_, next);
  payload["state"] = next.bitstring();
  emit("outcome-chosen", std::move(payload));
  state_ = next;
  ++turn_;
  phase_ = Phase::AwaitingAction;
  request_.reset();
  result.phase = phase_;
  cv_.notify_all();
  return result;
}

TurnResult Session::apply_outcome(const ObservationBundle& obs, std::optional<std::size_t> turn_key) {
  std::lock_guard lock(mu_);
  if (phase_ != Phase::AwaitingObservation) {
    throw WrongPhase(std::string("apply_outcome during ") + std::string(to_string(phase_)));
  }
  if (turn_key && *turn_key != turn_) {
    throw WrongPhase("observation for turn " + std::to_string(*turn_key) + " but turn " + std::to_string(turn_) +
                     " is open");
  }
  validate(obs);
  auto b = normalized(obs);
  emit("observation", {{"bundle", to_json(task_, b)}});
  if (b.anxiety) affect_.anxiety = *b.anxiety;
  auto merged = pending_;
  merged.merge(b);
  return apply_locked(merged);
}

State Session::reconcile() {
  std::lock_guard lock(mu_);
  if (phase_ != Phase::Reconciling) throw WrongPhase(std::string("reconcile during ") + std::string(to_string(phase_)));
  const auto& req = *request_;
  const auto& outcome = req.outcomes.at(inconsistent_outcome_);
  const auto predicted = state_.applied(outcome);

  State next = state_;
  for (const auto& l : outcome) {
    if (!config_.world(l.fluent)) next.set(l.fluent, l.value);
  }
  std::set<FluentId> contradicted;
  for (const auto& r : inconsistent_.readings) {
    if (predicted.get(r.fluent) != r.value) contradicted.insert(r.fluent);
    next.set(r.fluent, r.value);
  }

  std::set<FluentId> assigned;
  nlohmann::json fired = nlohmann::json::array();
  for (const auto& rule : config_.rules) {
    if (!next.satisfies(rule.guard)) continue;
    const bool relevant = std::any_of(rule.guard.begin(), rule.guard.end(),
                                      [&](const FluentLiteral& l) { return contradicted.count(l.fluent) > 0; });
    if (!relevant) continue;
    fired.push_back(rule.name);
    for (const auto& fix : rule.fixups) {
      if (assigned.insert(fix.fluent).second) next.set(fix.fluent, fix.value);
    }
  }

  if (!contradicted.empty() && fired.empty()) {
    std::string names;
    for (auto f : contradicted) names += " " + task_.fluents[f];
    halt_locked("no-applicable-rule");
    throw NoApplicableRule("no reconciliation rule covers" + names);
  }

  nlohmann::json contra = nlohmann::json::array();
  for (auto f : contradicted) contra.push_back(task_.fluents[f]);
  emit("reconcile", {{"outcome", inconsistent_outcome_},
                     {"contradicted", std::move(contra)},
                     {"fired", std::move(fired)},
                     {"deltas", deltas_json(state_, next)},
                     {"state", next.bitstring()}});
  state_ = next;
  ++turn_;
  phase_ = Phase::AwaitingAction;
  request_.reset();
  inconsistent_ = ObservationBundle{};
  cv_.notify_all();
  return state_;
}

ObservationBundle Session::default_locked(const ActionRequest& req) const {
  ObservationBundle b;
  b.source = Source::Default;
  const auto& ga = task_.actions.at(req.action);
  const auto* schema = domain_.find_action(ga.schema);
  const double now = clock_->now();
  for (const auto& d : config_.timeout(req.group).defaults) {
    std::vector<FluentId> targets;
    if (d.atom == "*") {
      targets = req.world_fluents;
    } else {
      auto name = substitute(d.atom, schema, ga);
      if (name.find('?') != std::string::npos) continue;
      auto f = task_.find_fluent(name);
      if (!f || !config_.world(*f)) continue;
      targets.push_back(*f);
    }
    for (auto f : targets) {
      bool value = false;
      if (d.value.is_boolean()) {
        value = d.value.get<bool>();
      } else {
        const auto v = d.value.get<std::string>();
        if (v == "current") {
          value = state_.get(f);
        } else if (v == "anxiety") {
          value = anxiety_ok(affect_.anxiety);
        } else {
          const auto n = std::stoul(v.substr(9));
          value = n < req.outcomes.size() ? state_.applied(req.outcomes[n]).get(f) : state_.get(f);
        }
      }
      b.put({f, value, config_.channel(f), now, Source::Default});
    }
  }
  return b;
}

ObservationBundle Session::default_observation(const ActionRequest& request) const {
  std::lock_guard lock(mu_);
  return default_locked(request);
}

std::optional<ObservationBundle> Session::handle_timeout() {
  std::lock_guard lock(mu_);
  if (phase_ != Phase::AwaitingObservation || !request_ || clock_->now() <= request_->deadline) return std::nullopt;
  auto b = default_locked(*request_);
  emit("timeout-default", {{"bundle", to_json(task_, b)}, {"deadline", request_->deadline}});
  emit("observation", {{"bundle", to_json(task_, b)}});
  auto merged = pending_;
  merged.merge(b);
  apply_locked(merged);
  return b;
}

bool Session::stop(const std::string& reason) {
  std::lock_guard lock(mu_);
  if (phase_ == Phase::Stopped || phase_ == Phase::Done) return false;
  halt_locked(reason);
  return true;
}

AffectiveState Session::estimate_affect(const SimulatedSignals& signals) {
  std::lock_guard lock(mu_);
  if (phase_ == Phase::Stopped || phase_ == Phase::Done) {
    throw WrongPhase(std::string("estimate_affect during ") + std::string(to_string(phase_)));
  }
  affect_ = classify_affect(signals, config_.thresholds);
  nlohmann::json written = nlohmann::json::array();
  if (phase_ == Phase::AwaitingObservation && request_) {
    const double now = clock_->now();
    for (auto f : request_->world_fluents) {
      std::optional<bool> value;
      if (predicate_of(task_.fluents[f]) == config_.anxiety_predicate) value = anxiety_ok(affect_.anxiety);
      if (config_.engagement_fluent == f) value = affect_.engagement == Engagement::High;
      if (!value) continue;
      pending_.put({f, *value, config_.channel(f), now, Source::Simulator});
      written.push_back(task_.fluents[f]);
    }
  }
  emit("observation", {{"signals", to_json(signals)}, {"affect", to_json(affect_)}, {"written", std::move(written)}});
  return affect_;
}

std::size_t Session::wait_for_event(std::size_t seen, double seconds) const {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, std::chrono::duration<double>(std::max(0.0, seconds)), [&] { return log_.size() > seen; });
  return log_.size();
}

}  // namespace sarplan::exec
