#pragma once

// Test-only audit of an event log. It re-derives the executive invariants
// from the log text alone (plus the task and config that produced it).

#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sarplan/exec/config.hpp"
#include "sarplan/pddl/task.hpp"

namespace sarplan::testing {

struct AuditReport {
  std::size_t action_requests = 0;
  std::size_t final_turn = 0;
  std::size_t outcome_chosen = 0;
  std::size_t timeout_defaults = 0;
  std::size_t reconciles = 0;
  std::size_t replans = 0;
  bool done = false;
  bool stopped = false;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
  std::string describe() const {
    std::string out;
    for (const auto& v : violations) out += v + "\n";
    return out;
  }
};

inline AuditReport audit_log(const GroundedTask& task, const exec::SessionConfig& cfg,
                             const std::vector<nlohmann::json>& events) {
  AuditReport rep;
  auto fail = [&](std::size_t seq, const std::string& what) {
    rep.violations.push_back("seq " + std::to_string(seq) + ": " + what);
  };
  std::map<std::string, FluentId> index;
  for (FluentId f = 0; f < task.num_fluents(); ++f) index[task.fluents[f]] = f;
  std::map<std::string, const exec::ReconciliationRule*> rules;
  for (const auto& r : cfg.rules) rules[r.name] = &r;

  // "(p a)" or "(not (p a))" -> (fluent, value)
  auto literal = [&](const std::string& s) -> std::pair<FluentId, bool> {
    if (s.rfind("(not ", 0) == 0) return {index.at(s.substr(5, s.size() - 6)), false};
    return {index.at(s), true};
  };

  std::string state;
  std::size_t turn = 0;
  bool open_turn = false;
  bool after_stop = false;
  nlohmann::json outcomes;               // of the open request
  std::set<FluentId> observed;           // world fluents read this turn

  auto diff = [&](const std::string& a, const std::string& b) {
    std::vector<FluentId> out;
    for (FluentId f = 0; f < a.size() && f < b.size(); ++f) {
      if (a[f] != b[f]) out.push_back(f);
    }
    return out;
  };

  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const auto kind = e.at("kind").get<std::string>();
    const auto seq = e.at("seq").get<std::size_t>();
    if (seq != i) fail(seq, "sequence gap");
    const auto et = e.at("turn").get<std::size_t>();
    if (et != turn) fail(seq, "event turn " + std::to_string(et) + " while turn " + std::to_string(turn) + " open");
    if (after_stop && kind == "action-request") fail(seq, "action-request after stop");

    if (kind == "session-start") {
      state = e.at("state").get<std::string>();
    } else if (kind == "action-request") {
      if (open_turn) fail(seq, "second action-request in one turn");
      ++rep.action_requests;
      open_turn = true;
      outcomes = e.at("outcomes");
      observed.clear();
    } else if (kind == "observation") {
      if (e.contains("bundle")) {
        for (const auto& r : e.at("bundle").at("readings")) {
          const auto f = index.at(r.at("fluent").get<std::string>());
          if (!cfg.world(f)) fail(seq, "reading for modelled fluent " + task.fluents[f]);
          observed.insert(f);
        }
      }
      if (e.contains("written")) {
        for (const auto& n : e.at("written")) observed.insert(index.at(n.get<std::string>()));
      }
      if (e.value("initial", false)) {
        const auto next = e.at("state").get<std::string>();
        for (auto f : diff(state, next)) {
          if (!observed.count(f)) fail(seq, "initial observation changed unread fluent " + task.fluents[f]);
        }
        state = next;
        observed.clear();
      }
    } else if (kind == "timeout-default") {
      ++rep.timeout_defaults;
    } else if (kind == "outcome-chosen" || kind == "reconcile") {
      if (!open_turn) fail(seq, kind + " without an open turn");
      if (kind == "reconcile") ++rep.reconciles;
      if (!e.contains("state")) continue;  // inconsistent choice; reconcile follows
      if (kind == "outcome-chosen") ++rep.outcome_chosen;
      std::set<FluentId> allowed_modelled;
      const auto k = e.at("outcome").get<std::size_t>();
      for (const auto& lit : outcomes.at(k)) allowed_modelled.insert(literal(lit.get<std::string>()).first);
      if (kind == "reconcile") {
        for (const auto& name : e.at("fired")) {
          for (const auto& fx : rules.at(name.get<std::string>())->fixups) allowed_modelled.insert(fx.fluent);
        }
      }
      const auto next = e.at("state").get<std::string>();
      for (auto f : diff(state, next)) {
        if (cfg.world(f)) {
          if (!observed.count(f)) fail(seq, "world fluent " + task.fluents[f] + " changed without a reading");
        } else if (!allowed_modelled.count(f)) {
          fail(seq, "modelled fluent " + task.fluents[f] + " changed outside outcome effects and rules");
        }
      }
      state = next;
      ++turn;
      open_turn = false;
    } else if (kind == "replan") {
      if (e.at("state").get<std::string>() != state) fail(seq, "replan from a state other than the current one");
      ++rep.replans;
    } else if (kind == "stop") {
      rep.stopped = true;
      after_stop = true;
      if (e.value("closes_turn", false)) {
        if (!open_turn) fail(seq, "stop closes a turn that is not open");
        ++turn;
        open_turn = false;
      } else if (open_turn) {
        fail(seq, "stop left a turn open");
      }
    } else if (kind == "done") {
      rep.done = true;
      if (open_turn) fail(seq, "done with an open turn");
      if (e.at("state").get<std::string>() != state) fail(seq, "done state differs from the current state");
      State s = State::from_bitstring(state);
      if (!task.is_goal(s)) fail(seq, "done in a non-goal state");
    }
  }
  rep.final_turn = turn;
  if (!open_turn && rep.action_requests != turn) {
    rep.violations.push_back("action requests " + std::to_string(rep.action_requests) + " != turns " +
                             std::to_string(turn));
  }
  return rep;
}

}  // namespace sarplan::testing
