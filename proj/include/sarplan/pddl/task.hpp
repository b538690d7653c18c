#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sarplan/core/state.hpp"
#include "sarplan/pddl/model.hpp"

namespace sarplan {

using ActionId = std::uint32_t;
using pddl::ActionGroup;

struct GroundAction {
  std::string schema;
  std::vector<std::string> args;
  std::vector<FluentLiteral> pre;                    // sorted by fluent
  std::vector<std::vector<FluentLiteral>> outcomes;  // each sorted by fluent, consistent
  ActionGroup group = ActionGroup::RobotBehaviour;

  bool deterministic() const { return outcomes.size() == 1; }
  bool applicable(const State& s) const { return s.satisfies(pre); }
  /// "(schema arg1 arg2)"
  std::string name() const;

  friend bool operator==(const GroundAction&, const GroundAction&) = default;
};

/// The finite FOND task: fluent universe, closed-world initial state,
/// partial goal and ground actions.
struct GroundedTask {
  std::vector<std::string> fluents;  // "(pred a b)" in grounding order
  State init;
  std::vector<FluentLiteral> goal;
  std::vector<GroundAction> actions;

  std::size_t num_fluents() const { return fluents.size(); }
  bool is_goal(const State& s) const { return s.satisfies(goal); }

  std::optional<FluentId> find_fluent(std::string_view name) const;
  std::optional<ActionId> find_action(std::string_view name) const;

  std::string format(const FluentLiteral& lit) const;

  friend bool operator==(const GroundedTask&, const GroundedTask&) = default;
};

/// Parallel grounding (OpenMP over bindings). Fluents: every type-consistent
/// instantiation of every predicate, in predicate order then lexicographic
/// object order. Actions: every type-consistent binding of every schema.
/// Throws MismatchedDomain when the problem names another domain.
GroundedTask ground(const pddl::DomainModel& domain, const pddl::ProblemModel& problem);

/// Single-threaded recursive reference for `ground`; same output ordering.
GroundedTask ground_serial(const pddl::DomainModel& domain, const pddl::ProblemModel& problem);

/// Parse domain and problem text and ground them.
GroundedTask load_task(std::string_view domain_text, std::string_view problem_text);

}  // namespace sarplan
