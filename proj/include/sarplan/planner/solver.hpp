#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "sarplan/planner/policy.hpp"

namespace sarplan::planner {

class Unsolvable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ResourceLimit : public std::runtime_error {
 public:
  ResourceLimit(const std::string& what, std::size_t budget) : std::runtime_error(what), budget_(budget) {}
  std::size_t budget() const { return budget_; }

 private:
  std::size_t budget_;
};

struct OutcomeTag {
  ActionId action = 0;
  std::size_t outcome = 0;

  friend bool operator==(const OutcomeTag&, const OutcomeTag&) = default;
};

/// All-outcomes determinization: one deterministic action per (action, outcome),
/// ordered lexicographically by (action id, outcome index).
struct Determinization {
  GroundedTask task;
  std::vector<OutcomeTag> tags;  // tags[i] = origin of task.actions[i]
  std::vector<std::vector<std::size_t>> variants_of;  // original id -> variant ids

  OutcomeTag tag(std::size_t variant) const { return tags.at(variant); }
};

Determinization determinize(const GroundedTask& task);

struct SolveOptions {
  Semantics semantics = Semantics::StrongCyclic;
  std::size_t expansion_budget = 1'000'000;
  /// The explicit AND/OR fallback for strong requests only runs when the
  /// reachable state space is at most this large.
  std::size_t andor_state_bound = 200'000;
  /// Start state; defaults to task.init.
  std::optional<State> from;
};

struct SolveStats {
  std::size_t expansions = 0;
  std::size_t restarts = 0;
  std::size_t dead_ends = 0;
  bool used_fallback = false;
};

/// Throws Unsolvable or ResourceLimit. Deterministic for identical input.
Policy solve(const GroundedTask& task, const SolveOptions& options = {}, SolveStats* stats = nullptr);

using SolveResult = std::variant<Policy, Unsolvable, ResourceLimit>;

/// Solves independent tasks concurrently (OpenMP); results in input order.
std::vector<SolveResult> solve_many(std::span<const GroundedTask> tasks, const SolveOptions& options = {});
/// Sequential reference for solve_many.
std::vector<SolveResult> solve_many_serial(std::span<const GroundedTask> tasks, const SolveOptions& options = {});

/// Additive delete-relaxation estimate over (fluent, value) facts; returns
/// nullopt when the goal is relaxed-unreachable.
std::optional<int> h_add(const GroundedTask& task, const State& s);

}  // namespace sarplan::planner
