#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sarplan/planner/policy.hpp"

namespace sarplan::planner {

class DepthExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NodeKind { Branch, Goal, Unhandled };

struct PlanEdge {
  std::size_t outcome = 0;
  std::size_t target = 0;
  bool back = false;  // target is an ancestor on the current path
};

struct PlanNode {
  std::size_t id = 0;
  State state;
  NodeKind kind = NodeKind::Goal;
  std::optional<ActionId> action;
  std::size_t depth = 0;
  std::vector<PlanEdge> children;  // one per outcome of `action`
};

/// Tree unfolding of a policy from the task's initial state (or `from`).
struct BranchedPlan {
  std::vector<PlanNode> nodes;  // nodes[0] is the root

  const PlanNode& root() const { return nodes.front(); }
  std::size_t branch_count() const;
};

/// Throws DepthExceeded when an acyclic path grows beyond depth_limit.
BranchedPlan unfold(const GroundedTask& task, const Policy& policy, std::size_t depth_limit = 256,
                    const std::optional<State>& from = std::nullopt);

/// Node/edge list with outcome labels for the operator console.
nlohmann::json plan_to_json(const GroundedTask& task, const BranchedPlan& plan);

/// Indented text tree for terminals.
std::string render_plan(const GroundedTask& task, const BranchedPlan& plan);

/// Compact label of an outcome's effects, e.g. "(okanxiety s1)".
std::string outcome_label(const GroundedTask& task, ActionId action, std::size_t outcome);

}  // namespace sarplan::planner
