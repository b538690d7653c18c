#include "sarplan/planner/branched_plan.hpp"

#include <functional>
#include <sstream>
#include <unordered_map>

namespace sarplan::planner {

namespace {
constexpr std::size_t kNodeLimit = 1'000'000;
}

std::size_t BranchedPlan::branch_count() const {
  std::size_t n = 0;
  for (const auto& node : nodes) n += node.children.size() > 1 ? 1 : 0;
  return n;
}

std::string outcome_label(const GroundedTask& task, ActionId action, std::size_t outcome) {
  const auto& eff = task.actions.at(action).outcomes.at(outcome);
  if (eff.empty()) return "(no change)";
  std::string out;
  for (const auto& l : eff) {
    if (!out.empty()) out += " ";
    out += task.format(l);
  }
  return out;
}

BranchedPlan unfold(const GroundedTask& task, const Policy& policy, std::size_t depth_limit,
                    const std::optional<State>& from) {
  BranchedPlan plan;
  std::unordered_map<State, std::size_t> on_path;

  std::function<std::size_t(const State&, std::size_t)> build = [&](const State& s, std::size_t depth) {
    if (plan.nodes.size() >= kNodeLimit) throw DepthExceeded("plan tree exceeds " + std::to_string(kNodeLimit) + " nodes");
    const std::size_t id = plan.nodes.size();
    plan.nodes.push_back({id, s, NodeKind::Goal, std::nullopt, depth, {}});
    if (task.is_goal(s)) return id;
    auto action = policy.lookup(s);
    if (!action) {
      plan.nodes[id].kind = NodeKind::Unhandled;
      return id;
    }
    if (depth >= depth_limit) {
      throw DepthExceeded("policy unfolding exceeds depth limit " + std::to_string(depth_limit));
    }
    plan.nodes[id].kind = NodeKind::Branch;
    plan.nodes[id].action = action;
    on_path.emplace(s, id);
    const auto& outcomes = task.actions.at(*action).outcomes;
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
      State t = s.applied(outcomes[k]);
      auto back = on_path.find(t);
      PlanEdge edge{k, 0, false};
      if (back != on_path.end()) {
        edge.target = back->second;
        edge.back = true;
      } else {
        edge.target = build(t, depth + 1);
      }
      plan.nodes[id].children.push_back(edge);
    }
    on_path.erase(s);
    return id;
  };
  build(from.value_or(task.init), 0);
  return plan;
}

nlohmann::json plan_to_json(const GroundedTask& task, const BranchedPlan& plan) {
  nlohmann::json nodes = nlohmann::json::array();
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& n : plan.nodes) {
    nlohmann::json j = {{"id", n.id}, {"state", n.state.bitstring()}, {"depth", n.depth}};
    switch (n.kind) {
      case NodeKind::Goal:
        j["kind"] = "goal";
        break;
      case NodeKind::Unhandled:
        j["kind"] = "unhandled";
        break;
      case NodeKind::Branch:
        j["kind"] = "action";
        j["action"] = task.actions[*n.action].name();
        j["group"] = std::string(pddl::to_string(task.actions[*n.action].group));
        break;
    }
    nodes.push_back(std::move(j));
    for (const auto& e : n.children) {
      edges.push_back({{"from", n.id},
                       {"to", e.target},
                       {"outcome", e.outcome},
                       {"label", outcome_label(task, *n.action, e.outcome)},
                       {"back", e.back}});
    }
  }
  return {{"root", 0}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

std::string render_plan(const GroundedTask& task, const BranchedPlan& plan) {
  std::ostringstream os;
  std::function<void(std::size_t, const std::string&)> print = [&](std::size_t id, const std::string& indent) {
    const auto& n = plan.nodes[id];
    os << "#" << n.id << " ";
    if (n.kind == NodeKind::Goal) {
      os << "GOAL\n";
      return;
    }
    if (n.kind == NodeKind::Unhandled) {
      os << "UNHANDLED\n";
      return;
    }
    os << task.actions[*n.action].name() << "\n";
    const bool branching = n.children.size() > 1;
    for (const auto& e : n.children) {
      os << indent << "  ";
      if (branching) os << "[" << e.outcome << ": " << outcome_label(task, *n.action, e.outcome) << "] ";
      if (e.back) {
        os << "-> back to #" << e.target << "\n";
      } else {
        print(e.target, indent + (branching ? "  " : ""));
      }
    }
  };
  print(0, "");
  return os.str();
}

}  // namespace sarplan::planner
