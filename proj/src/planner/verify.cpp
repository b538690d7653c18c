#include "sarplan/planner/verify.hpp"

#include <unordered_map>

namespace sarplan::planner {

SolutionClass verify_policy(const GroundedTask& task, const Policy& policy) {
  return verify_policy(task, policy, task.init);
}

SolutionClass verify_policy(const GroundedTask& task, const Policy& policy, const State& from) {
  for (const auto& [state, action] : policy.mapping) {
    if (action >= task.actions.size() || state.size() != task.num_fluents()) return SolutionClass::Invalid;
    if (!task.actions[action].applicable(state)) return SolutionClass::Invalid;
  }
  if (from.size() != task.num_fluents()) return SolutionClass::Invalid;

  // Explore the graph the policy induces from `from`.
  struct Vertex {
    bool goal = false;
    bool mapped = false;
    std::vector<std::size_t> succ;
  };
  std::vector<State> states{from};
  std::unordered_map<State, std::size_t> id{{from, 0}};
  std::vector<Vertex> g;
  for (std::size_t i = 0; i < states.size(); ++i) {
    Vertex v;
    v.goal = task.is_goal(states[i]);
    if (!v.goal) {
      if (auto a = policy.lookup(states[i])) {
        v.mapped = true;
        for (const auto& outcome : task.actions[*a].outcomes) {
          State t = states[i].applied(outcome);
          auto [it, fresh] = id.emplace(t, states.size());
          if (fresh) states.push_back(std::move(t));
          v.succ.push_back(it->second);
        }
      }
    }
    g.push_back(std::move(v));
  }
  const std::size_t n = g.size();

  // Backward closure: which vertices have some path to a goal vertex.
  std::vector<std::vector<std::size_t>> pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : g[i].succ) pred[j].push_back(i);
  }
  std::vector<char> reaches(n, 0);
  std::vector<std::size_t> work;
  for (std::size_t i = 0; i < n; ++i) {
    if (g[i].goal) {
      reaches[i] = 1;
      work.push_back(i);
    }
  }
  while (!work.empty()) {
    const auto j = work.back();
    work.pop_back();
    for (auto i : pred[j]) {
      if (!reaches[i]) {
        reaches[i] = 1;
        work.push_back(i);
      }
    }
  }
  if (!reaches[0]) return SolutionClass::Invalid;

  for (std::size_t i = 0; i < n; ++i) {
    if (!reaches[i] || (!g[i].goal && !g[i].mapped)) return SolutionClass::Weak;
  }

  // Peel vertices whose successors are all peeled; anything left sits on a cycle.
  std::vector<std::size_t> pending(n, 0);
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    pending[i] = g[i].succ.size();
    if (pending[i] == 0) ready.push_back(i);
  }
  std::size_t peeled = 0;
  while (!ready.empty()) {
    const auto j = ready.back();
    ready.pop_back();
    ++peeled;
    for (auto i : pred[j]) {
      if (--pending[i] == 0) ready.push_back(i);
    }
  }
  return peeled == n ? SolutionClass::Strong : SolutionClass::StrongCyclic;
}

}  // namespace sarplan::planner
