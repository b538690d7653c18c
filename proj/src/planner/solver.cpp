#include "sarplan/planner/solver.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "sarplan/planner/verify.hpp"

namespace sarplan::planner {

Determinization determinize(const GroundedTask& task) {
  Determinization d;
  d.task.fluents = task.fluents;
  d.task.init = task.init;
  d.task.goal = task.goal;
  d.variants_of.resize(task.actions.size());
  for (std::size_t a = 0; a < task.actions.size(); ++a) {
    const auto& act = task.actions[a];
    for (std::size_t k = 0; k < act.outcomes.size(); ++k) {
      GroundAction v = act;
      v.outcomes = {act.outcomes[k]};
      d.variants_of[a].push_back(d.task.actions.size());
      d.task.actions.push_back(std::move(v));
      d.tags.push_back({static_cast<ActionId>(a), k});
    }
  }
  return d;
}

namespace {

constexpr int kInf = std::numeric_limits<int>::max() / 4;

inline std::size_t fact(const FluentLiteral& l) { return 2 * static_cast<std::size_t>(l.fluent) + (l.value ? 1 : 0); }

// Relaxed reachability over (fluent, value) facts: negative preconditions are
// ordinary facts achieved by deletes.
class AdditiveHeuristic {
 public:
  explicit AdditiveHeuristic(const GroundedTask& task) : task_(task), cost_(2 * task.num_fluents()) {}

  std::optional<int> operator()(const State& s) {
    std::fill(cost_.begin(), cost_.end(), kInf);
    for (std::size_t f = 0; f < task_.num_fluents(); ++f) {
      cost_[2 * f + (s.get(static_cast<FluentId>(f)) ? 1 : 0)] = 0;
    }
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& a : task_.actions) {
        int c = 1;
        for (const auto& p : a.pre) {
          const int pc = cost_[fact(p)];
          if (pc >= kInf) {
            c = kInf;
            break;
          }
          c += pc;
        }
        if (c >= kInf) continue;
        for (const auto& outcome : a.outcomes) {
          for (const auto& e : outcome) {
            if (c < cost_[fact(e)]) {
              cost_[fact(e)] = c;
              changed = true;
            }
          }
        }
      }
    }
    int h = 0;
    for (const auto& g : task_.goal) {
      if (cost_[fact(g)] >= kInf) return std::nullopt;
      h += cost_[fact(g)];
    }
    return h;
  }

 private:
  const GroundedTask& task_;
  std::vector<int> cost_;
};

struct PairKey {
  State state;
  ActionId action;
  friend bool operator==(const PairKey&, const PairKey&) = default;
};

struct PairHash {
  std::size_t operator()(const PairKey& k) const { return k.state.hash() * 31u + k.action; }
};

struct Step {
  State from;
  ActionId action;
  std::size_t outcome;
};

class PolicyBuilder {
 public:
  PolicyBuilder(const GroundedTask& task, const SolveOptions& opt, SolveStats& stats)
      : task_(task), opt_(opt), stats_(stats), det_(determinize(task)), heuristic_(task) {}

  Policy run(const State& start) {
    for (;;) {
      policy_.mapping.clear();
      std::deque<State> open{start};
      std::unordered_set<State> queued{start};
      std::optional<State> failed;
      while (!open.empty() && !failed) {
        State s = std::move(open.front());
        open.pop_front();
        if (task_.is_goal(s) || policy_.mapping.count(s)) continue;
        if (dead_.count(s)) {
          failed = s;
          break;
        }
        auto path = search(s);
        if (!path) {
          dead_.insert(s);
          ++stats_.dead_ends;
          failed = s;
          break;
        }
        for (const auto& step : *path) {
          policy_.mapping.emplace(step.from, step.action);
          const auto& act = task_.actions[step.action];
          for (std::size_t k = 0; k < act.outcomes.size(); ++k) {
            if (k == step.outcome) continue;
            State t = step.from.applied(act.outcomes[k]);
            if (task_.is_goal(t) || policy_.mapping.count(t) || queued.count(t)) continue;
            queued.insert(t);
            open.push_back(std::move(t));
          }
        }
      }
      if (!failed) return std::move(policy_);
      if (*failed == start) throw Unsolvable("no policy reaches the goal from the start state");
      forbid_pairs_into(*failed);
      ++stats_.restarts;
    }
  }

 private:
  void forbid_pairs_into(const State& dead) {
    bool progress = false;
    for (const auto& [s, a] : policy_.mapping) {
      for (const auto& outcome : task_.actions[a].outcomes) {
        if (s.applied(outcome) == dead) {
          progress |= forbidden_.insert({s, a}).second;
          break;
        }
      }
    }
    if (!progress) throw std::logic_error("dead end reached without a forbiddable state-action pair");
  }

  bool allowed(const State& s, ActionId a) {
    if (forbidden_.count({s, a})) return false;
    for (const auto& outcome : task_.actions[a].outcomes) {
      if (dead_.count(s.applied(outcome))) {
        forbidden_.insert({s, a});
        return false;
      }
    }
    return true;
  }

  // A* (g + h_add) in the determinization to any goal state or any state the
  // current policy already handles. Ties: lower f, then lower h, then FIFO.
  std::optional<std::vector<Step>> search(const State& start) {
    struct Node {
      State state;
      int g;
      std::size_t parent;
      std::size_t variant;
    };
    struct Entry {
      int f;
      int h;
      std::size_t seq;
      std::size_t node;
      bool operator>(const Entry& o) const {
        if (f != o.f) return f > o.f;
        if (h != o.h) return h > o.h;
        return seq > o.seq;
      }
    };
    auto h0 = heuristic_(start);
    if (!h0) return std::nullopt;
    std::vector<Node> nodes{{start, 0, SIZE_MAX, SIZE_MAX}};
    std::unordered_map<State, std::size_t> seen{{start, 0}};
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    std::size_t seq = 0;
    open.push({*h0, *h0, seq++, 0});
    while (!open.empty()) {
      const Entry e = open.top();
      open.pop();
      const State cur = nodes[e.node].state;
      if (e.node != 0 && (task_.is_goal(cur) || policy_.mapping.count(cur))) {
        std::vector<Step> path;
        for (std::size_t n = e.node; nodes[n].parent != SIZE_MAX; n = nodes[n].parent) {
          const auto tag = det_.tag(nodes[n].variant);
          path.push_back({nodes[nodes[n].parent].state, tag.action, tag.outcome});
        }
        std::reverse(path.begin(), path.end());
        return path;
      }
      if (++stats_.expansions > opt_.expansion_budget) {
        throw ResourceLimit("node expansion budget of " + std::to_string(opt_.expansion_budget) + " exceeded",
                            opt_.expansion_budget);
      }
      const int g = nodes[e.node].g;
      for (std::size_t v = 0; v < det_.task.actions.size(); ++v) {
        const auto& variant = det_.task.actions[v];
        if (!variant.applicable(cur)) continue;
        const ActionId orig = det_.tag(v).action;
        if (!allowed(cur, orig)) continue;
        State next = cur.applied(variant.outcomes.front());
        if (seen.count(next) || dead_.count(next)) continue;
        const bool target = task_.is_goal(next) || policy_.mapping.count(next);
        std::optional<int> h = target ? std::optional<int>(0) : heuristic_(next);
        if (!h) continue;
        nodes.push_back({next, g + 1, e.node, v});
        seen.emplace(std::move(next), nodes.size() - 1);
        open.push({g + 1 + *h, *h, seq++, nodes.size() - 1});
      }
    }
    return std::nullopt;
  }

  const GroundedTask& task_;
  const SolveOptions& opt_;
  SolveStats& stats_;
  Determinization det_;
  AdditiveHeuristic heuristic_;
  Policy policy_;
  std::unordered_set<State> dead_;
  std::unordered_set<PairKey, PairHash> forbidden_;
};

// Explicit AND/OR search over the reachable state space: least fixpoint of the
// strong preimage. Ranks strictly decrease along the policy, so it is acyclic.
Policy strong_fixpoint(const GroundedTask& task, const State& start, const SolveOptions& opt) {
  std::vector<State> states{start};
  std::unordered_map<State, std::size_t> index{{start, 0}};
  std::vector<std::vector<std::pair<ActionId, std::vector<std::size_t>>>> edges;
  for (std::size_t i = 0; i < states.size(); ++i) {
    edges.emplace_back();
    if (task.is_goal(states[i])) continue;
    for (std::size_t a = 0; a < task.actions.size(); ++a) {
      const auto& act = task.actions[a];
      if (!act.applicable(states[i])) continue;
      std::vector<std::size_t> succ;
      for (const auto& outcome : act.outcomes) {
        State t = states[i].applied(outcome);
        auto [it, inserted] = index.emplace(t, states.size());
        if (inserted) {
          if (states.size() >= opt.andor_state_bound) {
            throw ResourceLimit("reachable state space exceeds the AND/OR bound of " +
                                    std::to_string(opt.andor_state_bound),
                                opt.andor_state_bound);
          }
          states.push_back(std::move(t));
        }
        succ.push_back(it->second);
      }
      edges[i].emplace_back(static_cast<ActionId>(a), std::move(succ));
    }
  }
  std::vector<char> solved(states.size(), 0);
  std::vector<std::optional<ActionId>> choice(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) solved[i] = task.is_goal(states[i]);
  bool changed = true;
  while (changed && !solved[0]) {
    changed = false;
    const auto snapshot = solved;
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (snapshot[i]) continue;
      for (const auto& [a, succ] : edges[i]) {
        if (std::all_of(succ.begin(), succ.end(), [&](std::size_t j) { return snapshot[j] != 0; })) {
          solved[i] = 1;
          choice[i] = a;
          changed = true;
          break;
        }
      }
    }
  }
  if (!solved[0]) throw Unsolvable("no strong policy exists from the start state");
  Policy p;
  std::vector<std::size_t> stack{0};
  std::vector<char> visited(states.size(), 0);
  visited[0] = 1;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    if (!choice[i]) continue;
    p.mapping.emplace(states[i], *choice[i]);
    for (const auto& outcome : task.actions[*choice[i]].outcomes) {
      const std::size_t j = index.at(states[i].applied(outcome));
      if (!visited[j]) {
        visited[j] = 1;
        stack.push_back(j);
      }
    }
  }
  return p;
}

}  // namespace

std::optional<int> h_add(const GroundedTask& task, const State& s) { return AdditiveHeuristic(task)(s); }

Policy solve(const GroundedTask& task, const SolveOptions& options, SolveStats* stats) {
  SolveStats local;
  SolveStats& st = stats ? *stats : local;
  const State start = options.from.value_or(task.init);
  if (start.size() != task.num_fluents()) throw std::invalid_argument("start state does not match the task");

  Policy policy = PolicyBuilder(task, options, st).run(start);
  policy.solution_class = verify_policy(task, policy, start);
  if (options.semantics == Semantics::Strong && policy.solution_class != SolutionClass::Strong) {
    st.used_fallback = true;
    policy = strong_fixpoint(task, start, options);
    policy.solution_class = verify_policy(task, policy, start);
  }
  if (!meets(policy.solution_class, options.semantics)) {
    throw std::logic_error("solver produced a " + std::string(to_string(policy.solution_class)) + " policy");
  }
  return policy;
}

namespace {

SolveResult solve_one(const GroundedTask& task, const SolveOptions& options) {
  try {
    return solve(task, options);
  } catch (const Unsolvable& e) {
    return e;
  } catch (const ResourceLimit& e) {
    return e;
  }
}

}  // namespace

std::vector<SolveResult> solve_many(std::span<const GroundedTask> tasks, const SolveOptions& options) {
  std::vector<SolveResult> out(tasks.size(), SolveResult{Policy{}});
  const auto n = static_cast<long long>(tasks.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = solve_one(tasks[static_cast<std::size_t>(i)], options);
  }
  return out;
}

std::vector<SolveResult> solve_many_serial(std::span<const GroundedTask> tasks, const SolveOptions& options) {
  std::vector<SolveResult> out;
  out.reserve(tasks.size());
  for (const auto& t : tasks) out.push_back(solve_one(t, options));
  return out;
}

}  // namespace sarplan::planner
