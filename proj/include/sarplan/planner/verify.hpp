#pragma once

#include "sarplan/planner/policy.hpp"

namespace sarplan::planner {

/// Exact classification of `policy` from task.init (or `from`) by fixpoint
/// analysis of the policy-reachable graph:
///  - strong: every outcome path reaches the goal and the graph is acyclic;
///  - strong-cyclic: every reachable state can reach the goal and every
///    reachable non-goal state is mapped;
///  - weak: some path reaches the goal;
///  - invalid: otherwise, or when any entry maps a state to an action whose
///    precondition fails there (or an unknown action id).
SolutionClass verify_policy(const GroundedTask& task, const Policy& policy);
SolutionClass verify_policy(const GroundedTask& task, const Policy& policy, const State& from);

}  // namespace sarplan::planner
