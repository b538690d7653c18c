#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "sarplan/pddl/task.hpp"

namespace sarplan::planner {

/// Ordered by strength: Invalid < Weak < StrongCyclic < Strong.
enum class SolutionClass { Invalid = 0, Weak = 1, StrongCyclic = 2, Strong = 3 };

enum class Semantics { StrongCyclic, Strong };

std::string_view to_string(SolutionClass c);
std::optional<SolutionClass> parse_solution_class(std::string_view s);
std::string_view to_string(Semantics s);
std::optional<Semantics> parse_semantics(std::string_view s);

/// True when `got` satisfies a request for `wanted`.
inline bool meets(SolutionClass got, Semantics wanted) {
  return wanted == Semantics::Strong ? got == SolutionClass::Strong : got >= SolutionClass::StrongCyclic;
}

/// State -> action mapping. std::map keeps iteration (and serialization) order
/// canonical.
struct Policy {
  std::map<State, ActionId> mapping;
  SolutionClass solution_class = SolutionClass::Invalid;

  std::optional<ActionId> lookup(const State& s) const {
    auto it = mapping.find(s);
    if (it == mapping.end()) return std::nullopt;
    return it->second;
  }
  std::size_t size() const { return mapping.size(); }

  friend bool operator==(const Policy&, const Policy&) = default;
};

class PolicyFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// {fluent_order: [...], entries: [{state: "0101", action: "(a x)"}], class}
nlohmann::json policy_to_json(const GroundedTask& task, const Policy& policy);
/// Throws PolicyFormatError when the fluent order differs from the task's or
/// an entry names an unknown action or a malformed state.
Policy policy_from_json(const GroundedTask& task, const nlohmann::json& doc);

}  // namespace sarplan::planner
