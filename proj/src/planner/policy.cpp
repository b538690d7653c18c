#include "sarplan/planner/policy.hpp"

#include <unordered_map>

namespace sarplan::planner {

std::string_view to_string(SolutionClass c) {
  switch (c) {
    case SolutionClass::Strong:
      return "strong";
    case SolutionClass::StrongCyclic:
      return "strong-cyclic";
    case SolutionClass::Weak:
      return "weak";
    case SolutionClass::Invalid:
      return "invalid";
  }
  return "invalid";
}

std::optional<SolutionClass> parse_solution_class(std::string_view s) {
  for (auto c : {SolutionClass::Strong, SolutionClass::StrongCyclic, SolutionClass::Weak, SolutionClass::Invalid}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::string_view to_string(Semantics s) { return s == Semantics::Strong ? "strong" : "strong-cyclic"; }

std::optional<Semantics> parse_semantics(std::string_view s) {
  if (s == "strong") return Semantics::Strong;
  if (s == "strong-cyclic") return Semantics::StrongCyclic;
  return std::nullopt;
}

nlohmann::json policy_to_json(const GroundedTask& task, const Policy& policy) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [state, action] : policy.mapping) {
    entries.push_back({{"state", state.bitstring()}, {"action", task.actions.at(action).name()}});
  }
  return {{"fluent_order", task.fluents},
          {"entries", std::move(entries)},
          {"class", std::string(to_string(policy.solution_class))}};
}

Policy policy_from_json(const GroundedTask& task, const nlohmann::json& doc) {
  try {
    if (doc.at("fluent_order").get<std::vector<std::string>>() != task.fluents) {
      throw PolicyFormatError("policy fluent order does not match the task");
    }
    std::unordered_map<std::string, ActionId> by_name;
    for (std::size_t i = 0; i < task.actions.size(); ++i) {
      by_name.emplace(task.actions[i].name(), static_cast<ActionId>(i));
    }
    Policy p;
    for (const auto& e : doc.at("entries")) {
      const auto bits = e.at("state").get<std::string>();
      if (bits.size() != task.num_fluents()) throw PolicyFormatError("state '" + bits + "' has wrong length");
      State s = State::from_bitstring(bits);
      const auto name = e.at("action").get<std::string>();
      auto it = by_name.find(name);
      if (it == by_name.end()) throw PolicyFormatError("unknown action " + name);
      p.mapping[s] = it->second;
    }
    if (doc.contains("class")) {
      auto c = parse_solution_class(doc.at("class").get<std::string>());
      if (!c) throw PolicyFormatError("unknown solution class");
      p.solution_class = *c;
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw PolicyFormatError(std::string("malformed policy document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw PolicyFormatError(e.what());
  }
}

}  // namespace sarplan::planner
