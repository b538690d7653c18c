#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sarplan/exec/affect.hpp"
#include "sarplan/exec/observation.hpp"
#include "sarplan/planner/policy.hpp"

namespace sarplan::exec {

class BadConfig : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One reading of a default observation. `atom` may mention action
/// parameters ("(okanxiety ?p)") or be "*" for every world fluent the action
/// can change. Value is one of: true, false, "current", "expected:N", "anxiety".
struct DefaultReading {
  std::string atom;
  nlohmann::json value;
};

struct TimeoutEntry {
  double seconds = 30.0;
  std::vector<DefaultReading> defaults;
};

struct ReconciliationRule {
  std::string name;
  int priority = 0;
  std::vector<FluentLiteral> guard;   // world-determined fluents
  std::vector<FluentLiteral> fixups;  // modelled fluents
};

enum class PromptKind { Anxiety, Confirm };

std::string_view to_string(PromptKind k);

/// Raw config text as a JSON document, resolved against a task.
struct SessionConfig {
  std::vector<Channel> channels;  // indexed by FluentId
  std::vector<FluentId> initial_queries;
  std::array<TimeoutEntry, 4> timeouts;  // indexed by ActionGroup
  std::size_t consistency_threshold = 1;
  std::size_t max_turns = 200;
  std::vector<ReconciliationRule> rules;  // descending priority
  AffectThresholds thresholds;
  std::string anxiety_predicate = "okanxiety";
  std::optional<FluentId> engagement_fluent;
  std::map<std::string, PromptKind> prompts;  // predicate -> kind; default Confirm
  planner::Semantics semantics = planner::Semantics::StrongCyclic;
  std::size_t expansion_budget = 1'000'000;

  Channel channel(FluentId f) const { return channels.at(f); }
  bool world(FluentId f) const { return world_determined(channels.at(f)); }
  const TimeoutEntry& timeout(ActionGroup g) const { return timeouts[static_cast<std::size_t>(g)]; }
  double max_timeout() const;
  PromptKind prompt_kind(const std::string& fluent_name) const;
};

/// Throws BadConfig on unknown fluents, an unlabelled fluent, a missing
/// timeout group, a non-positive duration, a rule fixing a world fluent, a
/// rule guarding a modelled fluent, or duplicate rule priorities.
SessionConfig resolve_config(const GroundedTask& task, const nlohmann::json& doc);

/// Convenience: parse JSON text then resolve. Malformed JSON is BadConfig too.
SessionConfig load_config(const GroundedTask& task, const std::string& text);

/// "(pred a b)" -> "pred"
std::string predicate_of(const std::string& fluent_name);

}  // namespace sarplan::exec
