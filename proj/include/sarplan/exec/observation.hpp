#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sarplan/exec/affect.hpp"
#include "sarplan/pddl/task.hpp"

namespace sarplan::exec {

/// Transition implementor for a fluent.
enum class Channel { Modelled, Operator, Sensed };

std::string_view to_string(Channel c);
std::optional<Channel> parse_channel(std::string_view s);

inline bool world_determined(Channel c) { return c != Channel::Modelled; }

/// Where a reading came from; also its merge priority (higher wins).
enum class Source { Default = 0, Simulator = 1, Operator = 2 };

std::string_view to_string(Source s);
std::optional<Source> parse_source(std::string_view s);

struct Reading {
  FluentId fluent = 0;
  bool value = false;
  Channel channel = Channel::Operator;
  double timestamp = 0.0;  // session clock, seconds
  Source source = Source::Operator;

  friend bool operator==(const Reading&, const Reading&) = default;
};

/// Channel-tagged fluent readings for one turn; at most one reading per fluent.
struct ObservationBundle {
  std::vector<Reading> readings;  // sorted by fluent
  Source source = Source::Operator;
  /// Operator-reported anxiety level accompanying the readings, if any.
  std::optional<AnxietyLevel> anxiety;

  bool empty() const { return readings.empty(); }
  const Reading* find(FluentId f) const;

  /// Insert or replace by priority: an existing reading from a higher-priority
  /// source is kept.
  void put(const Reading& r);
  /// Merge another bundle into this one under the same priority rule.
  void merge(const ObservationBundle& other);

  friend bool operator==(const ObservationBundle&, const ObservationBundle&) = default;
};

nlohmann::json to_json(const GroundedTask& task, const ObservationBundle& b);
/// Throws std::invalid_argument on unknown fluents or malformed fields.
ObservationBundle bundle_from_json(const GroundedTask& task, const nlohmann::json& j);

}  // namespace sarplan::exec
