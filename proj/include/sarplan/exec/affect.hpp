#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sarplan::exec {

enum class AnxietyLevel { Low = 0, Medium = 1, High = 2 };
enum class Engagement { Low = 0, High = 1 };

std::string_view to_string(AnxietyLevel a);
std::optional<AnxietyLevel> parse_anxiety(std::string_view s);
std::string_view to_string(Engagement e);

/// low/medium count as acceptable anxiety for the boolean `okanxiety` fluents.
inline bool anxiety_ok(AnxietyLevel a) { return a != AnxietyLevel::High; }

struct AffectiveState {
  AnxietyLevel anxiety = AnxietyLevel::Low;
  Engagement engagement = Engagement::Low;
  double valence = 0.0;  // [-1, 1]
  double arousal = 0.0;  // [0, 1]

  /// Clamp scalars to their ranges.
  void normalize();

  friend bool operator==(const AffectiveState&, const AffectiveState&) = default;
};

nlohmann::json to_json(const AffectiveState& a);

enum class Expression { Happiness = 0, Sadness, Fear, Anger, Surprise, Neutral };
inline constexpr std::size_t kExpressionCount = 6;

enum class Attention { OnRobot, OnCarer, OnProcedure, Away };

std::string_view to_string(Attention a);
std::optional<Attention> parse_attention(std::string_view s);

/// Output of the (simulated) face-analysis pipeline.
struct SimulatedSignals {
  std::array<double, kExpressionCount> expression{};  // probabilities, sum to 1
  Attention attention = Attention::Away;
  double head_speed = 0.0;  // normalized units, >= 0

  double p(Expression e) const { return expression[static_cast<std::size_t>(e)]; }
};

nlohmann::json to_json(const SimulatedSignals& s);
SimulatedSignals signals_from_json(const nlohmann::json& j);

/// Threshold table mapping signals to affect.
struct AffectThresholds {
  double negative_weight = 0.7;  // weight of fear + sadness + anger
  double speed_weight = 0.3;
  double speed_reference = 1.0;  // head speed that saturates the speed term
  double medium = 0.3;           // score cut-offs
  double high = 0.55;
  std::vector<Attention> engaged_attention{Attention::OnRobot};
};

AffectThresholds thresholds_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AffectThresholds& t);

/// Pure mapping from signals to affect; the session wraps this and mirrors
/// the result into sensed fluents.
AffectiveState classify_affect(const SimulatedSignals& s, const AffectThresholds& t);

}  // namespace sarplan::exec
