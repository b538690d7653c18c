#include "sarplan/exec/affect.hpp"

#include <algorithm>

namespace sarplan::exec {

std::string_view to_string(AnxietyLevel a) {
  switch (a) {
    case AnxietyLevel::Low:
      return "low";
    case AnxietyLevel::Medium:
      return "medium";
    case AnxietyLevel::High:
      return "high";
  }
  return "low";
}

std::optional<AnxietyLevel> parse_anxiety(std::string_view s) {
  for (auto a : {AnxietyLevel::Low, AnxietyLevel::Medium, AnxietyLevel::High}) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

std::string_view to_string(Engagement e) { return e == Engagement::High ? "high" : "low"; }

std::string_view to_string(Attention a) {
  switch (a) {
    case Attention::OnRobot:
      return "on-robot";
    case Attention::OnCarer:
      return "on-carer";
    case Attention::OnProcedure:
      return "on-procedure";
    case Attention::Away:
      return "away";
  }
  return "away";
}

std::optional<Attention> parse_attention(std::string_view s) {
  for (auto a : {Attention::OnRobot, Attention::OnCarer, Attention::OnProcedure, Attention::Away}) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

void AffectiveState::normalize() {
  valence = std::clamp(valence, -1.0, 1.0);
  arousal = std::clamp(arousal, 0.0, 1.0);
}

nlohmann::json to_json(const AffectiveState& a) {
  return {{"anxiety", std::string(to_string(a.anxiety))},
          {"engagement", std::string(to_string(a.engagement))},
          {"valence", a.valence},
          {"arousal", a.arousal}};
}

nlohmann::json to_json(const SimulatedSignals& s) {
  return {{"expression", s.expression},
          {"attention", std::string(to_string(s.attention))},
          {"head_speed", s.head_speed}};
}

SimulatedSignals signals_from_json(const nlohmann::json& j) {
  SimulatedSignals s;
  s.expression = j.at("expression").get<std::array<double, kExpressionCount>>();
  auto att = parse_attention(j.at("attention").get<std::string>());
  if (!att) throw std::invalid_argument("unknown attention value");
  s.attention = *att;
  s.head_speed = j.at("head_speed").get<double>();
  return s;
}

AffectThresholds thresholds_from_json(const nlohmann::json& j) {
  AffectThresholds t;
  t.negative_weight = j.value("negative_weight", t.negative_weight);
  t.speed_weight = j.value("speed_weight", t.speed_weight);
  t.speed_reference = j.value("speed_reference", t.speed_reference);
  t.medium = j.value("medium", t.medium);
  t.high = j.value("high", t.high);
  if (j.contains("engaged_attention")) {
    t.engaged_attention.clear();
    for (const auto& a : j.at("engaged_attention")) {
      auto parsed = parse_attention(a.get<std::string>());
      if (!parsed) throw std::invalid_argument("unknown attention value in affect thresholds");
      t.engaged_attention.push_back(*parsed);
    }
  }
  if (!(t.medium <= t.high) || t.speed_reference <= 0) {
    throw std::invalid_argument("affect thresholds need medium <= high and speed_reference > 0");
  }
  return t;
}

nlohmann::json to_json(const AffectThresholds& t) {
  nlohmann::json att = nlohmann::json::array();
  for (auto a : t.engaged_attention) att.push_back(std::string(to_string(a)));
  return {{"negative_weight", t.negative_weight}, {"speed_weight", t.speed_weight},
          {"speed_reference", t.speed_reference}, {"medium", t.medium},
          {"high", t.high},                       {"engaged_attention", att}};
}

AffectiveState classify_affect(const SimulatedSignals& s, const AffectThresholds& t) {
  const double negative = s.p(Expression::Fear) + s.p(Expression::Sadness) + s.p(Expression::Anger);
  const double speed = std::clamp(s.head_speed / t.speed_reference, 0.0, 1.0);
  const double score = t.negative_weight * negative + t.speed_weight * speed;

  AffectiveState a;
  if (score >= t.high) {
    a.anxiety = AnxietyLevel::High;
  } else if (score >= t.medium && score > 0) {
    a.anxiety = AnxietyLevel::Medium;
  }
  const bool attending =
      std::find(t.engaged_attention.begin(), t.engaged_attention.end(), s.attention) != t.engaged_attention.end();
  a.engagement = attending ? Engagement::High : Engagement::Low;
  a.valence = s.p(Expression::Happiness) - negative;
  a.arousal = 0.5 * speed + 0.5 * (s.p(Expression::Fear) + s.p(Expression::Anger) + s.p(Expression::Surprise));
  a.normalize();
  return a;
}

}  // namespace sarplan::exec
