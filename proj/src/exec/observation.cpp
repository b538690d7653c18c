#include "sarplan/exec/observation.hpp"

#include <algorithm>

namespace sarplan::exec {

std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::Modelled:
      return "modelled";
    case Channel::Operator:
      return "operator";
    case Channel::Sensed:
      return "sensed";
  }
  return "modelled";
}

std::optional<Channel> parse_channel(std::string_view s) {
  for (auto c : {Channel::Modelled, Channel::Operator, Channel::Sensed}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::Default:
      return "default";
    case Source::Simulator:
      return "simulator";
    case Source::Operator:
      return "operator";
  }
  return "default";
}

std::optional<Source> parse_source(std::string_view s) {
  for (auto v : {Source::Default, Source::Simulator, Source::Operator}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

const Reading* ObservationBundle::find(FluentId f) const {
  auto it = std::lower_bound(readings.begin(), readings.end(), f,
                             [](const Reading& r, FluentId id) { return r.fluent < id; });
  return it != readings.end() && it->fluent == f ? &*it : nullptr;
}

void ObservationBundle::put(const Reading& r) {
  auto it = std::lower_bound(readings.begin(), readings.end(), r.fluent,
                             [](const Reading& x, FluentId id) { return x.fluent < id; });
  if (it != readings.end() && it->fluent == r.fluent) {
    if (r.source >= it->source) *it = r;
    return;
  }
  readings.insert(it, r);
}

void ObservationBundle::merge(const ObservationBundle& other) {
  for (const auto& r : other.readings) put(r);
  if (other.anxiety && (!anxiety || other.source >= source)) anxiety = other.anxiety;
  source = std::max(source, other.source);
}

nlohmann::json to_json(const GroundedTask& task, const ObservationBundle& b) {
  nlohmann::json readings = nlohmann::json::array();
  for (const auto& r : b.readings) {
    readings.push_back({{"fluent", task.fluents.at(r.fluent)},
                        {"value", r.value},
                        {"channel", std::string(to_string(r.channel))},
                        {"source", std::string(to_string(r.source))},
                        {"t", r.timestamp}});
  }
  nlohmann::json j = {{"source", std::string(to_string(b.source))}, {"readings", std::move(readings)}};
  if (b.anxiety) j["anxiety"] = std::string(to_string(*b.anxiety));
  return j;
}

ObservationBundle bundle_from_json(const GroundedTask& task, const nlohmann::json& j) {
  ObservationBundle b;
  try {
    if (j.contains("source")) {
      auto s = parse_source(j.at("source").get<std::string>());
      if (!s) throw std::invalid_argument("unknown bundle source");
      b.source = *s;
    }
    if (j.contains("anxiety") && !j.at("anxiety").is_null()) {
      auto a = parse_anxiety(j.at("anxiety").get<std::string>());
      if (!a) throw std::invalid_argument("unknown anxiety level");
      b.anxiety = *a;
    }
    const auto readings = j.value("readings", nlohmann::json::array());
    for (const auto& r : readings) {
      const auto name = r.at("fluent").get<std::string>();
      auto f = task.find_fluent(name);
      if (!f) throw std::invalid_argument("unknown fluent " + name);
      Reading reading;
      reading.fluent = *f;
      reading.value = r.at("value").get<bool>();
      reading.timestamp = r.value("t", 0.0);
      auto ch = parse_channel(r.value("channel", std::string("operator")));
      auto src = parse_source(r.value("source", std::string(to_string(b.source))));
      if (!ch || !src) throw std::invalid_argument("unknown reading channel or source");
      reading.channel = *ch;
      reading.source = *src;
      b.put(reading);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed observation bundle: ") + e.what());
  }
  return b;
}

}  // namespace sarplan::exec
