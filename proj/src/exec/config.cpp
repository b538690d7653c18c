#include "sarplan/exec/config.hpp"

#include <algorithm>
#include <set>

namespace sarplan::exec {

namespace {

FluentId fluent_or_throw(const GroundedTask& task, const std::string& name, const char* where) {
  auto f = task.find_fluent(name);
  if (!f) throw BadConfig(std::string(where) + ": unknown fluent " + name);
  return *f;
}

bool valid_default_value(const nlohmann::json& v) {
  if (v.is_boolean()) return true;
  if (!v.is_string()) return false;
  const auto s = v.get<std::string>();
  if (s == "current" || s == "anxiety") return true;
  if (s.rfind("expected:", 0) == 0) {
    const auto digits = s.substr(9);
    return !digits.empty() && std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; });
  }
  return false;
}

std::vector<FluentLiteral> literal_map(const GroundedTask& task, const nlohmann::json& j, const char* where) {
  std::vector<FluentLiteral> out;
  for (const auto& [name, value] : j.items()) {
    if (!value.is_boolean()) throw BadConfig(std::string(where) + ": value for " + name + " must be boolean");
    out.push_back({fluent_or_throw(task, name, where), value.get<bool>()});
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::string_view to_string(PromptKind k) { return k == PromptKind::Anxiety ? "anxiety" : "confirm"; }

double SessionConfig::max_timeout() const {
  double m = 0;
  for (const auto& t : timeouts) m = std::max(m, t.seconds);
  return m;
}

PromptKind SessionConfig::prompt_kind(const std::string& fluent_name) const {
  auto it = prompts.find(predicate_of(fluent_name));
  return it == prompts.end() ? PromptKind::Confirm : it->second;
}

std::string predicate_of(const std::string& fluent_name) {
  auto start = fluent_name.find_first_not_of("( ");
  if (start == std::string::npos) return {};
  auto end = fluent_name.find_first_of(" )", start);
  return fluent_name.substr(start, end - start);
}

SessionConfig resolve_config(const GroundedTask& task, const nlohmann::json& doc) {
  SessionConfig cfg;
  try {
    if (!doc.is_object()) throw BadConfig("config must be a JSON object");

    // channels
    const auto ch = doc.value("channels", nlohmann::json::object());
    std::optional<Channel> fallback;
    if (ch.contains("default")) {
      fallback = parse_channel(ch.at("default").get<std::string>());
      if (!fallback) throw BadConfig("channels.default: unknown channel");
    }
    std::vector<std::optional<Channel>> labels(task.num_fluents(), fallback);
    const auto by_predicate = ch.value("predicates", nlohmann::json::object());
    for (const auto& [pred, label] : by_predicate.items()) {
      auto c = parse_channel(label.get<std::string>());
      if (!c) throw BadConfig("channels.predicates." + pred + ": unknown channel");
      bool any = false;
      for (FluentId f = 0; f < task.num_fluents(); ++f) {
        if (predicate_of(task.fluents[f]) == pred) {
          labels[f] = *c;
          any = true;
        }
      }
      if (!any) throw BadConfig("channels.predicates: no fluent of predicate " + pred);
    }
    const auto by_fluent = ch.value("fluents", nlohmann::json::object());
    for (const auto& [name, label] : by_fluent.items()) {
      auto c = parse_channel(label.get<std::string>());
      if (!c) throw BadConfig("channels.fluents." + name + ": unknown channel");
      labels[fluent_or_throw(task, name, "channels.fluents")] = *c;
    }
    cfg.channels.reserve(labels.size());
    for (FluentId f = 0; f < labels.size(); ++f) {
      if (!labels[f]) throw BadConfig("fluent " + task.fluents[f] + " has no channel label");
      cfg.channels.push_back(*labels[f]);
    }

    // initial queries; default = every operator fluent
    if (doc.contains("initial_queries")) {
      for (const auto& name : doc.at("initial_queries")) {
        auto f = fluent_or_throw(task, name.get<std::string>(), "initial_queries");
        if (!cfg.world(f)) throw BadConfig("initial_queries: " + task.fluents[f] + " is modelled");
        cfg.initial_queries.push_back(f);
      }
    } else {
      for (FluentId f = 0; f < task.num_fluents(); ++f) {
        if (cfg.channels[f] == Channel::Operator) cfg.initial_queries.push_back(f);
      }
    }
    std::sort(cfg.initial_queries.begin(), cfg.initial_queries.end());
    cfg.initial_queries.erase(std::unique(cfg.initial_queries.begin(), cfg.initial_queries.end()),
                              cfg.initial_queries.end());

    // timeouts
    if (!doc.contains("timeouts")) throw BadConfig("missing timeouts table");
    const auto& tt = doc.at("timeouts");
    for (const auto& [key, _] : tt.items()) {
      if (!pddl::parse_group(key)) throw BadConfig("timeouts: unknown action group " + key);
    }
    for (auto g : pddl::kAllGroups) {
      const std::string key(pddl::to_string(g));
      if (!tt.contains(key)) throw BadConfig("timeouts: missing entry for " + key);
      const auto& e = tt.at(key);
      TimeoutEntry entry;
      entry.seconds = e.at("seconds").get<double>();
      if (!(entry.seconds > 0)) throw BadConfig("timeouts." + key + ": duration must be > 0");
      const auto defaults = e.value("defaults", nlohmann::json::array());
      for (const auto& d : defaults) {
        DefaultReading r{d.at("atom").get<std::string>(), d.at("value")};
        if (!valid_default_value(r.value)) throw BadConfig("timeouts." + key + ": bad default value " + r.value.dump());
        entry.defaults.push_back(std::move(r));
      }
      cfg.timeouts[static_cast<std::size_t>(g)] = std::move(entry);
    }

    cfg.consistency_threshold = doc.value("consistency_threshold", cfg.consistency_threshold);
    cfg.max_turns = doc.value("max_turns", cfg.max_turns);
    if (cfg.max_turns == 0) throw BadConfig("max_turns must be positive");

    // reconciliation rules
    std::set<int> priorities;
    const auto rules = doc.value("rules", nlohmann::json::array());
    for (const auto& r : rules) {
      ReconciliationRule rule;
      rule.name = r.at("name").get<std::string>();
      rule.priority = r.at("priority").get<int>();
      if (!priorities.insert(rule.priority).second) {
        throw BadConfig("rules: duplicate priority " + std::to_string(rule.priority));
      }
      rule.guard = literal_map(task, r.at("guard"), "rules.guard");
      rule.fixups = literal_map(task, r.at("fixups"), "rules.fixups");
      if (rule.guard.empty()) throw BadConfig("rule " + rule.name + " has an empty guard");
      for (const auto& l : rule.guard) {
        if (!cfg.world(l.fluent)) throw BadConfig("rule " + rule.name + " guards modelled fluent " + task.fluents[l.fluent]);
      }
      for (const auto& l : rule.fixups) {
        if (cfg.world(l.fluent)) throw BadConfig("rule " + rule.name + " fixes world fluent " + task.fluents[l.fluent]);
      }
      cfg.rules.push_back(std::move(rule));
    }
    std::sort(cfg.rules.begin(), cfg.rules.end(),
              [](const auto& a, const auto& b) { return a.priority > b.priority; });

    // affect
    if (doc.contains("affect")) {
      const auto& a = doc.at("affect");
      try {
        if (a.contains("thresholds")) cfg.thresholds = thresholds_from_json(a.at("thresholds"));
      } catch (const std::invalid_argument& e) {
        throw BadConfig(std::string("affect.thresholds: ") + e.what());
      }
      cfg.anxiety_predicate = a.value("anxiety_predicate", cfg.anxiety_predicate);
      if (a.contains("engagement_fluent") && !a.at("engagement_fluent").is_null()) {
        cfg.engagement_fluent = fluent_or_throw(task, a.at("engagement_fluent").get<std::string>(), "affect");
      }
    }

    const auto prompts = doc.value("prompts", nlohmann::json::object());
    for (const auto& [pred, kind] : prompts.items()) {
      const auto k = kind.get<std::string>();
      if (k == "anxiety") {
        cfg.prompts[pred] = PromptKind::Anxiety;
      } else if (k == "confirm") {
        cfg.prompts[pred] = PromptKind::Confirm;
      } else {
        throw BadConfig("prompts." + pred + ": unknown prompt kind " + k);
      }
    }

    if (doc.contains("planner")) {
      const auto& p = doc.at("planner");
      if (p.contains("semantics")) {
        auto s = planner::parse_semantics(p.at("semantics").get<std::string>());
        if (!s) throw BadConfig("planner.semantics must be strong or strong-cyclic");
        cfg.semantics = *s;
      }
      cfg.expansion_budget = p.value("expansion_budget", cfg.expansion_budget);
    }
  } catch (const nlohmann::json::exception& e) {
    throw BadConfig(std::string("malformed config: ") + e.what());
  }
  return cfg;
}

SessionConfig load_config(const GroundedTask& task, const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw BadConfig(std::string("config is not valid JSON: ") + e.what());
  }
  return resolve_config(task, doc);
}

}  // namespace sarplan::exec
