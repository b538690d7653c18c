#include "sarplan/exec/replay.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace sarplan::exec {

ParsedLog parse_log(const std::string& text) {
  ParsedLog out;
  std::size_t pos = 0;
  std::size_t lineno = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    ++lineno;
    if (nl == std::string::npos) {
      out.warnings.push_back("dropped torn final line " + std::to_string(lineno) + " (" +
                             std::to_string(text.size() - pos) + " bytes)");
      break;
    }
    std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    nlohmann::json e;
    try {
      e = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& err) {
      throw CorruptLog("line " + std::to_string(lineno) + " is not JSON: " + err.what());
    }
    if (!e.is_object() || !e.contains("kind") || !e.at("kind").is_string() ||
        !known_event_kind(e.at("kind").get<std::string>())) {
      throw CorruptLog("line " + std::to_string(lineno) + " has no known event kind");
    }
    if (!e.contains("seq") || e.at("seq") != out.events.size()) {
      throw CorruptLog("line " + std::to_string(lineno) + " breaks the event sequence");
    }
    out.events.push_back(std::move(e));
    out.lines.push_back(std::move(line));
  }
  return out;
}

ParsedLog read_log_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_log(ss.str());
}

std::vector<nlohmann::json> trajectory(const std::vector<nlohmann::json>& events) {
  std::vector<nlohmann::json> out;
  for (const auto& e : events) {
    if (!e.contains("state")) continue;
    out.push_back({{"turn", e.at("turn")}, {"kind", e.at("kind")}, {"state", e.at("state")}});
  }
  return out;
}

std::string trajectory_text(const std::vector<nlohmann::json>& events) {
  std::string out;
  for (const auto& t : trajectory(events)) out += t.dump() + "\n";
  return out;
}

namespace {

void dispatch(Session& s, const nlohmann::json& e) {
  const auto kind = e.at("kind").get<std::string>();
  if (kind == "observation") {
    if (e.contains("signals")) {
      s.estimate_affect(signals_from_json(e.at("signals")));
    } else if (e.value("initial", false)) {
      s.observe_initial(bundle_from_json(s.task(), e.at("bundle")));
    } else {
      s.apply_outcome(bundle_from_json(s.task(), e.at("bundle")), e.at("turn").get<std::size_t>());
    }
  } else if (kind == "timeout-default") {
    if (e.value("initial", false)) {
      s.apply_initial_default();
    } else if (!s.handle_timeout()) {
      throw ReplayMismatch("timeout-default at seq " + e.at("seq").dump() + " but nothing had expired");
    }
  } else if (kind == "reconcile") {
    s.reconcile();
  } else if (kind == "action-request" || kind == "replan" || kind == "done") {
    s.next_action();
  } else if (kind == "stop") {
    s.stop(e.value("reason", std::string("operator")));
  } else {
    throw ReplayMismatch("event " + kind + " at seq " + e.at("seq").dump() + " cannot start a step");
  }
}

}  // namespace

ReplayResult replay(const std::vector<nlohmann::json>& events, const std::vector<std::string>& lines) {
  if (events.empty() || events.front().at("kind") != "session-start") {
    throw CorruptLog("log does not begin with session-start");
  }
  const auto& start = events.front();
  ReplayResult result;
  result.clock = std::make_shared<ResumableClock>();
  result.clock->set(start.at("t").get<double>());
  SessionInputs inputs{start.at("domain").get<std::string>(), start.at("problem").get<std::string>(),
                       start.at("config").get<std::string>()};
  result.session = std::make_shared<Session>(start.at("id").get<std::string>(), std::move(inputs),
                                             SessionOptions{.clock = result.clock});
  auto& s = *result.session;

  auto compare = [&](std::size_t from, std::size_t count) {
    const auto produced = s.log().events();
    const auto produced_lines = s.log().lines();
    for (std::size_t k = 0; k < count; ++k) {
      const auto& orig = events.at(from + k);
      const auto& mine = produced.at(from + k);
      if (orig.at("kind") != mine.at("kind") || orig.value("state", nlohmann::json()) != mine.value("state", nlohmann::json())) {
        throw ReplayMismatch("divergence at seq " + std::to_string(from + k) + ": logged " + orig.at("kind").dump() +
                             ", replayed " + mine.at("kind").dump());
      }
      const std::string& orig_line = from + k < lines.size() ? lines[from + k] : serialize_event(orig);
      if (orig_line != produced_lines.at(from + k)) {
        result.identical_events = false;
        result.differences.push_back("seq " + std::to_string(from + k) + " differs");
      }
    }
  };
  compare(0, 1);

  std::size_t i = 1;
  while (i < events.size()) {
    const auto& e = events[i];
    result.clock->set(e.at("t").get<double>());
    const std::size_t before = s.log().size();
    if (before != i) throw ReplayMismatch("replayed log length drifted at seq " + std::to_string(i));
    try {
      dispatch(s, e);
    } catch (const ReplayMismatch&) {
      throw;
    } catch (const std::exception&) {
      // Failures (stopped, unsolvable, no rule) are part of the recorded
      // behaviour; the emitted events are compared below.
    }
    const std::size_t produced = s.log().size() - before;
    if (produced == 0) throw ReplayMismatch("event at seq " + std::to_string(i) + " produced nothing on replay");
    if (i + produced > events.size()) {
      // The log ends inside a call that emits several events (the process
      // died between two appends). The call was accepted, so it is finished
      // here and the rest of its events are new.
      compare(i, events.size() - i);
      result.completed = i + produced - events.size();
      break;
    }
    compare(i, produced);
    i += produced;
  }
  return result;
}

std::shared_ptr<Session> load_session(const std::string& path, const SessionInputs* fresh, const std::string& fresh_id,
                                      std::vector<std::string>* warnings) {
  auto parsed = read_log_file(path);
  if (warnings) warnings->insert(warnings->end(), parsed.warnings.begin(), parsed.warnings.end());
  if (parsed.events.empty()) {
    if (!fresh) throw CorruptLog("log " + path + " is empty and no session inputs were given");
    if (!parsed.warnings.empty()) std::filesystem::resize_file(path, 0);
    return std::make_shared<Session>(fresh_id, *fresh, SessionOptions{.log_path = path});
  }
  auto result = replay(parsed.events, parsed.lines);
  // Rewrite without the torn tail so appends start on a line boundary, and
  // with the events of a call that was finished on reload.
  if (!parsed.warnings.empty() || result.completed) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& l : result.session->log().lines()) out << l << '\n';
    if (result.completed && warnings) {
      warnings->push_back(path + ": finished an interrupted call (" + std::to_string(result.completed) + " events)");
    }
  }
  result.clock->go_live();
  result.session->log().attach_file(path);
  return result.session;
}

}  // namespace sarplan::exec
