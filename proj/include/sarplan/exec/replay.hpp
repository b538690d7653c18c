#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sarplan/exec/clock.hpp"
#include "sarplan/exec/session.hpp"

namespace sarplan::exec {

class CorruptLog : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReplayMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParsedLog {
  std::vector<nlohmann::json> events;
  std::vector<std::string> lines;
  std::vector<std::string> warnings;  // e.g. a torn final line that was dropped
};

/// JSONL text -> events. A final line without its newline is dropped with a
/// warning; any other unparseable line, unknown kind or seq gap is CorruptLog.
ParsedLog parse_log(const std::string& text);
ParsedLog read_log_file(const std::string& path);

/// The state trajectory: one {turn, kind, state} entry per event carrying a
/// state, in log order.
std::vector<nlohmann::json> trajectory(const std::vector<nlohmann::json>& events);
std::string trajectory_text(const std::vector<nlohmann::json>& events);

struct ReplayResult {
  std::shared_ptr<Session> session;
  std::shared_ptr<ResumableClock> clock;
  bool identical_events = true;  // every re-emitted line equals the original byte for byte
  std::vector<std::string> differences;
  std::size_t completed = 0;  // events past the end of the log, from a call cut short
};

/// Re-execute a log against a fresh session built from its session-start
/// event. Throws CorruptLog when there is no session-start and
/// ReplayMismatch when the re-execution diverges in kind or state. A log
/// that stops part way through one call's events has that call finished.
ReplayResult replay(const std::vector<nlohmann::json>& events, const std::vector<std::string>& lines = {});

/// Rebuild a session from an append-only log file and keep appending to it.
/// An empty or missing log starts a fresh session from `fresh` (CorruptLog
/// when none is given). Warnings about dropped torn lines go to `warnings`.
std::shared_ptr<Session> load_session(const std::string& path, const SessionInputs* fresh = nullptr,
                                      const std::string& fresh_id = "session",
                                      std::vector<std::string>* warnings = nullptr);

}  // namespace sarplan::exec
