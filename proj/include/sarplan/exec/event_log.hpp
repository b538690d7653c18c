#pragma once

#include <cstddef>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sarplan::exec {

inline constexpr std::string_view kEventKinds[] = {"session-start", "action-request", "observation",
                                                   "outcome-chosen", "reconcile",     "timeout-default",
                                                   "replan",        "stop",           "done"};

bool known_event_kind(std::string_view kind);

/// Append-only event log. Every event is one JSON object with at least
/// {seq, kind, turn, t}. Lines are flushed to the file sink as they are
/// written; subscribers see events in the same order.
class EventLog {
 public:
  using Subscriber = std::function<void(const nlohmann::json& event, const std::string& line)>;

  EventLog() = default;
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  /// Open `path` for appending; later events are written there.
  void attach_file(const std::string& path);
  void subscribe(Subscriber s);

  /// Assigns seq, serializes, stores, writes and fans out. Returns the event.
  const nlohmann::json& append(nlohmann::json event);

  std::size_t size() const;
  std::vector<nlohmann::json> events() const;
  std::vector<std::string> lines() const;
  /// All lines, each terminated by '\n'.
  std::string text() const;

 private:
  mutable std::mutex mu_;
  std::vector<nlohmann::json> events_;
  std::vector<std::string> lines_;
  std::ofstream file_;
  std::vector<Subscriber> subscribers_;
};

std::string serialize_event(const nlohmann::json& event);

}  // namespace sarplan::exec
