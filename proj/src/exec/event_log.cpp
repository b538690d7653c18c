#include "sarplan/exec/event_log.hpp"

#include <algorithm>
#include <stdexcept>

namespace sarplan::exec {

bool known_event_kind(std::string_view kind) {
  return std::find(std::begin(kEventKinds), std::end(kEventKinds), kind) != std::end(kEventKinds);
}

std::string serialize_event(const nlohmann::json& event) { return event.dump(); }

void EventLog::attach_file(const std::string& path) {
  std::lock_guard lock(mu_);
  file_.open(path, std::ios::app | std::ios::binary);
  if (!file_) throw std::runtime_error("cannot open event log " + path);
}

void EventLog::subscribe(Subscriber s) {
  std::lock_guard lock(mu_);
  subscribers_.push_back(std::move(s));
}

const nlohmann::json& EventLog::append(nlohmann::json event) {
  std::lock_guard lock(mu_);
  if (!known_event_kind(event.at("kind").get<std::string>())) {
    throw std::invalid_argument("unknown event kind " + event.at("kind").dump());
  }
  event["seq"] = events_.size();
  auto line = serialize_event(event);
  if (file_.is_open()) {
    file_ << line << '\n';
    file_.flush();
  }
  events_.push_back(std::move(event));
  lines_.push_back(line);
  for (const auto& s : subscribers_) s(events_.back(), lines_.back());
  return events_.back();
}

std::size_t EventLog::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

std::vector<nlohmann::json> EventLog::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::vector<std::string> EventLog::lines() const {
  std::lock_guard lock(mu_);
  return lines_;
}

std::string EventLog::text() const {
  std::lock_guard lock(mu_);
  std::string out;
  for (const auto& l : lines_) {
    out += l;
    out += '\n';
  }
  return out;
}

}  // namespace sarplan::exec
