#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <thread>

#include "sarplan/exec/session.hpp"

namespace sarplan::exec {

/// Drives a session in real time on its own thread: requests actions,
/// waits for observations until each deadline and applies defaults when a
/// deadline passes. Observations arrive from other threads through
/// Session::apply_outcome; the session's critical section orders them.
class TurnRunner {
 public:
  struct Hooks {
    /// Called on the runner thread after each ActionRequest is emitted.
    std::function<void(const ActionRequest&)> on_request;
    /// Called once when the loop exits (done, stopped or failed).
    std::function<void(const std::string& reason)> on_exit;
  };

  TurnRunner(std::shared_ptr<Session> session, Hooks hooks = {});
  ~TurnRunner();
  TurnRunner(const TurnRunner&) = delete;
  TurnRunner& operator=(const TurnRunner&) = delete;

  void start();
  /// Ask the loop to exit without stopping the session, then join.
  void shutdown();
  /// Wait for the loop to finish on its own.
  void join();
  bool running() const { return running_.load(); }

 private:
  void loop();

  std::shared_ptr<Session> session_;
  Hooks hooks_;
  std::thread thread_;
  std::atomic<bool> exit_{false};
  std::atomic<bool> running_{false};
};

}  // namespace sarplan::exec
