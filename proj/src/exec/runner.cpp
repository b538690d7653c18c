#include "sarplan/exec/runner.hpp"

#include <algorithm>

namespace sarplan::exec {

namespace {
// Upper bound on one wait so shutdown() is noticed promptly.
constexpr double kPollSeconds = 0.05;
}  // namespace

TurnRunner::TurnRunner(std::shared_ptr<Session> session, Hooks hooks)
    : session_(std::move(session)), hooks_(std::move(hooks)) {}

TurnRunner::~TurnRunner() { shutdown(); }

void TurnRunner::start() {
  if (thread_.joinable()) return;
  running_ = true;
  thread_ = std::thread([this] { loop(); });
}

void TurnRunner::shutdown() {
  exit_ = true;
  join();
}

void TurnRunner::join() {
  if (thread_.joinable()) thread_.join();
}

void TurnRunner::loop() {
  auto& s = *session_;
  std::string reason = "exit";

  // Initial queries get the explicit-query timeout.
  if (s.awaiting_initial()) {
    const double deadline = s.clock().now() + s.config().timeout(ActionGroup::ExplicitQuery).seconds;
    std::size_t seen = s.log().size();
    while (!exit_ && s.awaiting_initial() && s.clock().now() < deadline) {
      seen = s.wait_for_event(seen, std::min(kPollSeconds, deadline - s.clock().now()));
    }
    if (!exit_ && s.awaiting_initial()) {
      try {
        s.apply_initial_default();
      } catch (const WrongPhase&) {
        // answered or stopped concurrently
      }
    }
  }

  while (!exit_) {
    const auto phase = s.phase();
    if (phase == Phase::Done) {
      reason = "done";
      break;
    }
    if (phase == Phase::Stopped) {
      reason = "stopped";
      break;
    }
    try {
      if (phase == Phase::Reconciling) {
        s.reconcile();
      } else if (phase == Phase::AwaitingAction) {
        auto req = s.next_action();
        if (req.terminal) {
          reason = "done";
          break;
        }
        if (hooks_.on_request) hooks_.on_request(req);
      } else {
        const std::size_t seen = s.log().size();
        auto req = s.pending_request();
        if (!req) continue;
        const double remaining = req->deadline - s.clock().now();
        if (remaining < 0) {
          s.handle_timeout();
        } else {
          s.wait_for_event(seen, std::min(kPollSeconds, remaining + 1e-3));
        }
      }
    } catch (const WrongPhase&) {
      // lost a race with an observation or stop; re-read the phase
    } catch (const Stopped&) {
      reason = "stopped";
      break;
    } catch (const std::exception& e) {
      reason = e.what();
      break;
    }
  }
  running_ = false;
  if (hooks_.on_exit) hooks_.on_exit(reason);
}

}  // namespace sarplan::exec
