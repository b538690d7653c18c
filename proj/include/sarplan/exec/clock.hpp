#pragma once

#include <atomic>
#include <chrono>

namespace sarplan::exec {

/// Monotonic session time in seconds.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
};

class SteadyClock final : public Clock {
 public:
  SteadyClock() : start_(std::chrono::steady_clock::now()) {}
  double now() const override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Test and simulation clock; only moves when told to.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(double t = 0.0) : t_(t) {}
  double now() const override { return t_.load(); }
  void set(double t) { t_.store(t); }
  void advance(double dt) { t_.store(t_.load() + dt); }

 private:
  std::atomic<double> t_;
};

/// Manual while a log is replayed, then continues in real time from the last
/// replayed instant.
class ResumableClock final : public Clock {
 public:
  double now() const override {
    if (!live_.load()) return manual_.load();
    return manual_.load() + std::chrono::duration<double>(std::chrono::steady_clock::now() - since_).count();
  }
  void set(double t) { manual_.store(t); }
  void go_live() {
    since_ = std::chrono::steady_clock::now();
    live_.store(true);
  }

 private:
  std::atomic<double> manual_{0.0};
  std::atomic<bool> live_{false};
  std::chrono::steady_clock::time_point since_;
};

}  // namespace sarplan::exec
