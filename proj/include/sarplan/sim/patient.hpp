#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "sarplan/exec/affect.hpp"
#include "sarplan/exec/config.hpp"
#include "sarplan/exec/observation.hpp"
#include "sarplan/exec/session.hpp"

namespace sarplan::sim {

using exec::AnxietyLevel;

class UnknownAction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Anxiety delta indexed by the current level (low, medium, high).
using LevelDelta = std::array<int, 3>;

/// Dynamics table for the stand-in patient. Deltas are clamped so anxiety
/// stays within {low, medium, high}.
struct PatientModel {
  AnxietyLevel baseline = AnxietyLevel::Medium;
  /// Robot behaviour with a strength argument (an action argument naming a key).
  std::map<std::string, LevelDelta> strength_effect{{"low", {0, -1, 0}}, {"high", {0, -1, -1}}};
  /// Robot behaviour without a strength argument (calming exercises).
  LevelDelta calm_effect{0, -1, -1};
  /// Procedure step -> delta after a step carried out below high anxiety.
  std::map<std::string, int> procedure_stress;
  /// Chance that anxiety rises one level after a behaviour or procedure action.
  double flare_probability = 0.0;
  /// Half-width of the uniform jitter on expression probabilities.
  double signal_noise = 0.03;
  /// World fluent set when a procedure step happens while anxiety is high.
  std::string distress_fluent;
  std::uint64_t seed = 1;
};

PatientModel patient_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PatientModel& m);

struct StepResult {
  exec::ObservationBundle bundle;
  exec::SimulatedSignals signals;
  AnxietyLevel before = AnxietyLevel::Low;
  AnxietyLevel after = AnxietyLevel::Low;
  bool distress = false;  // marker raised by this step
};

/// Seeded patient state. Same model and seed give the same trajectory.
class SimulatedPatient {
 public:
  explicit SimulatedPatient(PatientModel model);

  AnxietyLevel anxiety() const { return anxiety_; }
  bool distressed() const { return distressed_; }
  const PatientModel& model() const { return model_; }

  /// Update anxiety for `request` and produce the world-fluent readings and
  /// signals that follow. Throws UnknownAction when the request names an
  /// action outside `task`.
  StepResult step(const GroundedTask& task, const exec::SessionConfig& config, const exec::ActionRequest& request,
                  const State& state, double now);

  /// Answers for the session's initial queries.
  exec::ObservationBundle initial_answers(const GroundedTask& task, const exec::SessionConfig& config, const State& state,
                                          double now) const;

  /// Signals for the current anxiety level.
  exec::SimulatedSignals signals();

 private:
  static AnxietyLevel shifted(AnxietyLevel a, int delta);

  PatientModel model_;
  AnxietyLevel anxiety_;
  bool distressed_ = false;
  std::mt19937_64 rng_;
};

/// Free-function form of SimulatedPatient::step.
StepResult simulate_step(SimulatedPatient& patient, const GroundedTask& task, const exec::SessionConfig& config,
                         const exec::ActionRequest& request, const State& state, double now = 0.0);

}  // namespace sarplan::sim
