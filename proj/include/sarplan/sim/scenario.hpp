#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sarplan/exec/clock.hpp"
#include "sarplan/exec/session.hpp"
#include "sarplan/sim/patient.hpp"

namespace sarplan::sim {

class ScenarioMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FaultKind { DropChannel, Delay, Contradict };

struct Fault {
  FaultKind kind = FaultKind::DropChannel;
  std::size_t turn = 0;
  /// drop-channel: "all", "operator" (answers lost) or "sensed" (signals lost).
  std::string channel = "all";
  double seconds = 0.0;  // delay
  std::vector<std::pair<std::string, bool>> readings;  // contradict
};

struct ScriptStep {
  std::size_t turn = 0;
  std::vector<std::pair<std::string, bool>> readings;
  std::optional<AnxietyLevel> anxiety;
};

struct Scenario {
  std::string name;
  std::string domain_text;
  std::string problem_text;
  std::string config_text;
  std::optional<PatientModel> patient;
  std::vector<ScriptStep> script;         // replaces the patient's readings on its turns
  std::vector<std::string> procedure;     // procedure-step objects the task must declare
  std::vector<Fault> faults;
  std::size_t length = 100;               // turns before the run is cut off
  double turn_seconds = 1.0;              // simulated time per turn
  std::uint64_t seed = 1;
};

/// `base_dir` resolves the "domain", "problem" and "config" file references;
/// inline "domain_text"/"problem_text"/"config_text" take precedence.
/// Throws std::invalid_argument on malformed input.
Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir);
Scenario load_scenario(const std::string& path);

struct ScenarioRun {
  std::shared_ptr<exec::Session> session;
  std::shared_ptr<exec::ManualClock> clock;
};

/// Build the session for a scenario on a simulation clock. `seed` overrides
/// the scenario seed (patient noise).
ScenarioRun start_scenario(const Scenario& scenario, std::optional<std::uint64_t> seed = std::nullopt,
                           const std::string& session_id = "sim");

struct Transcript {
  std::vector<std::string> lines;  // event-log lines
  exec::Phase final_phase = exec::Phase::AwaitingAction;
  std::size_t turns = 0;
  bool goal = false;
  std::size_t coherent_estimates = 0;  // affect estimate equal to the patient's level
  std::size_t estimates = 0;

  std::string text() const;
};

/// Drive `session` turn by turn with the scenario's patient, script and
/// faults. Throws ScenarioMismatch when the scenario does not fit the task.
Transcript run_scenario(const Scenario& scenario, exec::Session& session, exec::ManualClock& clock,
                        std::optional<std::uint64_t> seed = std::nullopt);

/// start_scenario + run_scenario.
Transcript simulate(const Scenario& scenario, std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace sarplan::sim
