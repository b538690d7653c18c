#include "sarplan/sim/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace sarplan::sim {

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string text_field(const nlohmann::json& j, const std::string& key, const std::string& base_dir) {
  if (j.contains(key + "_text")) return j.at(key + "_text").get<std::string>();
  if (!j.contains(key)) throw std::invalid_argument("scenario needs \"" + key + "\" or \"" + key + "_text\"");
  std::filesystem::path p = j.at(key).get<std::string>();
  if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
  return slurp(p);
}

std::vector<std::pair<std::string, bool>> readings_of(const nlohmann::json& j) {
  std::vector<std::pair<std::string, bool>> out;
  for (const auto& [k, v] : j.items()) out.emplace_back(k, v.get<bool>());
  return out;
}

exec::ObservationBundle bundle_of(const GroundedTask& task, const exec::SessionConfig& config,
                                  const std::vector<std::pair<std::string, bool>>& readings, double now) {
  exec::ObservationBundle b;
  b.source = exec::Source::Simulator;
  for (const auto& [name, v] : readings) {
    auto f = task.find_fluent(name);
    if (!f) throw ScenarioMismatch("scenario names unknown fluent " + name);
    b.put({*f, v, config.channel(*f), now, exec::Source::Simulator});
  }
  return b;
}

}  // namespace

std::string Transcript::text() const {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir) {
  Scenario s;
  try {
    s.name = j.value("name", std::string("scenario"));
    s.domain_text = text_field(j, "domain", base_dir);
    s.problem_text = text_field(j, "problem", base_dir);
    s.config_text = text_field(j, "config", base_dir);
    if (j.contains("patient")) s.patient = patient_from_json(j.at("patient"));
    s.procedure = j.value("procedure", std::vector<std::string>{});
    s.length = j.value("length", s.length);
    s.turn_seconds = j.value("turn_seconds", s.turn_seconds);
    s.seed = j.value("seed", s.seed);
    if (s.length == 0 || !(s.turn_seconds > 0)) throw std::invalid_argument("scenario length and turn_seconds must be positive");

    std::set<std::size_t> scripted;
    for (const auto& st : j.value("script", nlohmann::json::array())) {
      ScriptStep step;
      step.turn = st.at("turn").get<std::size_t>();
      step.readings = readings_of(st.value("readings", nlohmann::json::object()));
      if (st.contains("anxiety")) {
        auto a = exec::parse_anxiety(st.at("anxiety").get<std::string>());
        if (!a) throw std::invalid_argument("script anxiety must be low, medium or high");
        step.anxiety = *a;
      }
      if (step.turn >= s.length) throw std::invalid_argument("script turn beyond scenario length");
      if (!scripted.insert(step.turn).second) throw std::invalid_argument("script covers a turn twice");
      s.script.push_back(std::move(step));
    }
    for (const auto& fj : j.value("faults", nlohmann::json::array())) {
      Fault f;
      const auto kind = fj.at("kind").get<std::string>();
      if (kind == "drop-channel") {
        f.kind = FaultKind::DropChannel;
        f.channel = fj.value("channel", f.channel);
        if (f.channel != "all" && f.channel != "operator" && f.channel != "sensed") {
          throw std::invalid_argument("drop-channel channel must be all, operator or sensed");
        }
      } else if (kind == "delay") {
        f.kind = FaultKind::Delay;
        f.seconds = fj.at("seconds").get<double>();
        if (!(f.seconds >= 0)) throw std::invalid_argument("delay seconds must be >= 0");
      } else if (kind == "contradict") {
        f.kind = FaultKind::Contradict;
        f.readings = readings_of(fj.at("readings"));
      } else {
        throw std::invalid_argument("unknown fault kind " + kind);
      }
      f.turn = fj.at("turn").get<std::size_t>();
      if (f.turn >= s.length) throw std::invalid_argument("fault turn beyond scenario length");
      s.faults.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed scenario: ") + e.what());
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("scenario " + path + " is not JSON: " + e.what());
  }
  return scenario_from_json(j, std::filesystem::path(path).parent_path().string());
}

ScenarioRun start_scenario(const Scenario& scenario, std::optional<std::uint64_t> seed, const std::string& session_id) {
  (void)seed;
  ScenarioRun run;
  run.clock = std::make_shared<exec::ManualClock>();
  run.session = std::make_shared<exec::Session>(
      session_id, exec::SessionInputs{scenario.domain_text, scenario.problem_text, scenario.config_text},
      exec::SessionOptions{.clock = run.clock});
  return run;
}

Transcript run_scenario(const Scenario& scenario, exec::Session& session, exec::ManualClock& clock,
                        std::optional<std::uint64_t> seed) {
  const auto& task = session.task();
  const auto& config = session.config();

  // Compatibility with the task.
  for (const auto& obj : scenario.procedure) {
    const bool known = std::any_of(task.fluents.begin(), task.fluents.end(), [&](const std::string& f) {
      return f.find(" " + obj + ")") != std::string::npos || f.find(" " + obj + " ") != std::string::npos;
    });
    if (!known) throw ScenarioMismatch("procedure step " + obj + " is not an object of the task");
  }
  for (const auto& st : scenario.script) bundle_of(task, config, st.readings, 0);
  for (const auto& f : scenario.faults) bundle_of(task, config, f.readings, 0);
  if (scenario.patient && !scenario.patient->distress_fluent.empty() &&
      !task.find_fluent(scenario.patient->distress_fluent)) {
    throw ScenarioMismatch("distress fluent " + scenario.patient->distress_fluent + " is not in the task");
  }

  PatientModel model = scenario.patient.value_or(PatientModel{});
  model.seed = seed.value_or(scenario.seed);
  SimulatedPatient patient(model);
  const bool has_patient = scenario.patient.has_value();

  auto fault_at = [&](std::size_t turn, FaultKind kind) -> const Fault* {
    for (const auto& f : scenario.faults) {
      if (f.turn == turn && f.kind == kind) return &f;
    }
    return nullptr;
  };
  auto script_at = [&](std::size_t turn) -> const ScriptStep* {
    for (const auto& s : scenario.script) {
      if (s.turn == turn) return &s;
    }
    return nullptr;
  };

  Transcript out;
  if (session.awaiting_initial()) {
    const auto* drop = fault_at(0, FaultKind::DropChannel);
    if (drop && drop->channel != "sensed") {
      session.apply_initial_default();
    } else {
      session.observe_initial(patient.initial_answers(task, config, session.state(), clock.now()));
    }
  }

  for (std::size_t played = 0;; ++played) {
    const auto phase = session.phase();
    if (phase == exec::Phase::Done || phase == exec::Phase::Stopped) break;
    if (played >= scenario.length) {
      session.stop("scenario-end");
      break;
    }
    exec::ActionRequest req;
    try {
      req = session.next_action();
    } catch (const exec::Stopped&) {
      break;
    } catch (const planner::Unsolvable&) {
      break;
    }
    if (req.terminal) break;

    const std::size_t turn = req.turn;
    clock.advance(scenario.turn_seconds);
    auto step = has_patient ? patient.step(task, config, req, session.state(), clock.now()) : StepResult{};
    step.bundle.source = exec::Source::Simulator;
    if (const auto* sc = script_at(turn)) {
      auto scripted = bundle_of(task, config, sc->readings, clock.now());
      for (const auto& r : scripted.readings) step.bundle.put(r);
      if (sc->anxiety) step.bundle.anxiety = sc->anxiety;
    }
    if (const auto* c = fault_at(turn, FaultKind::Contradict)) {
      for (const auto& r : bundle_of(task, config, c->readings, clock.now()).readings) step.bundle.put(r);
    }

    const auto* drop = fault_at(turn, FaultKind::DropChannel);
    const bool sensed_up = has_patient && !(drop && drop->channel != "operator");
    const bool answers_up = !(drop && drop->channel != "sensed");
    if (sensed_up) {
      const auto estimate = session.estimate_affect(step.signals);
      ++out.estimates;
      if (estimate.anxiety == step.after) ++out.coherent_estimates;
    }

    if (const auto* d = fault_at(turn, FaultKind::Delay)) clock.advance(d->seconds);
    if (answers_up && clock.now() <= req.deadline) {
      session.apply_outcome(step.bundle, turn);
    } else {
      // Nothing arrived in time: the deadline passes and the default applies.
      if (clock.now() <= req.deadline) clock.set(req.deadline + scenario.turn_seconds);
      session.handle_timeout();
      if (answers_up) {
        try {
          session.apply_outcome(step.bundle, turn);  // late answer, rejected
        } catch (const exec::WrongPhase&) {
        }
      }
    }
    if (session.phase() == exec::Phase::Reconciling) {
      try {
        session.reconcile();
      } catch (const exec::NoApplicableRule&) {
        break;
      }
    }
  }

  out.lines = session.log().lines();
  out.final_phase = session.phase();
  out.turns = session.turn();
  out.goal = task.is_goal(session.state());
  return out;
}

Transcript simulate(const Scenario& scenario, std::optional<std::uint64_t> seed) {
  auto run = start_scenario(scenario, seed);
  return run_scenario(scenario, *run.session, *run.clock, seed);
}

}  // namespace sarplan::sim
