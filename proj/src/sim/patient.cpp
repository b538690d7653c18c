#include "sarplan/sim/patient.hpp"

#include <algorithm>

namespace sarplan::sim {

namespace {

using exec::Attention;
using exec::Expression;

std::size_t idx(AnxietyLevel a) { return static_cast<std::size_t>(a); }

// Expression means per anxiety level: happiness, sadness, fear, anger, surprise, neutral.
// Built so classify_affect with the default thresholds lands in the middle
// of each band.
constexpr std::array<std::array<double, exec::kExpressionCount>, 3> kExpression{{
    {0.40, 0.02, 0.03, 0.00, 0.05, 0.50},
    {0.10, 0.10, 0.30, 0.05, 0.10, 0.35},
    {0.05, 0.15, 0.55, 0.05, 0.05, 0.15},
}};
constexpr std::array<double, 3> kHeadSpeed{0.10, 0.40, 0.80};

LevelDelta level_delta(const nlohmann::json& j) {
  LevelDelta d{};
  if (j.is_array()) return j.get<LevelDelta>();
  d[0] = j.value("low", 0);
  d[1] = j.value("medium", 0);
  d[2] = j.value("high", 0);
  return d;
}

nlohmann::json level_delta_json(const LevelDelta& d) { return {{"low", d[0]}, {"medium", d[1]}, {"high", d[2]}}; }

}  // namespace

PatientModel patient_from_json(const nlohmann::json& j) {
  PatientModel m;
  try {
    if (j.contains("baseline")) {
      auto a = exec::parse_anxiety(j.at("baseline").get<std::string>());
      if (!a) throw std::invalid_argument("patient.baseline must be low, medium or high");
      m.baseline = *a;
    }
    if (j.contains("strength_effect")) {
      m.strength_effect.clear();
      for (const auto& [k, v] : j.at("strength_effect").items()) m.strength_effect[k] = level_delta(v);
    }
    if (j.contains("calm_effect")) m.calm_effect = level_delta(j.at("calm_effect"));
    if (j.contains("procedure_stress")) m.procedure_stress = j.at("procedure_stress").get<std::map<std::string, int>>();
    m.flare_probability = j.value("flare_probability", m.flare_probability);
    m.signal_noise = j.value("signal_noise", m.signal_noise);
    m.distress_fluent = j.value("distress_fluent", m.distress_fluent);
    m.seed = j.value("seed", m.seed);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed patient model: ") + e.what());
  }
  if (m.flare_probability < 0 || m.flare_probability > 1 || m.signal_noise < 0) {
    throw std::invalid_argument("patient flare_probability must be in [0,1] and signal_noise >= 0");
  }
  return m;
}

nlohmann::json to_json(const PatientModel& m) {
  nlohmann::json strengths = nlohmann::json::object();
  for (const auto& [k, v] : m.strength_effect) strengths[k] = level_delta_json(v);
  return {{"baseline", std::string(exec::to_string(m.baseline))},
          {"strength_effect", strengths},
          {"calm_effect", level_delta_json(m.calm_effect)},
          {"procedure_stress", m.procedure_stress},
          {"flare_probability", m.flare_probability},
          {"signal_noise", m.signal_noise},
          {"distress_fluent", m.distress_fluent},
          {"seed", m.seed}};
}

SimulatedPatient::SimulatedPatient(PatientModel model)
    : model_(std::move(model)), anxiety_(model_.baseline), rng_(model_.seed) {}

AnxietyLevel SimulatedPatient::shifted(AnxietyLevel a, int delta) {
  return static_cast<AnxietyLevel>(std::clamp(static_cast<int>(a) + delta, 0, 2));
}

exec::SimulatedSignals SimulatedPatient::signals() {
  std::uniform_real_distribution<double> jitter(-model_.signal_noise, model_.signal_noise);
  exec::SimulatedSignals s;
  double total = 0;
  for (std::size_t i = 0; i < exec::kExpressionCount; ++i) {
    s.expression[i] = std::max(0.0, kExpression[idx(anxiety_)][i] + jitter(rng_));
    total += s.expression[i];
  }
  for (auto& p : s.expression) p /= total;
  s.head_speed = std::max(0.0, kHeadSpeed[idx(anxiety_)] + jitter(rng_));
  s.attention = anxiety_ == AnxietyLevel::High ? Attention::Away : Attention::OnRobot;
  return s;
}

exec::ObservationBundle SimulatedPatient::initial_answers(const GroundedTask& task, const exec::SessionConfig& config,
                                                         const State& state, double now) const {
  exec::ObservationBundle b;
  b.source = exec::Source::Simulator;
  for (auto f : config.initial_queries) {
    bool v = state.get(f);
    if (exec::predicate_of(task.fluents[f]) == config.anxiety_predicate) {
      v = exec::anxiety_ok(anxiety_);
      b.anxiety = anxiety_;
    } else if (config.engagement_fluent == f) {
      v = anxiety_ != AnxietyLevel::High;
    }
    b.put({f, v, config.channel(f), now, exec::Source::Simulator});
  }
  return b;
}

StepResult SimulatedPatient::step(const GroundedTask& task, const exec::SessionConfig& config,
                                  const exec::ActionRequest& request, const State& state, double now) {
  if (request.terminal || request.action >= task.actions.size()) {
    throw UnknownAction("action " + request.name + " is not part of the task");
  }
  const auto& action = task.actions[request.action];
  if (action.name() != request.name) throw UnknownAction("action " + request.name + " does not match the task");

  StepResult out;
  out.before = anxiety_;
  bool active = false;
  switch (action.group) {
    case ActionGroup::RobotBehaviour: {
      active = true;
      const LevelDelta* table = &model_.calm_effect;
      for (const auto& arg : action.args) {
        auto it = model_.strength_effect.find(arg);
        if (it != model_.strength_effect.end()) table = &it->second;
      }
      anxiety_ = shifted(anxiety_, (*table)[idx(anxiety_)]);
      break;
    }
    case ActionGroup::ProcedureUpdate: {
      active = true;
      if (anxiety_ == AnxietyLevel::High) {
        distressed_ = true;
        out.distress = true;
      } else {
        for (const auto& arg : action.args) {
          auto it = model_.procedure_stress.find(arg);
          if (it != model_.procedure_stress.end()) {
            anxiety_ = shifted(anxiety_, it->second);
            break;
          }
        }
      }
      break;
    }
    case ActionGroup::ExplicitQuery:
    case ActionGroup::ImplicitSignal:
      break;  // asking or watching leaves the patient as they are
  }
  // The draw happens every step so the random stream does not depend on the action mix.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool flare = unit(rng_) < model_.flare_probability;
  if (active && flare && !out.distress) anxiety_ = shifted(anxiety_, +1);
  out.after = anxiety_;

  out.bundle.source = exec::Source::Simulator;
  out.bundle.anxiety = anxiety_;
  const auto expected = state.applied(request.outcomes.front());
  for (auto f : request.world_fluents) {
    bool v = expected.get(f);
    if (exec::predicate_of(task.fluents[f]) == config.anxiety_predicate) {
      v = exec::anxiety_ok(anxiety_);
    } else if (config.engagement_fluent == f) {
      v = anxiety_ != AnxietyLevel::High;
    }
    out.bundle.put({f, v, config.channel(f), now, exec::Source::Simulator});
  }
  if (out.distress && !model_.distress_fluent.empty()) {
    auto f = task.find_fluent(model_.distress_fluent);
    if (f && config.world(*f)) out.bundle.put({*f, true, config.channel(*f), now, exec::Source::Simulator});
  }
  out.signals = signals();
  return out;
}

StepResult simulate_step(SimulatedPatient& patient, const GroundedTask& task, const exec::SessionConfig& config,
                         const exec::ActionRequest& request, const State& state, double now) {
  return patient.step(task, config, request, state, now);
}

}  // namespace sarplan::sim
