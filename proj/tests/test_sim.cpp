#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "sarplan/exec/replay.hpp"
#include "sarplan/sim/scenario.hpp"
#include "support/log_audit.hpp"
#include "support/oracles.hpp"

using namespace sarplan;
using namespace sarplan::exec;
using namespace sarplan::sim;
using sarplan::testing::audit_log;
using sarplan::testing::data_path;
using sarplan::testing::read_file;

namespace {

Session clinic_session() {
  return Session("p",
                 {read_file(data_path("clinic/clinic.pddl")), read_file(data_path("clinic/clinic-p1.pddl")),
                  read_file(data_path("clinic/clinic-config.json"))},
                 SessionOptions{.clock = std::make_shared<ManualClock>()});
}

// Hand-built request for a ground action, independent of the policy.
ActionRequest request_for(const Session& s, const std::string& name) {
  const auto& task = s.task();
  auto id = task.find_action(name);
  REQUIRE(id);
  const auto& a = task.actions[*id];
  ActionRequest r;
  r.action = *id;
  r.name = a.name();
  r.group = a.group;
  std::set<FluentId> world;
  for (const auto& o : a.outcomes) {
    r.outcomes.push_back(o);
    for (const auto& l : o) {
      if (s.config().world(l.fluent)) world.insert(l.fluent);
    }
  }
  r.world_fluents.assign(world.begin(), world.end());
  return r;
}

PatientModel model_at(AnxietyLevel level) {
  PatientModel m;
  m.baseline = level;
  return m;
}

std::vector<nlohmann::json> parse(const Transcript& t) {
  std::vector<nlohmann::json> out;
  for (const auto& l : t.lines) out.push_back(nlohmann::json::parse(l));
  return out;
}

std::vector<std::string> kinds(const Transcript& t) {
  std::vector<std::string> out;
  for (const auto& e : parse(t)) out.push_back(e.at("kind"));
  return out;
}

std::size_t count(const std::vector<std::string>& ks, const std::string& k) { return std::count(ks.begin(), ks.end(), k); }

void check_audit(const Scenario& sc, const Transcript& t) {
  auto s = start_scenario(sc);
  const auto report = audit_log(s.session->task(), s.session->config(), parse(t));
  INFO(report.describe());
  CHECK(report.ok());
  CHECK(report.action_requests == t.turns - (report.stopped ? 0 : 0));
}

}  // namespace

TEST_CASE("high-strength distraction while high drops one level") {
  auto s = clinic_session();
  SimulatedPatient p(model_at(AnxietyLevel::High));
  auto r = p.step(s.task(), s.config(), request_for(s, "(distract-anxious highfive s2 high)"), s.state(), 0);
  CHECK(r.before == AnxietyLevel::High);
  CHECK(r.after == AnxietyLevel::Medium);
  CHECK(p.anxiety() == AnxietyLevel::Medium);
}

TEST_CASE("low-strength distraction leaves high anxiety in place") {
  auto s = clinic_session();
  SimulatedPatient p(model_at(AnxietyLevel::High));
  auto r = p.step(s.task(), s.config(), request_for(s, "(distract-anxious breathing s1 low)"), s.state(), 0);
  CHECK(r.after == AnxietyLevel::High);
}

TEST_CASE("query and observe actions leave anxiety unchanged") {
  auto s = clinic_session();
  for (auto level : {AnxietyLevel::Low, AnxietyLevel::Medium, AnxietyLevel::High}) {
    SimulatedPatient p(model_at(level));
    CHECK(p.step(s.task(), s.config(), request_for(s, "(test-anxiety s1)"), s.state(), 0).after == level);
    CHECK(p.step(s.task(), s.config(), request_for(s, "(observe-engagement)"), s.state(), 0).after == level);
  }
}

TEST_CASE("procedure step while high keeps anxiety high and marks distress") {
  auto s = clinic_session();
  SimulatedPatient p(model_at(AnxietyLevel::High));
  auto r = p.step(s.task(), s.config(), request_for(s, "(perform-step s1 s2)"), s.state(), 0);
  CHECK(r.after == AnxietyLevel::High);
  CHECK(r.distress);
  CHECK(p.distressed());
  // readings report the anxiety as not ok
  REQUIRE(r.bundle.anxiety);
  CHECK(*r.bundle.anxiety == AnxietyLevel::High);
}

TEST_CASE("unknown action is rejected") {
  auto s = clinic_session();
  SimulatedPatient p(PatientModel{});
  auto r = request_for(s, "(test-anxiety s1)");
  r.action = s.task().actions.size() + 3;
  CHECK_THROWS_AS(p.step(s.task(), s.config(), r, s.state(), 0), UnknownAction);
  r = request_for(s, "(test-anxiety s1)");
  r.name = "(dance wildly)";
  CHECK_THROWS_AS(p.step(s.task(), s.config(), r, s.state(), 0), UnknownAction);
}

TEST_CASE("same seed gives the same patient trajectory") {
  auto s = clinic_session();
  PatientModel m;
  m.flare_probability = 0.4;
  m.signal_noise = 0.08;
  auto run = [&](std::uint64_t seed) {
    m.seed = seed;
    SimulatedPatient p(m);
    std::vector<double> trace;
    for (int i = 0; i < 50; ++i) {
      auto r = p.step(s.task(), s.config(), request_for(s, i % 2 ? "(calm-patient s1)" : "(test-anxiety s1)"), s.state(), i);
      trace.push_back(static_cast<double>(r.after));
      trace.insert(trace.end(), r.signals.expression.begin(), r.signals.expression.end());
      trace.push_back(r.signals.head_speed);
    }
    return trace;
  };
  CHECK(run(11) == run(11));
  CHECK(run(11) != run(12));
}

TEST_CASE("signals classify back to the generating level") {
  const AffectThresholds th;
  std::size_t hits = 0, total = 0;
  for (auto level : {AnxietyLevel::Low, AnxietyLevel::Medium, AnxietyLevel::High}) {
    PatientModel m = model_at(level);
    m.signal_noise = 0.05;
    m.seed = 99;
    SimulatedPatient p(m);
    for (int i = 0; i < 1000; ++i) {
      hits += classify_affect(p.signals(), th).anxiety == level;
      ++total;
    }
  }
  CHECK(static_cast<double>(hits) / total >= 0.95);
}

TEST_CASE("patient model json round-trips and rejects bad input") {
  PatientModel m;
  m.procedure_stress = {{"s2", 1}};
  m.flare_probability = 0.25;
  m.distress_fluent = "(engaged)";
  auto back = patient_from_json(to_json(m));
  CHECK(to_json(back) == to_json(m));
  CHECK_THROWS_AS(patient_from_json({{"baseline", "furious"}}), std::invalid_argument);
  CHECK_THROWS_AS(patient_from_json({{"flare_probability", 2.0}}), std::invalid_argument);
}

TEST_CASE("nominal scenario reaches the goal with one request per turn") {
  auto sc = load_scenario(data_path("clinic/scenarios/nominal.json"));
  auto t = simulate(sc);
  CHECK(t.final_phase == Phase::Done);
  CHECK(t.goal);
  const auto ks = kinds(t);
  CHECK(count(ks, "action-request") == t.turns);
  CHECK(count(ks, "timeout-default") == 0);
  CHECK(count(ks, "reconcile") == 0);
  CHECK(t.estimates == t.turns);
  CHECK(t.coherent_estimates == t.estimates);
  check_audit(sc, t);
}

TEST_CASE("dropped channels fall back to timeout defaults") {
  auto sc = load_scenario(data_path("clinic/scenarios/channel-drop.json"));
  auto t = simulate(sc);
  const auto ks = kinds(t);
  CHECK(count(ks, "timeout-default") >= 3);  // initial query, turn 0, turn 2, turn 3 (late)
  CHECK(t.final_phase == Phase::Done);
  check_audit(sc, t);
  // the delayed answer at turn 3 is not applied after its default
  for (const auto& e : parse(t)) {
    if (e.at("kind") == "observation" && e.at("turn") == 3) CHECK_FALSE(e.contains("late"));
  }
}

TEST_CASE("contradicted procedure step is reconciled and the plan repaired") {
  auto sc = load_scenario(data_path("clinic/scenarios/contradiction.json"));
  auto t = simulate(sc);
  const auto events = parse(t);
  const auto ks = kinds(t);
  REQUIRE(count(ks, "reconcile") == 1);
  for (const auto& e : events) {
    if (e.at("kind") == "reconcile") {
      CHECK(e.at("fired") == nlohmann::json::array({"s2-reported-done"}));
    }
  }
  CHECK(count(ks, "replan") >= 1);
  CHECK(t.final_phase == Phase::Done);
  CHECK(t.goal);
  check_audit(sc, t);
}

TEST_CASE("task already at its goal gives a two-event transcript") {
  auto sc = load_scenario(data_path("clinic/scenarios/nominal.json"));
  auto problem = read_file(data_path("clinic/clinic-p1.pddl"));
  problem.replace(problem.find("(procstage s1)"), 14, "(procstage s1) (procdone)");
  sc.problem_text = problem;
  auto t = simulate(sc);
  CHECK(kinds(t) == std::vector<std::string>{"session-start", "observation", "done"});
  CHECK(t.turns == 0);
}

TEST_CASE("scenario that does not fit the task is refused") {
  auto sc = load_scenario(data_path("clinic/scenarios/nominal.json"));
  sc.procedure.push_back("s9");
  CHECK_THROWS_AS(simulate(sc), ScenarioMismatch);

  sc = load_scenario(data_path("clinic/scenarios/nominal.json"));
  sc.faults.push_back({FaultKind::Contradict, 1, "all", 0, {{"(stepdone s7)", true}}});
  CHECK_THROWS_AS(simulate(sc), ScenarioMismatch);
}

TEST_CASE("malformed scenarios are rejected") {
  const std::string dir = data_path("clinic/scenarios");
  nlohmann::json j = nlohmann::json::parse(read_file(dir + "/nominal.json"));
  j["faults"] = {{{"kind", "earthquake"}, {"turn", 1}}};
  CHECK_THROWS_AS(scenario_from_json(j, dir), std::invalid_argument);
  j["faults"] = {{{"kind", "delay"}, {"turn", 1000}, {"seconds", 1}}};
  CHECK_THROWS_AS(scenario_from_json(j, dir), std::invalid_argument);
  j.erase("faults");
  j.erase("domain");
  CHECK_THROWS_AS(scenario_from_json(j, dir), std::invalid_argument);
}

TEST_CASE("simulated transcripts replay identically") {
  for (const char* name : {"nominal", "channel-drop", "contradiction"}) {
    auto sc = load_scenario(data_path(std::string("clinic/scenarios/") + name + ".json"));
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      auto t = simulate(sc, seed);
      auto parsed = parse_log(t.text());
      auto r = replay(parsed.events, parsed.lines);
      INFO(name << " seed " << seed);
      CHECK(r.identical_events);
      CHECK(trajectory_text(trajectory(parsed.events)) == trajectory_text(trajectory(r.session->log().events())));
      CHECK(simulate(sc, seed).text() == t.text());
    }
  }
}
