#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "sarplan/exec/replay.hpp"
#include "sarplan/exec/runner.hpp"
#include "sarplan/exec/session.hpp"
#include "support/log_audit.hpp"
#include "support/oracles.hpp"

using namespace sarplan;
using namespace sarplan::exec;
using sarplan::testing::audit_log;
using sarplan::testing::data_path;
using sarplan::testing::read_file;

namespace {

nlohmann::json clinic_config_json() { return nlohmann::json::parse(read_file(data_path("clinic/clinic-config.json"))); }

SessionInputs clinic_inputs(const nlohmann::json& cfg) {
  return {read_file(data_path("clinic/clinic.pddl")), read_file(data_path("clinic/clinic-p1.pddl")), cfg.dump()};
}

struct Fixture {
  std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>();
  std::shared_ptr<Session> session;

  explicit Fixture(nlohmann::json cfg = clinic_config_json(), std::string log_path = {}) {
    session = std::make_shared<Session>("t", clinic_inputs(cfg), SessionOptions{.clock = clock, .log_path = log_path});
  }
  FluentId fluent(const std::string& name) const { return *session->task().find_fluent(name); }
  ObservationBundle bundle(std::initializer_list<std::pair<const char*, bool>> readings,
                           std::optional<AnxietyLevel> anxiety = std::nullopt) const {
    ObservationBundle b;
    for (const auto& [name, v] : readings) b.put({fluent(name), v, Channel::Operator, clock->now(), Source::Operator});
    b.anxiety = anxiety;
    return b;
  }
};

// Answer every world fluent of a request with the first outcome's prediction.
ObservationBundle expected_answer(const Session& s, const ActionRequest& r, std::size_t outcome = 0) {
  ObservationBundle b;
  const auto predicted = s.state().applied(r.outcomes.at(outcome));
  for (auto f : r.world_fluents) b.put({f, predicted.get(f), Channel::Operator, 0.0, Source::Operator});
  return b;
}

std::size_t count_kind(const std::vector<nlohmann::json>& events, const std::string& kind) {
  return std::count_if(events.begin(), events.end(), [&](const auto& e) { return e.at("kind") == kind; });
}

std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "sarplan-test-exec";
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::filesystem::remove(p);
  return p.string();
}

}  // namespace

TEST_CASE("bundled clinic config resolves with operator anxiety and step channels") {
  Fixture fx;
  const auto& cfg = fx.session->config();
  CHECK(cfg.channel(fx.fluent("(okanxiety s1)")) == Channel::Operator);
  CHECK(cfg.channel(fx.fluent("(stepdone s3)")) == Channel::Operator);
  CHECK(cfg.channel(fx.fluent("(engaged)")) == Channel::Sensed);
  CHECK(cfg.channel(fx.fluent("(procstage s1)")) == Channel::Modelled);
  CHECK(cfg.rules.front().priority > cfg.rules.back().priority);
  CHECK(cfg.max_timeout() == doctest::Approx(60.0));
  CHECK(cfg.prompt_kind("(okanxiety s2)") == PromptKind::Anxiety);
  CHECK(cfg.prompt_kind("(stepdone s2)") == PromptKind::Confirm);
}

TEST_CASE("config errors are BadConfig") {
  const auto task = load_task(read_file(data_path("clinic/clinic.pddl")), read_file(data_path("clinic/clinic-p1.pddl")));
  auto base = clinic_config_json();

  SUBCASE("unlabelled fluent") {
    auto c = base;
    c["channels"].erase("default");
    CHECK_THROWS_AS(resolve_config(task, c), BadConfig);
  }
  SUBCASE("missing timeout entry") {
    auto c = base;
    c["timeouts"].erase("implicit-signal");
    CHECK_THROWS_AS(resolve_config(task, c), BadConfig);
  }
  SUBCASE("non-positive duration") {
    auto c = base;
    c["timeouts"]["robot-behaviour"]["seconds"] = 0;
    CHECK_THROWS_AS(resolve_config(task, c), BadConfig);
  }
  SUBCASE("rule fixing a world fluent") {
    auto c = base;
    c["rules"][0]["fixups"] = {{"(stepdone s1)", true}};
    CHECK_THROWS_AS(resolve_config(task, c), BadConfig);
  }
  SUBCASE("rule guarding a modelled fluent") {
    auto c = base;
    c["rules"][0]["guard"] = {{"(procstage s1)", true}};
    CHECK_THROWS_AS(resolve_config(task, c), BadConfig);
  }
  SUBCASE("duplicate priority") {
    auto c = base;
    c["rules"][1]["priority"] = c["rules"][0]["priority"];
    CHECK_THROWS_AS(resolve_config(task, c), BadConfig);
  }
  SUBCASE("unknown fluent and bad default value") {
    auto c = base;
    c["initial_queries"] = {"(nosuch)"};
    CHECK_THROWS_AS(resolve_config(task, c), BadConfig);
    c = base;
    c["timeouts"]["explicit-query"]["defaults"][0]["value"] = "sometimes";
    CHECK_THROWS_AS(resolve_config(task, c), BadConfig);
  }
  SUBCASE("malformed text") { CHECK_THROWS_AS(load_config(task, "{not json"), BadConfig); }
}

TEST_CASE("start_session emits session-start and waits for the initial anxiety query") {
  Fixture fx;
  auto& s = *fx.session;
  CHECK(s.phase() == Phase::AwaitingAction);
  CHECK(s.turn() == 0);
  CHECK(s.awaiting_initial());
  const auto events = s.log().events();
  REQUIRE(events.size() == 1);
  CHECK(events[0]["kind"] == "session-start");
  CHECK(events[0]["initial_queries"] == nlohmann::json::array({"(okanxiety s1)"}));
  CHECK(events[0]["class"] == "strong-cyclic");
}

TEST_CASE("all-modelled config runs autonomously to done") {
  auto cfg = clinic_config_json();
  cfg["channels"] = {{"default", "modelled"}};
  cfg["rules"] = nlohmann::json::array();
  cfg.erase("initial_queries");
  Fixture fx(cfg);
  auto& s = *fx.session;
  CHECK_FALSE(s.awaiting_initial());
  for (int i = 0; i < 100 && s.phase() != Phase::Done; ++i) {
    auto r = s.next_action();
    if (r.terminal) break;
    CHECK(r.world_fluents.empty());
    auto res = s.apply_outcome(ObservationBundle{});
    CHECK(res.outcome == 0);
    CHECK(res.consistent);
  }
  CHECK(s.phase() == Phase::Done);
  CHECK(s.request_count() == s.turn());
  auto rep = audit_log(s.task(), s.config(), s.log().events());
  CHECK_MESSAGE(rep.ok(), rep.describe());
  CHECK(rep.done);
}

TEST_CASE("test-anxiety outcome selection follows the observed reading") {
  Fixture fx;
  auto& s = *fx.session;
  s.apply_initial_default();
  auto r = s.next_action();
  REQUIRE_FALSE(r.terminal);
  CHECK(r.name == "(test-anxiety s1)");
  CHECK(r.group == ActionGroup::ExplicitQuery);
  CHECK(r.outcome_count() == 2);
  CHECK(r.world_fluents == std::vector<FluentId>{fx.fluent("(okanxiety s1)")});
  CHECK(r.deadline == doctest::Approx(30.0));

  auto res = s.apply_outcome(fx.bundle({{"(okanxiety s1)", false}}, AnxietyLevel::High), r.turn);
  CHECK(res.outcome == 1);
  CHECK(res.scores == std::vector<std::size_t>{0, 1});
  CHECK(res.consistent);
  CHECK(s.turn() == 1);
  CHECK(s.affect().anxiety == AnxietyLevel::High);
  CHECK(s.state().get(fx.fluent("(anxietytested s1)")));
  CHECK_FALSE(s.state().get(fx.fluent("(okanxiety s1)")));

  // high anxiety before the procedure: strength-matched distraction
  auto r2 = s.next_action();
  CHECK(r2.name == "(distract-anxious breathing s1 low)");
  CHECK(r2.group == ActionGroup::RobotBehaviour);

  // deterministic action, empty bundle: outcome 0 with vacuous score 0
  auto res2 = s.apply_outcome(ObservationBundle{}, r2.turn);
  CHECK(res2.outcome == 0);
  CHECK(res2.scores == std::vector<std::size_t>{0});
  CHECK(res2.consistent);
}

TEST_CASE("outcome choice is invariant under duplicating and reordering outcomes") {
  // Checked wherever the best-scoring effect set is unique; remaining ties
  // are settled by index only.
  std::mt19937_64 rng(11);
  std::size_t checked = 0;
  for (int iter = 0; iter < 2000; ++iter) {
    const std::size_t nf = 6;
    State cur(nf);
    for (FluentId f = 0; f < nf; ++f) cur.set(f, rng() & 1);
    std::vector<std::vector<FluentLiteral>> outs(2 + rng() % 3);
    for (auto& o : outs) {
      for (FluentId f = 0; f < nf; ++f) {
        if (rng() % 3 == 0) o.push_back({f, static_cast<bool>(rng() & 1)});
      }
    }
    ObservationBundle obs;
    for (FluentId f = 0; f < nf; ++f) {
      if (rng() % 2) obs.put({f, static_cast<bool>(rng() & 1), Channel::Operator, 0, Source::Operator});
    }
    const auto base = choose_outcome(cur, outs, obs, 1);
    const auto best = base.scores[base.outcome];
    std::set<std::vector<FluentLiteral>> top;
    for (std::size_t i = 0; i < outs.size(); ++i) {
      if (base.scores[i] == best) top.insert(outs[i]);
    }
    if (top.size() != 1) continue;
    ++checked;
    auto permuted = outs;
    permuted.push_back(outs[rng() % outs.size()]);
    std::shuffle(permuted.begin(), permuted.end(), rng);
    const auto other = choose_outcome(cur, permuted, obs, 1);
    CHECK(permuted[other.outcome] == outs[base.outcome]);
    CHECK(other.consistent == base.consistent);
  }
  CHECK(checked > 500);
}

TEST_CASE("inconsistent observation goes through reconcile and replan to done") {
  Fixture fx;
  auto& s = *fx.session;
  s.apply_initial_default();
  auto r = s.next_action();  // test-anxiety s1
  s.apply_outcome(fx.bundle({{"(okanxiety s1)", true}}), r.turn);
  r = s.next_action();
  CHECK(r.name == "(do-activity breathing s1 low)");
  // Operator says step s2 is already done: no outcome predicts that.
  auto res = s.apply_outcome(fx.bundle({{"(stepdone s2)", true}}), r.turn);
  CHECK_FALSE(res.consistent);
  CHECK(res.phase == Phase::Reconciling);
  CHECK(s.turn() == 1);  // not closed yet
  CHECK_THROWS_AS(s.next_action(), WrongPhase);

  auto st = s.reconcile();
  CHECK(s.turn() == 2);
  CHECK(st.get(fx.fluent("(procstage s3)")));
  CHECK_FALSE(st.get(fx.fluent("(procstage s1)")));
  CHECK(st.get(fx.fluent("(done breathing)")));  // modelled effect of the executed action
  const auto events = s.log().events();
  CHECK(events.back()["kind"] == "reconcile");
  CHECK(events.back()["fired"] == nlohmann::json::array({"s2-reported-done"}));

  for (int i = 0; i < 50; ++i) {
    auto q = s.next_action();
    if (q.terminal) break;
    s.apply_outcome(expected_answer(s, q), q.turn);
  }
  CHECK(s.phase() == Phase::Done);
  auto rep = audit_log(s.task(), s.config(), s.log().events());
  CHECK_MESSAGE(rep.ok(), rep.describe());
  CHECK(rep.replans >= 1);
  CHECK(rep.reconciles == 1);
}

TEST_CASE("reconcile is the identity when no reading was contradicted") {
  auto cfg = clinic_config_json();
  cfg["consistency_threshold"] = 2;
  Fixture fx(cfg);
  auto& s = *fx.session;
  s.apply_initial_default();
  auto r = s.next_action();
  s.apply_outcome(fx.bundle({{"(okanxiety s1)", true}}), r.turn);
  CHECK(s.phase() == Phase::Reconciling);
  auto before = s.state();
  auto after = s.reconcile();
  auto expected = before;
  expected.set(fx.fluent("(anxietytested s1)"), true);
  expected.set(fx.fluent("(okanxiety s1)"), true);
  CHECK(after == expected);
  CHECK(s.log().events().back()["fired"].empty());
}

TEST_CASE("contradiction without a matching rule halts safely") {
  auto cfg = clinic_config_json();
  cfg["rules"] = nlohmann::json::array();
  Fixture fx(cfg);
  auto& s = *fx.session;
  s.apply_initial_default();
  auto r = s.next_action();
  s.apply_outcome(fx.bundle({{"(okanxiety s1)", true}}), r.turn);
  r = s.next_action();
  s.apply_outcome(fx.bundle({{"(stepdone s1)", true}}), r.turn);
  CHECK_THROWS_AS(s.reconcile(), NoApplicableRule);
  CHECK(s.phase() == Phase::Stopped);
  CHECK(s.stop_reason() == "no-applicable-rule");
  CHECK(s.turn() == s.request_count());
  CHECK_THROWS_AS(s.next_action(), Stopped);
}

TEST_CASE("timeouts apply the configured default observation") {
  Fixture fx;
  auto& s = *fx.session;
  s.apply_initial_default();
  auto r = s.next_action();
  CHECK_FALSE(s.handle_timeout().has_value());  // not expired
  fx.clock->advance(29.0);
  CHECK_FALSE(s.handle_timeout().has_value());
  fx.clock->advance(1.5);
  auto b = s.handle_timeout();
  REQUIRE(b.has_value());
  CHECK(b->source == Source::Default);
  REQUIRE(b->readings.size() == 1);
  CHECK(b->readings[0].fluent == fx.fluent("(okanxiety s1)"));
  CHECK(b->readings[0].value);  // anxiety unchanged: low -> ok
  CHECK(s.turn() == 1);
  CHECK(s.state().get(fx.fluent("(okanxiety s1)")));

  auto r2 = s.next_action();
  CHECK(r2.group == ActionGroup::RobotBehaviour);
  CHECK(s.default_observation(r2).empty());  // "behaviour completed"
  fx.clock->advance(25.0);
  REQUIRE(s.handle_timeout().has_value());
  CHECK(s.phase() == Phase::AwaitingAction);
  (void)r;
}

TEST_CASE("procedure-update default confirms the expected step") {
  Fixture fx;
  auto& s = *fx.session;
  s.apply_initial_default();
  for (int i = 0; i < 10; ++i) {
    auto r = s.next_action();
    if (r.group == ActionGroup::ProcedureUpdate) {
      auto d = s.default_observation(r);
      REQUIRE(d.readings.size() == 1);
      CHECK(s.task().fluents[d.readings[0].fluent] == "(stepdone s1)");
      CHECK(d.readings[0].value);
      return;
    }
    s.apply_outcome(expected_answer(s, r), r.turn);
  }
  FAIL("no procedure-update action within 10 turns");
}

TEST_CASE("stop semantics") {
  SUBCASE("during awaiting-observation") {
    Fixture fx;
    auto& s = *fx.session;
    auto r = s.next_action();
    CHECK(s.stop());
    CHECK(s.phase() == Phase::Stopped);
    CHECK(s.turn() == 1);
    CHECK(s.request_count() == 1);
    CHECK_THROWS_AS(s.next_action(), Stopped);
    CHECK_THROWS_AS(s.apply_outcome(ObservationBundle{}, r.turn), WrongPhase);
    fx.clock->advance(100);
    CHECK_FALSE(s.handle_timeout().has_value());  // deadline cancelled
    CHECK_FALSE(s.stop());                        // idempotent
    CHECK(count_kind(s.log().events(), "stop") == 1);
  }
  SUBCASE("after done") {
    auto cfg = clinic_config_json();
    cfg["channels"] = {{"default", "modelled"}};
    cfg["rules"] = nlohmann::json::array();
    cfg["initial_queries"] = nlohmann::json::array();
    Fixture fx(cfg);
    auto& s = *fx.session;
    while (!s.next_action().terminal) s.apply_outcome(ObservationBundle{});
    const auto n = s.log().size();
    CHECK_FALSE(s.stop());
    CHECK(s.phase() == Phase::Done);
    CHECK(s.log().size() == n);
    CHECK(s.next_action().terminal);
    CHECK(s.log().size() == n);
  }
}

TEST_CASE("stale turn keys and modelled readings are rejected") {
  Fixture fx;
  auto& s = *fx.session;
  auto r = s.next_action();
  CHECK_THROWS_AS(s.apply_outcome(ObservationBundle{}, r.turn + 1), WrongPhase);
  ObservationBundle bad;
  bad.put({fx.fluent("(procstage s1)"), true, Channel::Operator, 0, Source::Operator});
  CHECK_THROWS_AS(s.apply_outcome(bad, r.turn), UnknownFluent);
  ObservationBundle out_of_range;
  out_of_range.put({9999, true, Channel::Operator, 0, Source::Operator});
  CHECK_THROWS_AS(s.apply_outcome(out_of_range, r.turn), UnknownFluent);
  CHECK(s.phase() == Phase::AwaitingObservation);
}

TEST_CASE("estimate_affect maps signals through the threshold table") {
  Fixture fx;
  auto& s = *fx.session;

  SimulatedSignals fearful;
  fearful.expression = {0.05, 0.1, 0.7, 0.05, 0.05, 0.05};
  fearful.attention = Attention::Away;
  fearful.head_speed = 0.9;
  auto a = s.estimate_affect(fearful);
  CHECK(a.anxiety == AnxietyLevel::High);
  CHECK(a.engagement == Engagement::Low);

  SimulatedSignals calm;
  calm.expression = {0.1, 0.0, 0.0, 0.0, 0.0, 0.9};
  calm.attention = Attention::OnRobot;
  calm.head_speed = 0.05;
  a = s.estimate_affect(calm);
  CHECK(a.anxiety == AnxietyLevel::Low);
  CHECK(a.engagement == Engagement::High);

  a = s.estimate_affect(SimulatedSignals{});
  CHECK(a == AffectiveState{});

  // While test-anxiety waits, the estimate fills the expected anxiety fluent.
  s.apply_initial_default();
  auto r = s.next_action();
  s.estimate_affect(fearful);
  auto res = s.apply_outcome(ObservationBundle{}, r.turn);
  CHECK(res.outcome == 1);
  // operator input outranks the sensed estimate
  r = s.next_action();
  CHECK(r.name == "(distract-anxious breathing s1 low)");
}

TEST_CASE("operator readings win over sensed ones for the same fluent") {
  ObservationBundle b;
  b.put({3, false, Channel::Sensed, 0, Source::Simulator});
  b.put({3, true, Channel::Operator, 0, Source::Operator});
  b.put({3, false, Channel::Sensed, 0, Source::Simulator});
  b.put({4, true, Channel::Operator, 0, Source::Default});
  b.put({4, false, Channel::Operator, 0, Source::Simulator});
  REQUIRE(b.readings.size() == 2);
  CHECK(b.find(3)->value);
  CHECK_FALSE(b.find(4)->value);
}

TEST_CASE("turn limit stops the session") {
  auto cfg = clinic_config_json();
  cfg["max_turns"] = 2;
  Fixture fx(cfg);
  auto& s = *fx.session;
  for (int i = 0; i < 2; ++i) {
    auto r = s.next_action();
    s.apply_outcome(expected_answer(s, r), r.turn);
  }
  CHECK_THROWS_AS(s.next_action(), Stopped);
  CHECK(s.stop_reason() == "turn-limit");
  CHECK(s.turn() == s.request_count());
}

TEST_CASE("stop racing apply_outcome keeps turns monotone and requests equal to turns") {
  for (int iter = 0; iter < 1000; ++iter) {
    auto cfg = clinic_config_json();
    Fixture fx(cfg);
    auto& s = *fx.session;
    auto r = s.next_action();
    const auto before = s.turn();
    std::atomic<bool> go{false};
    std::atomic<int> applied{0};
    std::thread a([&] {
      while (!go) {
      }
      try {
        s.apply_outcome(expected_answer(s, r), r.turn);
        ++applied;
      } catch (const WrongPhase&) {
      }
    });
    std::thread b([&] {
      while (!go) {
      }
      s.stop();
    });
    go = true;
    a.join();
    b.join();
    CHECK(s.turn() == before + 1);
    CHECK(s.phase() == Phase::Stopped);
    CHECK(s.request_count() == s.turn());
    CHECK_THROWS_AS(s.next_action(), Stopped);
    auto rep = audit_log(s.task(), s.config(), s.log().events());
    CHECK_MESSAGE(rep.ok(), rep.describe());
  }
}

TEST_CASE("replaying a log reproduces the trajectory byte for byte") {
  std::mt19937_64 rng(5);
  for (int run = 0; run < 5; ++run) {
    Fixture fx;
    auto& s = *fx.session;
    if (rng() % 2) {
      s.observe_initial(fx.bundle({{"(okanxiety s1)", static_cast<bool>(rng() & 1)}}));
    }
    for (int i = 0; i < 60; ++i) {
      fx.clock->advance(1.0);
      ActionRequest r;
      try {
        r = s.next_action();
      } catch (const Stopped&) {
        break;
      }
      if (r.terminal) break;
      if (rng() % 4 == 0) {
        fx.clock->advance(100.0);
        s.handle_timeout();
      } else {
        SimulatedSignals sig;
        sig.expression[rng() % 6] = 1.0;
        sig.head_speed = (rng() % 10) / 10.0;
        s.estimate_affect(sig);
        s.apply_outcome(expected_answer(s, r, rng() % r.outcome_count()), r.turn);
      }
      if (s.phase() == Phase::Reconciling) s.reconcile();
    }
    const auto events = s.log().events();
    auto result = replay(events, s.log().lines());
    CHECK(result.identical_events);
    CHECK(trajectory_text(result.session->log().events()) == trajectory_text(events));
    CHECK(result.session->state() == s.state());
    CHECK(result.session->turn() == s.turn());
    CHECK(result.session->phase() == s.phase());
  }
}

TEST_CASE("log parsing tolerates a torn tail only") {
  Fixture fx;
  auto& s = *fx.session;
  auto r = s.next_action();
  s.apply_outcome(expected_answer(s, r), r.turn);
  const auto text = s.log().text();

  auto whole = parse_log(text);
  CHECK(whole.events.size() == s.log().size());
  CHECK(whole.warnings.empty());

  auto torn = parse_log(text + "{\"kind\":\"obser");
  CHECK(torn.events.size() == s.log().size());
  CHECK(torn.warnings.size() == 1);

  auto lines = s.log().lines();
  std::string corrupt = lines[0] + "\n" + "garbage\n" + lines[1] + "\n";
  CHECK_THROWS_AS(parse_log(corrupt), CorruptLog);
  std::string gap = lines[0] + "\n" + lines[2] + "\n";
  CHECK_THROWS_AS(parse_log(gap), CorruptLog);
  CHECK_THROWS_AS(replay({}), CorruptLog);
}

TEST_CASE("crash recovery reloads the session from its append-only log") {
  const auto path = temp_path("recover.jsonl");
  State mid;
  std::size_t mid_turn = 0;
  {
    Fixture fx(clinic_config_json(), path);
    auto& s = *fx.session;
    s.apply_initial_default();
    for (int i = 0; i < 4; ++i) {
      auto r = s.next_action();
      s.apply_outcome(expected_answer(s, r), r.turn);
    }
    s.next_action();  // leave a turn open, then "crash"
    mid = s.state();
    mid_turn = s.turn();
  }
  {
    std::ofstream torn(path, std::ios::app);
    torn << "{\"kind\":\"observ";
  }
  std::vector<std::string> warnings;
  auto s = load_session(path, nullptr, "x", &warnings);
  CHECK(warnings.size() == 1);
  CHECK(s->state() == mid);
  CHECK(s->turn() == mid_turn);
  CHECK(s->phase() == Phase::AwaitingObservation);
  auto r = s->pending_request();
  REQUIRE(r.has_value());
  s->apply_outcome(expected_answer(*s, *r), r->turn);
  for (int i = 0; i < 50; ++i) {
    auto q = s->next_action();
    if (q.terminal) break;
    s->apply_outcome(expected_answer(*s, q), q.turn);
  }
  CHECK(s->phase() == Phase::Done);

  // The file now holds the whole session and replays cleanly.
  auto parsed = read_log_file(path);
  CHECK(parsed.warnings.empty());
  auto again = replay(parsed.events, parsed.lines);
  CHECK(again.session->phase() == Phase::Done);
  auto rep = audit_log(again.session->task(), again.session->config(), parsed.events);
  CHECK_MESSAGE(rep.ok(), rep.describe());

  // empty log: fresh session at turn 0
  const auto empty = temp_path("empty.jsonl");
  { std::ofstream touch(empty); }
  CHECK_THROWS_AS(load_session(empty), CorruptLog);
  auto inputs = clinic_inputs(clinic_config_json());
  auto fresh = load_session(empty, &inputs, "fresh");
  CHECK(fresh->turn() == 0);
  CHECK(fresh->phase() == Phase::AwaitingAction);
  CHECK(read_log_file(empty).events.size() == 1);
}

TEST_CASE("a crash between the answer and its outcome finishes the turn on reload") {
  const auto path = temp_path("interrupted.jsonl");
  std::vector<std::string> full;
  {
    Fixture fx(clinic_config_json(), path);
    auto& s = *fx.session;
    s.apply_initial_default();
    auto r = s.next_action();
    s.apply_outcome(expected_answer(s, r), r.turn);
    full = s.log().lines();
  }
  REQUIRE(nlohmann::json::parse(full.back()).at("kind") == "outcome-chosen");
  {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    for (std::size_t i = 0; i + 1 < full.size(); ++i) out << full[i] << '\n';
  }
  std::vector<std::string> warnings;
  auto s = load_session(path, nullptr, "x", &warnings);
  CHECK(warnings.size() == 1);
  CHECK(s->log().lines() == full);
  CHECK(read_log_file(path).lines == full);
  CHECK(s->phase() == Phase::AwaitingAction);
}

TEST_CASE("runner reaches done on timeout defaults with every channel silent") {
  auto cfg = clinic_config_json();
  for (auto& [group, entry] : cfg["timeouts"].items()) entry["seconds"] = 0.01;
  auto session = std::make_shared<Session>("silent", clinic_inputs(cfg));
  std::atomic<int> requests{0};
  TurnRunner runner(session, {.on_request = [&](const ActionRequest&) { ++requests; }});
  const auto t0 = std::chrono::steady_clock::now();
  runner.start();
  runner.join();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(session->phase() == Phase::Done);
  const double bound = static_cast<double>(session->turn() + 1) * session->config().max_timeout() + 1.0;
  CHECK(elapsed < bound);
  CHECK(requests == static_cast<int>(session->turn()));
  auto rep = audit_log(session->task(), session->config(), session->log().events());
  CHECK_MESSAGE(rep.ok(), rep.describe());
  CHECK(rep.timeout_defaults == session->turn() + 1);  // + the initial query
}

TEST_CASE("runner applies observations from other threads and honours stop") {
  auto cfg = clinic_config_json();
  cfg["initial_queries"] = nlohmann::json::array();
  auto session = std::make_shared<Session>("live", clinic_inputs(cfg));
  std::atomic<int> answered{0};
  std::vector<std::thread> operators;  // only touched on the runner thread
  TurnRunner runner(session, {.on_request = [&](const ActionRequest& r) {
                                operators.emplace_back([session, r, &answered] {
                                  try {
                                    session->apply_outcome(expected_answer(*session, r), r.turn);
                                    ++answered;
                                  } catch (const std::exception&) {
                                  }
                                });
                              }});
  runner.start();
  runner.join();
  for (auto& t : operators) t.join();
  CHECK(session->phase() == Phase::Done);
  CHECK(answered == static_cast<int>(session->turn()));

  auto stopped = std::make_shared<Session>("stop", clinic_inputs(cfg));
  TurnRunner r2(stopped);
  r2.start();
  while (stopped->request_count() == 0) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  stopped->stop();
  r2.join();
  CHECK(stopped->phase() == Phase::Stopped);
  CHECK(stopped->request_count() == 1);
  CHECK(stopped->turn() == 1);
}
