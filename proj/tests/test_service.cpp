#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "sarplan/service/api.hpp"
#include "sarplan/service/persist.hpp"
#include "support/oracles.hpp"

using namespace sarplan;
using namespace sarplan::service;
using nlohmann::json;
using sarplan::testing::data_path;
using sarplan::testing::read_file;

namespace {

std::string fresh_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sarplan-svc-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

struct Server {
  std::unique_ptr<Service> service;
  int port = -1;

  explicit Server(const std::string& log_dir) {
    ServiceConfig cfg;
    cfg.host = "127.0.0.1";
    cfg.port = 0;
    cfg.log_dir = log_dir;
    service = std::make_unique<Service>(cfg);
    port = service->start();
    REQUIRE(port > 0);
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(10, 0);
    return c;
  }
};

json clinic_body(const std::string& id) {
  return {{"id", id},
          {"domain", read_file(data_path("clinic/clinic.pddl"))},
          {"problem", read_file(data_path("clinic/clinic-p1.pddl"))},
          {"config", json::parse(read_file(data_path("clinic/clinic-config.json")))}};
}

json post(httplib::Client& c, const std::string& path, const json& body, int expect) {
  auto r = c.Post(path, body.dump(), "application/json");
  REQUIRE(r);
  INFO(path << " -> " << r->body);
  CHECK(r->status == expect);
  return r->body.empty() ? json() : json::parse(r->body);
}

json get(httplib::Client& c, const std::string& path, int expect = 200) {
  auto r = c.Get(path);
  REQUIRE(r);
  INFO(path << " -> " << r->body);
  CHECK(r->status == expect);
  return json::parse(r->body);
}

// Poll until the session offers prompt `id`.
json wait_prompt(httplib::Client& c, const std::string& session, const std::string& id) {
  const auto until = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  while (std::chrono::steady_clock::now() < until) {
    const auto listed = get(c, "/sessions/" + session + "/prompts");
    for (const auto& p : listed.at("prompts")) {
      if (p.at("id") == id) return p;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  FAIL("prompt " << id << " never appeared");
  return {};
}

std::vector<json> events_of(const Service& s, const std::string& id) { return s.find(id)->session().log().events(); }

}  // namespace

TEST_CASE("create session exposes an initial anxiety prompt with its schema") {
  Server srv(fresh_dir("create"));
  auto c = srv.client();
  auto snap = post(c, "/sessions", clinic_body("a1"), 201);
  CHECK(snap.at("id") == "a1");
  CHECK(snap.at("class") == "strong-cyclic");
  auto p = wait_prompt(c, "a1", "initial");
  REQUIRE(p.at("questions").size() == 1);
  const auto& q = p.at("questions")[0];
  CHECK(q.at("fluent") == "(okanxiety s1)");
  CHECK(q.at("kind") == "anxiety");
  CHECK(q.at("schema").at("enum") == json::array({"low", "medium", "high"}));
  CHECK(std::filesystem::exists(log_path_for(srv.service->config().log_dir, "a1")));

  post(c, "/sessions", clinic_body("a1"), 409);
  post(c, "/sessions", {{"domain", "(define"}, {"problem", "x"}, {"config", "{}"}}, 400);
  auto bad = c.Post("/sessions", "{not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  get(c, "/sessions/nope", 404);
}

TEST_CASE("answering the anxiety prompt with high routes to the distraction branch") {
  Server srv(fresh_dir("route"));
  auto c = srv.client();
  post(c, "/sessions", clinic_body("r1"), 201);
  wait_prompt(c, "r1", "initial");
  post(c, "/sessions/r1/prompts/initial", {{"value", "high"}}, 200);

  auto p = wait_prompt(c, "r1", "turn-0");
  CHECK(p.at("action") == "(test-anxiety s1)");
  CHECK(p.at("questions")[0].at("kind") == "anxiety");
  auto r = post(c, "/sessions/r1/prompts/turn-0", {{"value", "high"}}, 200);
  CHECK(r.at("outcome") == 1);
  CHECK(r.at("consistent") == true);

  bool chosen = false;
  for (const auto& e : events_of(*srv.service, "r1")) {
    if (e.at("kind") == "outcome-chosen") {
      CHECK(e.at("outcome") == 1);
      CHECK(e.at("label").get<std::string>().find("not (okanxiety s1)") != std::string::npos);
      chosen = true;
    }
  }
  CHECK(chosen);
  auto next = wait_prompt(c, "r1", "turn-1");
  CHECK(next.at("action").get<std::string>().rfind("(distract-anxious", 0) == 0);

  // the same prompt twice, unknown prompts and bad answers
  post(c, "/sessions/r1/prompts/turn-0", {{"value", "low"}}, 409);
  post(c, "/sessions/r1/prompts/turn-9", {{"value", true}}, 404);
  post(c, "/sessions/r1/prompts/turn-1", {{"value", "furious"}}, 400);
  post(c, "/sessions/r1/prompts/turn-1", {{"answers", {{"(engaged)", true}}}}, 400);
  post(c, "/sessions/nope/prompts/turn-1", {{"value", true}}, 404);

  // plan from the current state starts at the pending action
  auto plan = get(c, "/sessions/r1/plan");
  CHECK(plan.at("class") == "strong-cyclic");
  CHECK(plan.at("plan").at("nodes")[0].at("action") == next.at("action"));
  auto initial = get(c, "/sessions/r1/plan?from=initial");
  CHECK(initial.at("from") == "initial");
  get(c, "/sessions/r1/plan?from=yesterday", 400);
}

TEST_CASE("event stream follows the log and closes after stop") {
  Server srv(fresh_dir("stream"));
  auto c = srv.client();
  post(c, "/sessions", clinic_body("e1"), 201);
  wait_prompt(c, "e1", "initial");

  std::string streamed;
  std::thread reader([&] {
    auto rc = srv.client();
    auto r = rc.Get("/sessions/e1/events", [&](const char* data, std::size_t n) {
      streamed.append(data, n);
      return true;
    });
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->get_header_value("Content-Type") == "text/event-stream");
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  auto first = post(c, "/sessions/e1/stop", json::object(), 200);
  CHECK(first.at("stopped") == true);
  CHECK(first.at("phase") == "stopped");
  auto second = post(c, "/sessions/e1/stop", json::object(), 200);
  CHECK(second.at("stopped") == false);
  reader.join();

  std::string expected;
  const auto lines = srv.service->find("e1")->session().log().lines();
  for (std::size_t i = 0; i < lines.size(); ++i) expected += "id: " + std::to_string(i) + "\ndata: " + lines[i] + "\n\n";
  CHECK(streamed == expected);
  std::size_t stops = 0;
  for (const auto& e : events_of(*srv.service, "e1")) stops += e.at("kind") == "stop";
  CHECK(stops == 1);
  CHECK(get(c, "/sessions/e1/prompts").at("prompts").empty());
  post(c, "/sessions/e1/prompts/initial", {{"value", "low"}}, 409);

  // resuming part way through
  auto tail = c.Get("/sessions/e1/events?from=1");
  REQUIRE(tail);
  CHECK(tail->body == expected.substr(expected.find("id: 1\n")));
}

TEST_CASE("unsolvable task is refused") {
  Server srv(fresh_dir("unsolvable"));
  auto c = srv.client();
  auto body = clinic_body("u1");
  auto problem = read_file(data_path("clinic/clinic-p1.pddl"));
  problem.replace(problem.find("(:goal (procdone))"), 18, "(:goal (and (procdone) (nextstep s3 s1)))");
  body["problem"] = problem;
  post(c, "/sessions", body, 422);
  CHECK_FALSE(std::filesystem::exists(log_path_for(srv.service->config().log_dir, "u1")));
}

TEST_CASE("sensor observations and signals reach the session") {
  Server srv(fresh_dir("sensed"));
  auto c = srv.client();
  post(c, "/sessions", clinic_body("o1"), 201);
  wait_prompt(c, "o1", "initial");
  auto affect = post(c, "/sessions/o1/signals",
                     {{"expression", {0.05, 0.15, 0.55, 0.05, 0.05, 0.15}},
                      {"head_speed", 0.8},
                      {"attention", "away"}},
                     200);
  CHECK(affect.at("affect").at("anxiety") == "high");
  post(c, "/sessions/o1/observations", {{"readings", {{{"fluent", "(okanxiety s1)"}, {"value", true}}}}}, 409);
  post(c, "/sessions/o1/signals", {{"head_speed", "fast"}}, 400);
}

TEST_CASE("restarted service recovers sessions from the log directory") {
  const auto dir = fresh_dir("recover");
  json before;
  {
    Server srv(dir);
    auto c = srv.client();
    post(c, "/sessions", clinic_body("k1"), 201);
    wait_prompt(c, "k1", "initial");
    post(c, "/sessions/k1/prompts/initial", {{"value", "high"}}, 200);
    wait_prompt(c, "k1", "turn-0");
    before = get(c, "/sessions/k1");
  }
  // a torn write at the moment of the crash
  {
    std::ofstream out(log_path_for(dir, "k1"), std::ios::app);
    out << R"({"kind":"observ)";
  }
  Server again(dir);
  CHECK(again.service->warnings().size() == 1);
  auto c = again.client();
  auto after = get(c, "/sessions/k1");
  CHECK(after.at("state") == before.at("state"));
  CHECK(after.at("turn") == before.at("turn"));
  CHECK(after.at("phase") == "awaiting-observation");
  auto p = wait_prompt(c, "k1", "turn-0");
  CHECK(p.at("action") == "(test-anxiety s1)");
  post(c, "/sessions/k1/prompts/turn-0", {{"value", "low"}}, 200);
  wait_prompt(c, "k1", "turn-1");
}

TEST_CASE("service config file and environment overrides") {
  const auto dir = fresh_dir("cfg");
  {
    std::ofstream out(dir + "/service.json");
    out << json{{"port", 9100}, {"log_dir", "logs"}, {"domain", data_path("clinic/clinic.pddl")}}.dump();
  }
  auto cfg = load_service_config(dir + "/service.json");
  CHECK(cfg.port == 9100);
  CHECK(cfg.log_dir == "logs");
  CHECK(cfg.domain_text == read_file(data_path("clinic/clinic.pddl")));
  setenv("PORT", "9200", 1);
  setenv("LOG_DIR", "/tmp/elsewhere", 1);
  apply_env_overrides(cfg);
  CHECK(cfg.port == 9200);
  CHECK(cfg.log_dir == "/tmp/elsewhere");
  setenv("PORT", "http", 1);
  CHECK_THROWS_AS(apply_env_overrides(cfg), std::invalid_argument);
  unsetenv("PORT");
  unsetenv("LOG_DIR");
  CHECK_THROWS_AS(service_config_from_json({{"port", 70000}}, dir), std::invalid_argument);
  CHECK_FALSE(valid_session_id("../etc"));
  CHECK(valid_session_id("ward-3_a"));
}
