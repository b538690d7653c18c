// sarplan: plan, verify, simulate, replay and serve from the command line.
//
// Exit codes: 0 success, 1 unsolvable / invalid / differing result,
// 2 usage or parse error. Errors go to stderr.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sarplan/exec/replay.hpp"
#include "sarplan/planner/branched_plan.hpp"
#include "sarplan/planner/solver.hpp"
#include "sarplan/planner/verify.hpp"
#include "sarplan/service/api.hpp"
#include "sarplan/sim/scenario.hpp"

using namespace sarplan;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

GroundedTask task_from(const std::string& domain, const std::string& problem) {
  return load_task(slurp(domain), slurp(problem));
}

int cmd_plan(const std::string& domain, const std::string& problem, const std::string& semantics,
             const std::string& out, std::size_t budget, bool as_json) {
  const auto sem = planner::parse_semantics(semantics);
  if (!sem) throw InputError("--semantics must be strong or strong-cyclic");
  const auto task = task_from(domain, problem);
  planner::SolveOptions opts;
  opts.semantics = *sem;
  if (budget) opts.expansion_budget = budget;
  try {
    const auto policy = planner::solve(task, opts);
    const auto plan = planner::unfold(task, policy);
    if (!out.empty()) write_file(out, planner::policy_to_json(task, policy).dump(2) + "\n");
    if (as_json) {
      std::cout << nlohmann::json{{"class", std::string(planner::to_string(policy.solution_class))},
                                  {"plan", planner::plan_to_json(task, plan)}}
                       .dump(2)
                << "\n";
    } else {
      std::cout << planner::to_string(policy.solution_class) << "\n" << planner::render_plan(task, plan);
    }
    return kOk;
  } catch (const planner::Unsolvable& e) {
    std::cout << "unsolvable\n";
    std::cerr << e.what() << "\n";
    return kFail;
  } catch (const planner::ResourceLimit& e) {
    std::cout << "resource-limit\n";
    std::cerr << e.what() << "\n";
    return kFail;
  }
}

int cmd_verify(const std::string& domain, const std::string& problem, const std::string& policy_path) {
  const auto task = task_from(domain, problem);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(slurp(policy_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(policy_path + " is not JSON: " + e.what());
  }
  planner::SolutionClass cls = planner::SolutionClass::Invalid;
  try {
    cls = planner::verify_policy(task, planner::policy_from_json(task, doc));
  } catch (const std::exception& e) {
    // A policy that names states or actions outside the task is invalid.
    std::cerr << e.what() << "\n";
  }
  std::cout << planner::to_string(cls) << "\n";
  return cls == planner::SolutionClass::Strong || cls == planner::SolutionClass::StrongCyclic ? kOk : kFail;
}

int cmd_simulate(const std::string& scenario_path, std::optional<std::uint64_t> seed, const std::string& out) {
  sim::Scenario sc;
  try {
    sc = sim::load_scenario(scenario_path);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  const auto t = sim::simulate(sc, seed);
  const auto summary = std::string(exec::to_string(t.final_phase)) + " turns=" + std::to_string(t.turns) +
                       " events=" + std::to_string(t.lines.size());
  if (out.empty()) {
    std::cout << t.text();
    std::cerr << summary << "\n";
  } else {
    write_file(out, t.text());
    std::cout << summary << "\n";
  }
  return kOk;
}

int cmd_replay(const std::string& transcript) {
  exec::ParsedLog parsed;
  try {
    parsed = exec::parse_log(slurp(transcript));
  } catch (const exec::CorruptLog& e) {
    throw InputError(e.what());
  }
  for (const auto& w : parsed.warnings) std::cerr << "warning: " << w << "\n";
  try {
    const auto r = exec::replay(parsed.events, parsed.lines);
    const bool same_states = exec::trajectory_text(exec::trajectory(parsed.events)) ==
                             exec::trajectory_text(exec::trajectory(r.session->log().events()));
    if (same_states && r.identical_events) {
      std::cout << "identical\n";
      return kOk;
    }
    std::cout << "differs\n";
    for (const auto& d : r.differences) std::cout << d << "\n";
    return kFail;
  } catch (const exec::ReplayMismatch& e) {
    std::cout << "differs\n" << e.what() << "\n";
    return kFail;
  } catch (const exec::CorruptLog& e) {
    throw InputError(e.what());
  }
}

int cmd_serve(const std::string& config_path, std::optional<int> port, const std::string& log_dir,
              const std::string& host) {
  service::ServiceConfig cfg;
  try {
    if (!config_path.empty()) cfg = service::load_service_config(config_path);
    service::apply_env_overrides(cfg);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  if (port) cfg.port = *port;
  if (!log_dir.empty()) cfg.log_dir = log_dir;
  if (!host.empty()) cfg.host = host;

  // Signals are taken synchronously so shutdown runs on a normal thread.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  service::Service svc(cfg);
  for (const auto& w : svc.warnings()) std::cerr << "warning: " << w << "\n";
  const int bound = svc.start();
  if (bound < 0) {
    std::cerr << "cannot bind " << cfg.host << ":" << cfg.port << "\n";
    return kFail;
  }
  std::cout << "listening on " << cfg.host << ":" << bound << " (logs in " << cfg.log_dir << ", "
            << svc.session_ids().size() << " sessions recovered)" << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  svc.stop();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planning-driven interaction engine for socially assistive robots"};
  app.require_subcommand(1);

  std::string domain, problem, policy_path, scenario, transcript, out, semantics = "strong-cyclic";
  std::size_t budget = 0;
  bool as_json = false;
  auto* plan = app.add_subcommand("plan", "Solve a FOND task and print its class and plan tree");
  plan->add_option("DOMAIN", domain)->required()->check(CLI::ExistingFile);
  plan->add_option("PROBLEM", problem)->required()->check(CLI::ExistingFile);
  plan->add_option("--semantics", semantics, "strong or strong-cyclic")->check(CLI::IsMember({"strong", "strong-cyclic"}));
  plan->add_option("--out", out, "Write the policy as JSON");
  plan->add_option("--budget", budget, "Node expansion budget");
  plan->add_flag("--json", as_json, "Print the plan tree as JSON");

  auto* verify = app.add_subcommand("verify", "Classify a policy file against a task");
  verify->add_option("DOMAIN", domain)->required()->check(CLI::ExistingFile);
  verify->add_option("PROBLEM", problem)->required()->check(CLI::ExistingFile);
  verify->add_option("POLICY", policy_path)->required()->check(CLI::ExistingFile);

  std::optional<std::uint64_t> seed;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario headless and write its transcript");
  simulate->add_option("SCENARIO", scenario)->required()->check(CLI::ExistingFile);
  simulate->add_option("--seed", seed, "Patient model seed");
  simulate->add_option("--out", out, "Transcript file (default: stdout)");

  auto* replay = app.add_subcommand("replay", "Re-execute a transcript and compare");
  replay->add_option("TRANSCRIPT", transcript)->required()->check(CLI::ExistingFile);

  std::optional<int> port;
  std::string config_path, log_dir, host;
  auto* serve = app.add_subcommand("serve", "Start the HTTP API");
  serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--config", config_path, "Service config JSON")->check(CLI::ExistingFile);
  serve->add_option("--log-dir", log_dir, "Session log directory");
  serve->add_option("--host", host, "Bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*plan) return cmd_plan(domain, problem, semantics, out, budget, as_json);
    if (*verify) return cmd_verify(domain, problem, policy_path);
    if (*simulate) return cmd_simulate(scenario, seed, out);
    if (*replay) return cmd_replay(transcript);
    if (*serve) return cmd_serve(config_path, port, log_dir, host);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const pddl::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kUsage;
  } catch (const sim::ScenarioMismatch& e) {
    std::cerr << "scenario does not fit the task: " << e.what() << "\n";
    return kFail;
  } catch (const exec::BadConfig& e) {
    std::cerr << "bad config: " << e.what() << "\n";
    return kUsage;
  } catch (const planner::Unsolvable& e) {
    std::cerr << "unsolvable: " << e.what() << "\n";
    return kFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kUsage;
}
