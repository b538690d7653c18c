// Parallel kernels against their serial references on scaled clinic tasks:
//   ground       vs ground_serial
//   solve_many   vs solve_many_serial
// Each pair is checked for identical output before timings are reported.

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "sarplan/pddl/task.hpp"
#include "sarplan/planner/solver.hpp"

using namespace sarplan;

namespace {

// Clinic problem with `steps` procedure steps and `activities` activities.
std::string clinic_problem(std::size_t steps, std::size_t activities) {
  std::ostringstream p;
  p << "(define (problem bench-" << steps << "-" << activities << ") (:domain clinic)\n  (:objects";
  for (std::size_t a = 0; a < activities; ++a) p << " a" << a;
  p << " - activity";
  for (std::size_t s = 0; s < steps; ++s) p << " s" << s;
  p << " - procstep low high - level)\n  (:init (procstage s0) (naustep)";
  for (std::size_t s = 0; s + 1 < steps; ++s) p << " (nextstep s" << s << " s" << s + 1 << ")";
  p << " (laststep s" << steps - 1 << ")";
  for (std::size_t s = 0; s < steps; ++s) p << " (desiredstrength s" << s << (s % 2 ? " high)" : " low)");
  for (std::size_t a = 0; a < activities; ++a) p << " (distractionstrength a" << a << (a % 2 ? " high)" : " low)");
  p << ")\n  (:goal (procdone)))\n";
  return p.str();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class Fn>
double best_ms(int reps, Fn&& fn) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

bool same(const GroundedTask& a, const GroundedTask& b) {
  if (a.fluents != b.fluents || a.actions.size() != b.actions.size() || !(a.init == b.init)) return false;
  for (std::size_t i = 0; i < a.actions.size(); ++i) {
    if (a.actions[i].name() != b.actions[i].name()) return false;
  }
  return true;
}

bool same(const planner::SolveResult& a, const planner::SolveResult& b) {
  if (a.index() != b.index()) return false;
  if (const auto* pa = std::get_if<planner::Policy>(&a)) {
    const auto& pb = std::get<planner::Policy>(b);
    return pa->mapping == pb.mapping && pa->solution_class == pb.solution_class;
  }
  return true;
}

void row(const std::string& name, double serial, double parallel, bool ok) {
  std::cout << std::left << std::setw(34) << name << std::right << std::fixed << std::setprecision(2) << std::setw(12)
            << serial << std::setw(12) << parallel << std::setw(9) << serial / parallel << "x"
            << (ok ? "" : "   OUTPUT MISMATCH") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark parallel kernels against serial references"};
  std::string domain_path = std::string(SARPLAN_DATA_DIR) + "/clinic/clinic.pddl";
  std::size_t steps = 60, activities = 60, tasks = 32, max_steps = 12;
  int reps = 3;
  app.add_option("--domain", domain_path, "Clinic domain file");
  app.add_option("--steps", steps, "Procedure steps in the grounding problem")->check(CLI::PositiveNumber);
  app.add_option("--activities", activities, "Activities in the grounding problem")->check(CLI::PositiveNumber);
  app.add_option("--tasks", tasks, "Tasks for the batch solve")->check(CLI::PositiveNumber);
  app.add_option("--max-steps", max_steps, "Largest step count in the batch")->check(CLI::PositiveNumber);
  app.add_option("--reps", reps, "Repetitions (best time kept)")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const auto domain = pddl::parse_domain(slurp(domain_path));
  std::cout << "threads: " << omp_get_max_threads() << "\n";
  std::cout << std::left << std::setw(34) << "kernel" << std::right << std::setw(12) << "serial ms" << std::setw(12)
            << "parallel ms" << std::setw(10) << "speedup" << "\n";

  bool all_ok = true;
  {
    const auto problem = pddl::parse_problem(clinic_problem(steps, activities), domain);
    GroundedTask serial, parallel;
    const double ts = best_ms(reps, [&] { serial = ground_serial(domain, problem); });
    const double tp = best_ms(reps, [&] { parallel = ground(domain, problem); });
    const bool ok = same(serial, parallel);
    all_ok &= ok;
    std::ostringstream name;
    name << "ground (" << parallel.actions.size() << " actions)";
    row(name.str(), ts, tp, ok);
  }
  {
    std::vector<GroundedTask> batch;
    for (std::size_t i = 0; i < tasks; ++i) {
      const std::size_t n = 2 + i % (max_steps - 1 > 0 ? max_steps - 1 : 1);
      batch.push_back(ground(domain, pddl::parse_problem(clinic_problem(n, 2 + i % 4), domain)));
    }
    std::vector<planner::SolveResult> serial, parallel;
    const double ts = best_ms(reps, [&] { serial = planner::solve_many_serial(batch); });
    const double tp = best_ms(reps, [&] { parallel = planner::solve_many(batch); });
    bool ok = serial.size() == parallel.size();
    for (std::size_t i = 0; ok && i < serial.size(); ++i) ok = same(serial[i], parallel[i]);
    all_ok &= ok;
    row("solve_many (" + std::to_string(tasks) + " tasks)", ts, tp, ok);
  }
  return all_ok ? 0 : 1;
}
