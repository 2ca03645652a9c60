#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "affine_swarm/pipeline.hpp"

using namespace affine_swarm;

namespace {

struct Options {
  std::string scenario;
  std::string out;
  std::optional<double> dt;
  std::optional<double> tf;
  bool plan_only = false;
  int threads = 0;
  std::optional<int> log_stride;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--scenario", o.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory (default: $AFFINE_SWARM_OUT or ./out)");
  cmd->add_option("--dt", o.dt, "Integrator step in seconds")->check(CLI::PositiveNumber);
  cmd->add_option("--tf", o.tf, "Fixed maneuver duration T in seconds; skips the travel-time search")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--threads", o.threads, "Worker threads for the simulation (0: all cores)");
  cmd->add_option("--log-stride", o.log_stride, "Log every k-th integrator step")->check(CLI::PositiveNumber);
}

int run_stages(const Options& o, StopAfter stop) {
  const Scenario sc = load_scenario(o.scenario);
  RunFlags flags;
  flags.dt = o.dt;
  flags.tf = o.tf;
  flags.threads = o.threads;
  flags.log_stride = o.log_stride;
  flags.stop_after = o.plan_only ? StopAfter::Plan : stop;
  const RunReport report = run_pipeline(sc, flags);
  const std::string outdir = o.out.empty() ? default_output_dir() : o.out;
  emit_outputs(report, sc, outdir);
  for (const auto& s : report.stages) {
    std::printf("%-12s %-8s %9.3f s%s%s\n", s.name.c_str(), s.status.c_str(), s.seconds, s.message.empty() ? "" : "  ",
                s.message.c_str());
  }
  if (report.travel_time) std::printf("T* = %.6g s\n", report.travel_time->duration);
  if (report.audit) std::printf("audit: %s\n", report.audit->pass() ? "PASS" : "FAIL");
  std::printf("outputs written to %s\n", outdir.c_str());
  return report.exit_code;
}

int run_audit(const Options& o) {
  const Scenario sc = load_scenario(o.scenario);
  const std::filesystem::path dir(o.out.empty() ? default_output_dir() : o.out);
  std::ifstream plan_in(dir / "plan.json");
  if (!plan_in) throw InvalidArgument("missing " + (dir / "plan.json").string());
  std::stringstream buf;
  buf << plan_in.rdbuf();
  const MotionPlan plan = plan_from_json(buf.str());
  TrajectoryLog log = read_trajectory_csv((dir / "trajectory.csv").string());
  const AuditReport report = audit_trajectory(sc, plan, log);
  std::ofstream out(dir / "audit.json");
  if (!out) throw InvalidArgument("cannot write " + (dir / "audit.json").string());
  out << audit_json(report) << '\n';
  const auto line = [](const char* name, const AuditCheck& c) {
    std::printf("%-12s %s  worst %.6g  violations %lld\n", name, c.pass ? "PASS" : "FAIL", c.worst, c.violations);
  };
  line("separation", report.separation);
  line("containment", report.containment);
  line("deviation", report.deviation);
  line("clearance", report.clearance);
  std::printf("audit: %s\n", report.pass() ? "PASS" : "FAIL");
  return report.pass() ? kExitOk : kExitAuditFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affine formation control of quadcopter swarms: plan, certify, simulate and audit"};
  app.require_subcommand(1);
  Options o;

  auto* plan = app.add_subcommand("plan", "Certify the topology and build and validate the motion plan");
  add_common(plan, o);
  auto* solve = app.add_subcommand("solve-time", "Plan, then search the minimal safe travel time");
  add_common(solve, o);
  auto* simulate = app.add_subcommand("simulate", "Plan, solve the travel time and simulate the vehicles");
  add_common(simulate, o);
  auto* run = app.add_subcommand("run", "Full pipeline including the safety audit");
  add_common(run, o);
  run->add_flag("--plan-only", o.plan_only, "Stop after plan validation");
  auto* audit = app.add_subcommand("audit", "Re-audit trajectory.csv in the output directory against plan.json");
  add_common(audit, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (audit->parsed()) return run_audit(o);
    if (plan->parsed()) return run_stages(o, StopAfter::Plan);
    if (solve->parsed()) return run_stages(o, StopAfter::TravelTime);
    if (simulate->parsed()) return run_stages(o, StopAfter::Simulate);
    return run_stages(o, StopAfter::Audit);
  } catch (const ScenarioError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitStageFailure;
  }
}
