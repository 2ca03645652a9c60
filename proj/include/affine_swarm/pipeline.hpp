#pragma once

#include <optional>
#include <string>
#include <vector>

#include "affine_swarm/error_dynamics.hpp"
#include "affine_swarm/planner.hpp"
#include "affine_swarm/scenario.hpp"
#include "affine_swarm/swarm_sim.hpp"
#include "affine_swarm/topology.hpp"
#include "affine_swarm/travel_time.hpp"

namespace affine_swarm {

/// Process exit codes shared by the CLI and the pipeline.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitAuditFail = 2, kExitStageFailure = 3 };

/// Last stage executed by a pipeline run.
enum class StopAfter { Plan, TravelTime, Simulate, Audit };

struct RunFlags {
  std::optional<double> dt;  // overrides the scenario integrator step
  std::optional<double> tf;  // fixed horizon T = t_f - t0; skips the travel-time search
  StopAfter stop_after = StopAfter::Audit;
  int threads = 0;  // <= 0: scheduler default
  std::optional<int> log_stride;
};

struct StageRecord {
  std::string name;
  std::string status;  // "ok", "failed", "skipped"
  double seconds = 0.0;
  std::string message;
};

/// Everything a pipeline run produced; later members stay empty when a stage
/// before them failed or was not requested.
struct RunReport {
  std::string scenario_name;
  std::vector<StageRecord> stages;
  std::string failed_stage;
  int exit_code = kExitOk;

  std::optional<CommTopology> topology;
  std::optional<StabilityReport> stability;
  std::vector<GainReport> gain_reports;
  std::optional<double> error_spectral_abscissa;  // max Re over the A_MQS spectrum
  std::optional<SafetyBounds> bounds;
  std::vector<Vec3> waypoints;
  std::optional<MotionPlan> plan;
  std::optional<PlanValidation> validation;
  std::optional<TravelTimeResult> travel_time;
  std::optional<SimulationResult> simulation;
  std::optional<AuditReport> audit;
  double dt = 0.0;
  int threads = 0;
};

/// Runs topology, gain check, safety bounds, waypoints, plan, travel time,
/// simulation and audit in order, stopping at the first failing stage.
RunReport run_pipeline(const Scenario& scenario, const RunFlags& flags);

/// Writes every artifact available in the report plus MANIFEST.json. Returns
/// the file names written. Throws InvalidArgument if outdir is unwritable.
std::vector<std::string> emit_outputs(const RunReport& report, const Scenario& scenario,
                                      const std::string& outdir);

/// Trajectory CSV: header t,agent_id,x,y,z,dev,p,phi,theta,psi.
void write_trajectory_csv(const std::string& path, const TrajectoryLog& log);
/// Reads a trajectory CSV back. Deviations and the centre are left as logged
/// (r_a, r_d and centers are zero).
TrajectoryLog read_trajectory_csv(const std::string& path);

/// Rebuilds a plan from its JSON form (waypoints, features, bounds, horizon).
MotionPlan plan_from_json(const std::string& text);

/// Re-audits a trajectory CSV against the plan it was flown with: desired
/// positions and centres are recomputed from the plan at every logged time.
AuditReport audit_trajectory(const Scenario& scenario, const MotionPlan& plan, TrajectoryLog& log);

/// Default output directory: $AFFINE_SWARM_OUT, else "out".
std::string default_output_dir();

}  // namespace affine_swarm
