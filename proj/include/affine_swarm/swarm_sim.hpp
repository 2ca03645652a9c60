#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affine_swarm/grid.hpp"
#include "affine_swarm/planner.hpp"
#include "affine_swarm/topology.hpp"
#include "affine_swarm/vehicle.hpp"

namespace affine_swarm {

struct SwarmConfig {
  QuadParams params;
  std::vector<Gains> gains{Gains{}};  // one entry applies to every agent
  YawGains yaw_gains;
  double dt = 1e-3;
  int threads = 1;     // <= 0 lets the scheduler decide
  int log_stride = 1;  // log every k-th integrator step (the last step is always logged)
};

struct AgentRecord {
  Vec3 r = Vec3::Zero();
  Vec3 r_a = Vec3::Zero();  // global desired position
  Vec3 r_d = Vec3::Zero();  // local desired position
  double dev = 0.0;         // ||r - r_a||
  double p = 0.0;
  Vec3 euler = Vec3::Zero();
};

/// Logged samples, agent-major within each sample.
struct TrajectoryLog {
  int agents = 0;
  std::vector<double> times;
  std::vector<Vec3> centers;  // d(t)
  std::vector<AgentRecord> records;

  int samples() const { return static_cast<int>(times.size()); }
  const AgentRecord& at(int sample, int agent) const {
    return records[static_cast<std::size_t>(sample) * agents + agent];
  }
  AgentRecord& at(int sample, int agent) { return records[static_cast<std::size_t>(sample) * agents + agent]; }
};

/// Extremes seen by the per-step monitor.
struct MonitorSummary {
  double max_deviation = 0.0;
  double max_deviation_time = 0.0;
  int max_deviation_agent = -1;
  double min_separation = 0.0;
  double min_separation_time = 0.0;
  double max_containment = 0.0;  // max ||r_i - d(t)||
  double max_containment_time = 0.0;
  long long steps = 0;
  long long saturated_inputs = 0;
};

struct SimulationResult {
  TrajectoryLog log;
  MonitorSummary monitor;
  bool aborted = false;
  double abort_time = 0.0;
  std::string abort_reason;
};

/// Minimum pairwise distance; a uniform spatial hash is used above 64 agents.
double min_pairwise_distance(std::span<const Vec3> points, double hash_cell);

/**
 * @brief Closed-loop simulation of all vehicles.
 *
 * Leaders track their global desired trajectories; followers track the
 * weighted combination of their in-neighbours' actual positions (and the
 * derivatives carried by each vehicle's chain state). Every agent starts
 * hovering at rest on the formation. A vehicle singularity aborts the run and
 * keeps the log up to that point.
 */
SimulationResult simulate_nonlinear(const AffineTrajectory& trajectory, const CommTopology& topology,
                                    const SwarmConfig& config);

struct SafetyMonitor {
  double delta = 0.0;
  double epsilon = 0.0;
  double r_max = 0.0;
  const OccupancyGrid* grid = nullptr;
};

struct Violation {
  double t = 0.0;
  int agent = -1;
  int other = -1;
  double value = 0.0;
};

struct AuditCheck {
  bool pass = true;
  double worst = 0.0;
  std::optional<Violation> first;
  long long violations = 0;
};

struct AuditReport {
  double delta = 0.0;
  double epsilon = 0.0;
  double r_max = 0.0;
  AuditCheck separation;   // ||r_i - r_j|| > 2 epsilon
  AuditCheck containment;  // ||r_i - d|| <= r_max
  AuditCheck deviation;    // ||r_i - r_a|| <= delta
  AuditCheck clearance;    // distance to occupied cells > epsilon
  bool pass() const { return separation.pass && containment.pass && deviation.pass && clearance.pass; }
};

AuditReport audit_safety(const TrajectoryLog& log, const SafetyMonitor& monitor);

std::string audit_json(const AuditReport& report, const MonitorSummary* monitor = nullptr);

}  // namespace affine_swarm
