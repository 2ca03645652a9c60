#include "affine_swarm/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "affine_swarm/grid.hpp"
#include "json.hpp"

namespace affine_swarm {

using ojson = nlohmann::ordered_json;

namespace {

class StageFailure : public Error {
 public:
  using Error::Error;
};

// Runs one stage, recording its wall time and outcome. Returns false when the
// stage threw; the report then names it as the failed stage.
bool run_stage(RunReport& report, const std::string& name, const std::function<void()>& body) {
  StageRecord rec{name, "ok", 0.0, {}};
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  try {
    body();
  } catch (const std::exception& e) {
    ok = false;
    rec.status = "failed";
    rec.message = e.what();
    report.failed_stage = name;
    report.exit_code = kExitStageFailure;
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.stages.push_back(std::move(rec));
  return ok;
}

void skip_stage(RunReport& report, const std::string& name, const std::string& why) {
  report.stages.push_back({name, "skipped", 0.0, why});
}

}  // namespace

RunReport run_pipeline(const Scenario& sc, const RunFlags& flags) {
  RunReport report;
  report.scenario_name = sc.name;
  report.dt = flags.dt.value_or(sc.solver.dt);
  report.threads = flags.threads;
  const std::optional<double> fixed_tf = flags.tf ? flags.tf : sc.solver.tf;
  const double t0 = sc.solver.t0;

  if (!run_stage(report, "topology", [&] {
        report.topology = build_topology(sc.formation);
        report.stability = certify_stability(*report.topology);
        if (!report.stability->hurwitz) throw StageFailure("communication Laplacian is not Hurwitz");
      })) {
    return report;
  }

  if (!run_stage(report, "gains", [&] {
        if (!check_gain_stability(std::vector<Gains>{sc.vehicle.gains}, &report.gain_reports)) {
          throw StageFailure("control gains fail the Routh-Hurwitz test");
        }
        // A stable quartic per agent does not make the coupled error dynamics
        // stable: each eigenvalue l of L scales the gains, and weakly coupled
        // modes (small |l|) can still sit in the right half-plane.
        const ErrorSystem coupled(*report.topology, {sc.vehicle.gains});
        report.error_spectral_abscissa = coupled.spectrum().real().maxCoeff();
        if (!(*report.error_spectral_abscissa < 0.0)) {
          char buf[160];
          std::snprintf(buf, sizeof buf,
                        "closed-loop error dynamics unstable with these gains: max Re eig(A_MQS) = %.6g",
                        *report.error_spectral_abscissa);
          throw StageFailure(buf);
        }
      })) {
    return report;
  }

  if (!run_stage(report, "bounds", [&] {
        report.bounds = safety_bounds(sc.formation.positions, sc.d0, sc.delta, sc.epsilon, sc.r_max,
                                      sc.theta0.axis_angle(1), sc.theta0.axis_angle(2));
      })) {
    return report;
  }

  if (!run_stage(report, "waypoints", [&] {
        report.waypoints = sc.grid ? astar_waypoints(*sc.grid, sc.d0, sc.df, sc.r_max)
                                   : std::vector<Vec3>{sc.d0, sc.df};
      })) {
    return report;
  }

  if (!run_stage(report, "plan", [&] {
        const double horizon = fixed_tf.value_or(sc.solver.tf_initial);
        MotionPlan plan = make_plan(report.waypoints, sc.theta0, sc.thetaf, *report.bounds, t0, t0 + horizon);
        plan.target_jacobian = sc.target_jacobian;
        report.validation = validate_plan(plan, sc.solver.sample_dt);
        report.plan = std::move(plan);
        if (!report.validation->ok) throw StageFailure("plan validation failed: " + report.validation->violation);
      })) {
    return report;
  }
  if (flags.stop_after == StopAfter::Plan) return report;

  const ErrorSystem system(*report.topology, {sc.vehicle.gains});
  if (fixed_tf) {
    skip_stage(report, "travel_time", "fixed horizon " + std::to_string(*fixed_tf) + " s");
  } else if (!run_stage(report, "travel_time", [&] {
               TravelTimeOptions opts;
               opts.dt = report.dt;
               opts.cap = sc.solver.tf_cap;
               opts.resolution = sc.solver.tf_resolution;
               opts.initial = sc.solver.tf_initial;
               report.travel_time = solve_travel_time(*report.plan, sc.formation.positions, system, sc.delta,
                                                      sc.solver.rho, opts);
               report.plan = retime(*report.plan, t0 + report.travel_time->duration);
             })) {
    return report;
  }
  if (flags.stop_after == StopAfter::TravelTime) return report;

  if (!run_stage(report, "simulate", [&] {
        const AffineTrajectory traj(*report.plan, sc.formation.positions);
        SwarmConfig cfg;
        cfg.params = sc.vehicle.params;
        cfg.gains = {sc.vehicle.gains};
        cfg.yaw_gains = sc.vehicle.yaw_gains;
        cfg.dt = report.dt;
        cfg.threads = flags.threads;
        cfg.log_stride = flags.log_stride.value_or(sc.solver.log_stride);
        report.simulation = simulate_nonlinear(traj, *report.topology, cfg);
        if (report.simulation->aborted) {
          throw StageFailure("vehicle singularity at t = " + std::to_string(report.simulation->abort_time) +
                             " s: " + report.simulation->abort_reason);
        }
      })) {
    return report;
  }
  if (flags.stop_after == StopAfter::Simulate) return report;

  run_stage(report, "audit", [&] {
    const SafetyMonitor monitor{sc.delta, sc.epsilon, sc.r_max, sc.grid ? &*sc.grid : nullptr};
    report.audit = audit_safety(report.simulation->log, monitor);
  });
  if (report.audit && !report.audit->pass()) {
    report.failed_stage = "audit";
    report.exit_code = kExitAuditFail;
  }
  return report;
}

void write_trajectory_csv(const std::string& path, const TrajectoryLog& log) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw InvalidArgument("cannot write " + path);
  std::fputs("t,agent_id,x,y,z,dev,p,phi,theta,psi\n", f);
  for (int s = 0; s < log.samples(); ++s) {
    for (int i = 0; i < log.agents; ++i) {
      const AgentRecord& r = log.at(s, i);
      std::fprintf(f, "%.6f,%d,%.9f,%.9f,%.9f,%.9e,%.9f,%.9e,%.9e,%.9e\n", log.times[s], i, r.r[0], r.r[1],
                   r.r[2], r.dev, r.p, r.euler[0], r.euler[1], r.euler[2]);
    }
  }
  std::fclose(f);
}

TrajectoryLog read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,agent_id,x,y,z,dev,p,phi,theta,psi", 0) != 0) {
    throw InvalidArgument(path + ": unexpected trajectory header");
  }
  TrajectoryLog log;
  std::vector<std::vector<AgentRecord>> rows;
  int max_agent = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double t = 0.0;
    int id = 0;
    AgentRecord r;
    if (std::sscanf(line.c_str(), "%lf,%d,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &t, &id, &r.r[0], &r.r[1], &r.r[2],
                    &r.dev, &r.p, &r.euler[0], &r.euler[1], &r.euler[2]) != 10 ||
        id < 0) {
      throw InvalidArgument(path + ": malformed row '" + line + "'");
    }
    if (log.times.empty() || t != log.times.back()) {
      log.times.push_back(t);
      rows.emplace_back();
    }
    if (id != static_cast<int>(rows.back().size())) throw InvalidArgument(path + ": agent rows out of order");
    rows.back().push_back(r);
    max_agent = std::max(max_agent, id);
  }
  log.agents = max_agent + 1;
  for (auto& row : rows) {
    if (static_cast<int>(row.size()) != log.agents) throw InvalidArgument(path + ": incomplete sample");
    log.records.insert(log.records.end(), row.begin(), row.end());
  }
  log.centers.assign(log.times.size(), Vec3::Zero());
  return log;
}

namespace {

Vec3 vec3_of(const ojson& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }

DeformationFeatures features_of(const ojson& j) {
  DeformationFeatures f;
  for (int k = 0; k < 3; ++k) f.stretch(k) = j.at("lambda").at(k).get<double>();
  for (int k = 0; k < 6; ++k) f.coeffs[3 + k] = j.at("beta").at(k).get<double>();
  return f;
}

}  // namespace

MotionPlan plan_from_json(const std::string& text) {
  try {
    const ojson doc = ojson::parse(text);
    std::vector<Vec3> waypoints;
    for (const auto& w : doc.at("waypoints")) waypoints.push_back(vec3_of(w));
    SafetyBounds b;
    const auto& bj = doc.at("bounds");
    b.delta = bj.at("delta").get<double>();
    b.epsilon = bj.at("epsilon").get<double>();
    b.r_max = bj.at("r_max").get<double>();
    b.d_min = bj.at("d_min").get<double>();
    b.d_max = bj.at("d_max").get<double>();
    b.lambda_min = bj.at("lambda_min").get<double>();
    b.lambda_max = bj.at("lambda_max").get<double>();
    return make_plan(std::move(waypoints), features_of(doc.at("theta0")), features_of(doc.at("thetaf")), b,
                     doc.at("t0").get<double>(), doc.at("tf").get<double>());
  } catch (const ojson::exception& e) {
    throw InvalidArgument(std::string("malformed plan: ") + e.what());
  }
}

AuditReport audit_trajectory(const Scenario& sc, const MotionPlan& plan, TrajectoryLog& log) {
  if (log.agents != sc.formation.size()) throw InvalidArgument("trajectory and scenario disagree on the agent count");
  const AffineTrajectory traj(plan, sc.formation.positions);
  for (int s = 0; s < log.samples(); ++s) {
    const double t = std::clamp(log.times[s], plan.t0, plan.tf);
    const auto sample = traj.sample(t);
    log.centers[s] = Vec3(sample.d[0].value(), sample.d[1].value(), sample.d[2].value());
    for (int i = 0; i < log.agents; ++i) {
      AgentRecord& r = log.at(s, i);
      const auto ra = traj.desired(sample, i);
      r.r_a = Vec3(ra[0].value(), ra[1].value(), ra[2].value());
      r.dev = (r.r - r.r_a).norm();
    }
  }
  const SafetyMonitor monitor{sc.delta, sc.epsilon, sc.r_max, sc.grid ? &*sc.grid : nullptr};
  return audit_safety(log, monitor);
}

std::string default_output_dir() {
  const char* env = std::getenv("AFFINE_SWARM_OUT");
  return env && *env ? std::string(env) : std::string("out");
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

// Time series with one column per agent.
void write_series(const std::filesystem::path& path, const TrajectoryLog& log,
                  const std::function<double(const AgentRecord&)>& value) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw InvalidArgument("cannot write " + path.string());
  std::fputs("t", f);
  for (int i = 0; i < log.agents; ++i) std::fprintf(f, ",agent_%d", i);
  std::fputc('\n', f);
  for (int s = 0; s < log.samples(); ++s) {
    std::fprintf(f, "%.6f", log.times[s]);
    for (int i = 0; i < log.agents; ++i) std::fprintf(f, ",%.9e", value(log.at(s, i)));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

ojson report_json(const RunReport& r) {
  ojson doc;
  doc["scenario"] = r.scenario_name;
  doc["status"] = r.exit_code == kExitOk ? "pass" : (r.exit_code == kExitAuditFail ? "audit_fail" : "failed");
  doc["exit_code"] = r.exit_code;
  doc["failed_stage"] = r.failed_stage.empty() ? ojson(nullptr) : ojson(r.failed_stage);
  doc["dt"] = r.dt;
  doc["threads"] = r.threads;
  auto& stages = doc["stages"] = ojson::array();
  for (const auto& s : r.stages) {
    ojson j{{"name", s.name}, {"status", s.status}, {"seconds", s.seconds}};
    if (!s.message.empty()) j["message"] = s.message;
    stages.push_back(std::move(j));
  }
  if (r.stability) {
    doc["certification"] = {{"hurwitz", r.stability->hurwitz},
                            {"max_real_eigenvalue", r.stability->max_real_eigenvalue},
                            {"rho_G", r.stability->rho_g},
                            {"G_nonnegative", r.stability->g_nonnegative}};
  }
  if (!r.gain_reports.empty()) {
    doc["gains"] = {{"routh_stable", r.gain_reports.front().routh_stable},
                    {"roots_stable", r.gain_reports.front().roots_stable},
                    {"max_real_root", r.gain_reports.front().max_real_root}};
    if (r.error_spectral_abscissa) doc["gains"]["max_real_eig_A_MQS"] = *r.error_spectral_abscissa;
  }
  if (r.plan) {
    doc["plan"] = {{"waypoints", r.plan->waypoints.size()}, {"t0", r.plan->t0}, {"tf", r.plan->tf}};
  }
  if (r.travel_time) {
    doc["travel_time"] = {{"T", r.travel_time->duration},
                          {"predicted_peak_deviation", r.travel_time->peak_deviation},
                          {"bound", r.travel_time->bound},
                          {"evaluations", r.travel_time->evaluations.size()}};
  }
  if (r.simulation) {
    const auto& m = r.simulation->monitor;
    doc["simulation"] = {{"steps", m.steps},
                         {"max_deviation", m.max_deviation},
                         {"max_deviation_time", m.max_deviation_time},
                         {"min_separation", m.min_separation},
                         {"max_containment", m.max_containment},
                         {"saturated_inputs", m.saturated_inputs},
                         {"aborted", r.simulation->aborted}};
  }
  if (r.audit) doc["audit_pass"] = r.audit->pass();
  return doc;
}

std::string summary_text(const RunReport& r, const Scenario& sc) {
  std::ostringstream os;
  char buf[256];
  os << "scenario: " << (sc.name.empty() ? "(unnamed)" : sc.name) << "\n";
  os << "agents: " << sc.formation.size() << ", leaders: " << sc.formation.leaders.size()
     << ", dimension: " << sc.formation.dimension << "\n";
  for (const auto& s : r.stages) {
    std::snprintf(buf, sizeof buf, "  %-12s %-8s %9.3f s", s.name.c_str(), s.status.c_str(), s.seconds);
    os << buf;
    if (!s.message.empty()) os << "  " << s.message;
    os << "\n";
  }
  if (r.stability) {
    std::snprintf(buf, sizeof buf, "certification: hurwitz=%s max Re eig(L)=%.6g rho(G)=%.6g\n",
                  r.stability->hurwitz ? "yes" : "no", r.stability->max_real_eigenvalue, r.stability->rho_g);
    os << buf;
  }
  if (r.error_spectral_abscissa) {
    std::snprintf(buf, sizeof buf, "error dynamics: max Re eig(A_MQS)=%.6g\n", *r.error_spectral_abscissa);
    os << buf;
  }
  if (r.bounds) {
    std::snprintf(buf, sizeof buf, "bounds: d_min=%.6g d_max=%.6g lambda_min=%.6g lambda_max=%.6g\n",
                  r.bounds->d_min, r.bounds->d_max, r.bounds->lambda_min, r.bounds->lambda_max);
    os << buf;
  }
  if (r.plan) {
    std::snprintf(buf, sizeof buf, "plan: %zu waypoints, horizon [%.6g, %.6g] s\n", r.plan->waypoints.size(),
                  r.plan->t0, r.plan->tf);
    os << buf;
  }
  if (r.travel_time) {
    std::snprintf(buf, sizeof buf, "travel time: T=%.6g s, predicted peak deviation %.6g m (bound %.6g m)\n",
                  r.travel_time->duration, r.travel_time->peak_deviation, r.travel_time->bound);
    os << buf;
  }
  if (r.simulation) {
    const auto& m = r.simulation->monitor;
    std::snprintf(buf, sizeof buf,
                  "simulation: max deviation %.6g m (agent %d, t=%.6g s), min separation %.6g m, max containment "
                  "%.6g m\n",
                  m.max_deviation, m.max_deviation_agent, m.max_deviation_time, m.min_separation, m.max_containment);
    os << buf;
  }
  if (r.audit) os << "audit: " << (r.audit->pass() ? "PASS" : "FAIL") << "\n";
  os << "exit code: " << r.exit_code << "\n";
  return os.str();
}

}  // namespace

std::vector<std::string> emit_outputs(const RunReport& r, const Scenario& sc, const std::string& outdir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec || !fs::is_directory(outdir)) throw InvalidArgument("cannot create output directory " + outdir);
  const fs::path dir(outdir);
  std::vector<std::string> files;
  const auto add = [&](const std::string& name, const std::function<void(const fs::path&)>& write) {
    write(dir / name);
    files.push_back(name);
  };

  if (r.topology && r.stability) {
    add("topology.json", [&](const fs::path& p) { write_text(p, topology_audit_json(*r.topology, *r.stability)); });
  }
  if (r.plan) {
    add("plan.json", [&](const fs::path& p) {
      write_text(p, plan_json(*r.plan, r.validation ? &*r.validation : nullptr));
    });
  }
  if (r.simulation) {
    const TrajectoryLog& log = r.simulation->log;
    add("trajectory.csv", [&](const fs::path& p) { write_trajectory_csv(p.string(), log); });
    add("series_deviation.csv", [&](const fs::path& p) { write_series(p, log, [](auto& a) { return a.dev; }); });
    add("series_thrust.csv", [&](const fs::path& p) { write_series(p, log, [](auto& a) { return a.p; }); });
    add("series_roll.csv", [&](const fs::path& p) { write_series(p, log, [](auto& a) { return a.euler[0]; }); });
    add("series_pitch.csv", [&](const fs::path& p) { write_series(p, log, [](auto& a) { return a.euler[1]; }); });
    add("series_x.csv", [&](const fs::path& p) { write_series(p, log, [](auto& a) { return a.r[0]; }); });
    add("series_y.csv", [&](const fs::path& p) { write_series(p, log, [](auto& a) { return a.r[1]; }); });
    add("series_z.csv", [&](const fs::path& p) { write_series(p, log, [](auto& a) { return a.r[2]; }); });
  }
  if (r.audit) {
    add("audit.json", [&](const fs::path& p) {
      write_text(p, audit_json(*r.audit, r.simulation ? &r.simulation->monitor : nullptr));
    });
  }
  add("report.json", [&](const fs::path& p) { write_text(p, report_json(r).dump(2)); });
  add("summary.txt", [&](const fs::path& p) { write_text(p, summary_text(r, sc)); });

  ojson manifest;
  manifest["status"] = r.exit_code == kExitOk ? "complete" : "incomplete";
  manifest["exit_code"] = r.exit_code;
  manifest["failed_stage"] = r.failed_stage.empty() ? ojson(nullptr) : ojson(r.failed_stage);
  auto& stages = manifest["stages"] = ojson::array();
  for (const auto& s : r.stages) stages.push_back({{"name", s.name}, {"status", s.status}});
  files.push_back("MANIFEST.json");
  manifest["files"] = files;
  write_text(dir / "MANIFEST.json", manifest.dump(2));
  return files;
}

}  // namespace affine_swarm
