#include "affine_swarm/swarm_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <tbb/info.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include "affine_swarm/errors.hpp"
#include "json.hpp"

namespace affine_swarm {

namespace {

constexpr int kHashThreshold = 64;

double brute_force_min_distance(std::span<const Vec3> points) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) best = std::min(best, (points[i] - points[j]).norm());
  }
  return best;
}

struct CellKey {
  long long x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    return std::hash<long long>()(k.x * 73856093LL ^ k.y * 19349663LL ^ k.z * 83492791LL);
  }
};

// Runs body(i) for every agent, serially or on a bounded arena.
template <typename Body>
void for_each_agent(int count, tbb::task_arena* arena, const Body& body) {
  if (!arena) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  arena->execute([&] { tbb::parallel_for(0, count, [&](int i) { body(i); }); });
}

}  // namespace

double min_pairwise_distance(std::span<const Vec3> points, double hash_cell) {
  if (points.size() < 2) return std::numeric_limits<double>::infinity();
  if (static_cast<int>(points.size()) <= kHashThreshold || !(hash_cell > 0.0)) {
    return brute_force_min_distance(points);
  }
  std::unordered_map<CellKey, std::vector<int>, CellKeyHash> cells;
  std::vector<CellKey> keys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    keys[i] = {static_cast<long long>(std::floor(points[i][0] / hash_cell)),
               static_cast<long long>(std::floor(points[i][1] / hash_cell)),
               static_cast<long long>(std::floor(points[i][2] / hash_cell))};
    cells[keys[i]].push_back(static_cast<int>(i));
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (long long dz = -1; dz <= 1; ++dz) {
      for (long long dy = -1; dy <= 1; ++dy) {
        for (long long dx = -1; dx <= 1; ++dx) {
          const auto it = cells.find({keys[i].x + dx, keys[i].y + dy, keys[i].z + dz});
          if (it == cells.end()) continue;
          for (int j : it->second) {
            if (j > static_cast<int>(i)) best = std::min(best, (points[i] - points[j]).norm());
          }
        }
      }
    }
  }
  // Pairs farther apart than one cell are not all visited.
  return best < hash_cell ? best : brute_force_min_distance(points);
}

SimulationResult simulate_nonlinear(const AffineTrajectory& trajectory, const CommTopology& topology,
                                    const SwarmConfig& config) {
  const int n = topology.size();
  if (static_cast<int>(trajectory.initial_positions().size()) != n) {
    throw InvalidArgument("trajectory and topology disagree on the agent count");
  }
  std::vector<Gains> gains = config.gains;
  if (gains.size() == 1) gains.assign(n, gains.front());
  if (static_cast<int>(gains.size()) != n) throw InvalidArgument("need one gain set per agent");
  std::vector<char> is_leader(n, 0);
  for (int id : topology.leaders) is_leader[id] = 1;

  std::optional<tbb::task_arena> arena;
  if (config.threads != 1) {
    if (config.threads <= 0) {
      arena.emplace();
    } else {
      // More workers than cores only adds contention (and a runtime warning).
      arena.emplace(std::min(config.threads, tbb::info::default_concurrency()));
    }
  }
  tbb::task_arena* arena_ptr = arena ? &*arena : nullptr;

  const auto grid = time_grid(trajectory.plan(), config.dt);
  const int stride = std::max(1, config.log_stride);

  SimulationResult result;
  result.log.agents = n;
  result.monitor.min_separation = std::numeric_limits<double>::infinity();

  const auto s0 = trajectory.sample(grid.front().t, grid.front().segment);
  std::vector<QuadState> x(n);
  for (int i = 0; i < n; ++i) {
    const auto ra = trajectory.desired(s0, i);
    x[i] = QuadState::hover(Vec3(ra[0].value(), ra[1].value(), ra[2].value()), config.params);
  }

  // Hash cells scaled to the initial spacing keep a few agents per cell.
  const double hash_cell = 2.0 * brute_force_min_distance(trajectory.initial_positions());

  std::vector<KinematicChain> chains(n);
  std::vector<StateVector> derivs[4];
  for (auto& d : derivs) d.resize(n);
  std::vector<std::string> failures(n);
  std::vector<char> saturated(n, 0);

  // One RK4 stage: derivatives of every agent at (states, t) on segment seg.
  const auto stage = [&](const std::vector<QuadState>& states, const AffineTrajectory::Sample& s,
                         std::vector<StateVector>& out) {
    for_each_agent(n, arena_ptr, [&](int i) { chains[i] = kinematic_chain(states[i], config.params); });
    for_each_agent(n, arena_ptr, [&](int i) {
      std::array<Vec3, 4> ref;
      if (is_leader[i]) {
        const auto ra = trajectory.desired(s, i);
        for (int k = 0; k < 4; ++k) ref[k] = Vec3(ra[0].derivative(k), ra[1].derivative(k), ra[2].derivative(k));
      } else {
        for (auto& v : ref) v.setZero();
        const auto& nbrs = topology.in_neighbors[i];
        for (std::size_t m = 0; m < nbrs.size(); ++m) {
          const double w = topology.weights[i][static_cast<Eigen::Index>(m)];
          for (int k = 0; k < 4; ++k) ref[k] += w * chains[nbrs[m]].d[k];
        }
      }
      try {
        const OuterCommand cmd = outer_loop(chains[i], states[i], ref, gains[i], config.yaw_gains);
        const ControlResult u = feedback_linearize(states[i], cmd, config.params);
        saturated[i] = u.saturated ? 1 : 0;
        out[i] = extended_derivative(states[i], u.input, config.params);
      } catch (const Error& e) {
        failures[i] = "agent " + std::to_string(i) + ": " + e.what();
        out[i].setZero();
      }
    });
    for (int i = 0; i < n; ++i) {
      if (!failures[i].empty()) throw SingularityError(failures[i]);
    }
  };

  std::vector<Vec3> positions(n);
  const auto monitor = [&](double t, const AffineTrajectory::Sample& s, bool log_it) {
    const Vec3 d(s.d[0].value(), s.d[1].value(), s.d[2].value());
    auto& m = result.monitor;
    for (int i = 0; i < n; ++i) {
      positions[i] = x[i].r;
      const auto ra = trajectory.desired(s, i);
      const Vec3 r_a(ra[0].value(), ra[1].value(), ra[2].value());
      const double dev = (x[i].r - r_a).norm();
      if (dev > m.max_deviation) {
        m.max_deviation = dev;
        m.max_deviation_time = t;
        m.max_deviation_agent = i;
      }
      const double cont = (x[i].r - d).norm();
      if (cont > m.max_containment) {
        m.max_containment = cont;
        m.max_containment_time = t;
      }
      if (log_it) {
        AgentRecord rec;
        rec.r = x[i].r;
        rec.r_a = r_a;
        rec.dev = dev;
        rec.p = x[i].p;
        rec.euler = x[i].euler;
        result.log.records.push_back(rec);
      }
    }
    const double sep = min_pairwise_distance(positions, hash_cell);
    if (sep < m.min_separation) {
      m.min_separation = sep;
      m.min_separation_time = t;
    }
    if (log_it) {
      // Local desired positions need every agent's logged position first.
      const std::size_t base = result.log.records.size() - static_cast<std::size_t>(n);
      for (int i = 0; i < n; ++i) {
        auto& rec = result.log.records[base + i];
        if (is_leader[i]) {
          rec.r_d = rec.r_a;
        } else {
          rec.r_d.setZero();
          const auto& nbrs = topology.in_neighbors[i];
          for (std::size_t k = 0; k < nbrs.size(); ++k) {
            rec.r_d += topology.weights[i][static_cast<Eigen::Index>(k)] * x[nbrs[k]].r;
          }
        }
      }
      result.log.times.push_back(t);
      result.log.centers.push_back(d);
    }
  };

  monitor(grid.front().t, s0, true);
  std::vector<QuadState> tmp(n);
  long long last_logged = 0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t = grid[k].t;
    const double h = grid[k + 1].t - t;
    const int seg = grid[k].segment;
    const auto s1 = trajectory.sample(t, seg);
    const auto s2 = trajectory.sample(t + 0.5 * h, seg);
    const auto s4 = trajectory.sample(grid[k + 1].t, seg);
    try {
      stage(x, s1, derivs[0]);
      for (int i = 0; i < n; ++i) tmp[i] = QuadState::from_vector(x[i].to_vector() + 0.5 * h * derivs[0][i]);
      stage(tmp, s2, derivs[1]);
      for (int i = 0; i < n; ++i) tmp[i] = QuadState::from_vector(x[i].to_vector() + 0.5 * h * derivs[1][i]);
      stage(tmp, s2, derivs[2]);
      for (int i = 0; i < n; ++i) tmp[i] = QuadState::from_vector(x[i].to_vector() + h * derivs[2][i]);
      stage(tmp, s4, derivs[3]);
    } catch (const Error& e) {
      result.aborted = true;
      result.abort_time = t;
      result.abort_reason = e.what();
      if (last_logged != static_cast<long long>(k)) monitor(t, s1, true);
      break;
    }
    for (int i = 0; i < n; ++i) {
      const StateVector next = x[i].to_vector() +
                               h / 6.0 * (derivs[0][i] + 2.0 * derivs[1][i] + 2.0 * derivs[2][i] + derivs[3][i]);
      x[i] = QuadState::from_vector(next);
      result.monitor.saturated_inputs += saturated[i];
    }
    ++result.monitor.steps;
    const long long step = static_cast<long long>(k) + 1;
    const bool log_it = step % stride == 0 || k + 2 == grid.size();
    if (log_it) last_logged = step;
    monitor(grid[k + 1].t, s4, log_it);
  }
  return result;
}

AuditReport audit_safety(const TrajectoryLog& log, const SafetyMonitor& monitor) {
  AuditReport report;
  report.delta = monitor.delta;
  report.epsilon = monitor.epsilon;
  report.r_max = monitor.r_max;
  report.separation.worst = std::numeric_limits<double>::infinity();
  report.clearance.worst = std::numeric_limits<double>::infinity();
  const auto flag = [](AuditCheck& check, const Violation& v) {
    check.pass = false;
    ++check.violations;
    if (!check.first) check.first = v;
  };
  const int n = log.agents;
  const double search = monitor.grid ? monitor.epsilon + monitor.grid->cell_size() : 0.0;
  for (int s = 0; s < log.samples(); ++s) {
    const double t = log.times[s];
    for (int i = 0; i < n; ++i) {
      const AgentRecord& a = log.at(s, i);
      report.deviation.worst = std::max(report.deviation.worst, a.dev);
      if (a.dev > monitor.delta) flag(report.deviation, {t, i, -1, a.dev});
      const double cont = (a.r - log.centers[s]).norm();
      report.containment.worst = std::max(report.containment.worst, cont);
      if (cont > monitor.r_max) flag(report.containment, {t, i, -1, cont});
      if (monitor.grid) {
        const double c = monitor.grid->clearance(a.r, search);
        report.clearance.worst = std::min(report.clearance.worst, c);
        if (c <= monitor.epsilon) flag(report.clearance, {t, i, -1, c});
      }
      for (int j = i + 1; j < n; ++j) {
        const double dist = (a.r - log.at(s, j).r).norm();
        report.separation.worst = std::min(report.separation.worst, dist);
        if (dist <= 2.0 * monitor.epsilon) flag(report.separation, {t, i, j, dist});
      }
    }
  }
  return report;
}

namespace {

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json check_json(const AuditCheck& c, const char* limit_name, double limit) {
  nlohmann::ordered_json j;
  j["pass"] = c.pass;
  j[limit_name] = limit;
  j["worst"] = number_or_null(c.worst);
  j["violations"] = c.violations;
  if (c.first) {
    nlohmann::ordered_json v;
    v["t"] = c.first->t;
    v["agent"] = c.first->agent;
    if (c.first->other >= 0) v["other"] = c.first->other;
    v["value"] = c.first->value;
    j["first_violation"] = std::move(v);
  }
  return j;
}

}  // namespace

std::string audit_json(const AuditReport& report, const MonitorSummary* monitor) {
  nlohmann::ordered_json doc;
  doc["pass"] = report.pass();
  doc["separation"] = check_json(report.separation, "min_allowed_exclusive", 2.0 * report.epsilon);
  doc["containment"] = check_json(report.containment, "r_max", report.r_max);
  doc["deviation"] = check_json(report.deviation, "delta", report.delta);
  doc["clearance"] = check_json(report.clearance, "epsilon", report.epsilon);
  if (monitor) {
    nlohmann::ordered_json m;
    m["steps"] = monitor->steps;
    m["max_deviation"] = monitor->max_deviation;
    m["max_deviation_time"] = monitor->max_deviation_time;
    m["max_deviation_agent"] = monitor->max_deviation_agent;
    m["min_separation"] = number_or_null(monitor->min_separation);
    m["min_separation_time"] = monitor->min_separation_time;
    m["max_containment"] = monitor->max_containment;
    m["max_containment_time"] = monitor->max_containment_time;
    m["saturated_inputs"] = monitor->saturated_inputs;
    doc["monitor"] = std::move(m);
  }
  return doc.dump(2);
}

}  // namespace affine_swarm
