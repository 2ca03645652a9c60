#include "affine_swarm/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/SVD>

#include "affine_swarm/planner.hpp"
#include "json.hpp"

namespace affine_swarm {

using nlohmann::json;

ScenarioError::ScenarioError(std::vector<std::string> problems)
    : Error([&] {
        std::string msg = "invalid scenario:";
        for (const auto& p : problems) msg += "\n  " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

namespace {

constexpr double kTargetTolerance = 1e-9;

// Collects every problem instead of stopping at the first one.
class Reader {
 public:
  std::vector<std::string> problems;

  void fail(const std::string& path, const std::string& what) { problems.push_back(path + ": " + what); }

  const json* member(const json& obj, const std::string& key, const std::string& path, bool required) {
    if (!obj.is_object()) {
      fail(path, "expected an object");
      return nullptr;
    }
    const auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(path + "." + key, "missing");
      return nullptr;
    }
    return &*it;
  }

  std::optional<double> number(const json& obj, const std::string& key, const std::string& path,
                               bool required) {
    const json* v = member(obj, key, path, required);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      fail(path + "." + key, "expected a number");
      return std::nullopt;
    }
    return v->get<double>();
  }

  double positive(const json& obj, const std::string& key, const std::string& path, double fallback,
                  bool required = false) {
    const auto v = number(obj, key, path, required);
    if (!v) return fallback;
    if (!(*v > 0.0)) fail(path + "." + key, "must be positive");
    return *v;
  }

  template <int Size>
  std::optional<Eigen::Matrix<double, Size, 1>> vector(const json& v, const std::string& path) {
    if (!v.is_array() || static_cast<int>(v.size()) != Size) {
      fail(path, "expected " + std::to_string(Size) + " numbers");
      return std::nullopt;
    }
    Eigen::Matrix<double, Size, 1> out;
    for (int k = 0; k < Size; ++k) {
      if (!v[k].is_number()) {
        fail(path, "expected " + std::to_string(Size) + " numbers");
        return std::nullopt;
      }
      out[k] = v[k].get<double>();
    }
    return out;
  }
};

int affine_rank(const std::vector<Vec3>& points) {
  if (points.size() < 2) return 0;
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  Eigen::MatrixXd m(3, points.size());
  for (std::size_t i = 0; i < points.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = points[i] - centroid;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv[0] <= 0.0) return 0;
  int rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k) rank += sv[k] > 1e-9 * sv[0] ? 1 : 0;
  return rank;
}

std::optional<std::vector<int>> id_list(Reader& rd, const json& v, const std::string& path, int count) {
  if (!v.is_array()) {
    rd.fail(path, "expected a list of agent ids");
    return std::nullopt;
  }
  std::vector<int> ids;
  std::set<int> seen;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number_integer()) {
      rd.fail(path + "[" + std::to_string(k) + "]", "expected an integer id");
      return std::nullopt;
    }
    const int id = v[k].get<int>();
    if (id < 0 || id >= count) {
      rd.fail(path + "[" + std::to_string(k) + "]", "id " + std::to_string(id) + " out of range");
      return std::nullopt;
    }
    if (!seen.insert(id).second) {
      rd.fail(path, "duplicate id " + std::to_string(id));
      return std::nullopt;
    }
    ids.push_back(id);
  }
  return ids;
}

// Reads lambda/rotation/axis into features. Returns true when the axis is "auto".
bool read_features(Reader& rd, const json& obj, const std::string& path, DeformationFeatures& f,
                   bool lambda_required, bool& axis_given) {
  f = DeformationFeatures::undeformed();
  axis_given = false;
  if (const json* v = rd.member(obj, "lambda", path, lambda_required)) {
    if (auto l = rd.vector<3>(*v, path + ".lambda")) f.coeffs.head<3>() = *l;
  }
  if (const json* v = rd.member(obj, "rotation", path, false)) {
    if (auto r = rd.vector<3>(*v, path + ".rotation")) f.coeffs.segment<3>(3) = *r;
  }
  if (const json* v = rd.member(obj, "axis", path, false)) {
    if (v->is_string()) {
      if (v->get<std::string>() == "auto") return true;
      rd.fail(path + ".axis", "expected three angles or \"auto\"");
    } else if (auto a = rd.vector<3>(*v, path + ".axis")) {
      f.coeffs.tail<3>() = *a;
      axis_given = true;
    }
  }
  return false;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError({std::string("parse error: ") + e.what()});
  }
  Reader rd;
  Scenario sc;
  sc.base_dir = base_dir;
  if (!doc.is_object()) throw ScenarioError({"scenario: expected a JSON object"});
  if (const auto it = doc.find("name"); it != doc.end() && it->is_string()) sc.name = it->get<std::string>();

  // Formation.
  bool formation_ok = false;
  if (const json* f = rd.member(doc, "formation", "scenario", true)) {
    bool positions_ok = true;
    if (const json* pos = rd.member(*f, "positions", "formation", true)) {
      if (!pos->is_array() || pos->size() < 2) {
        rd.fail("formation.positions", "expected at least two positions");
        positions_ok = false;
      } else {
        for (std::size_t i = 0; i < pos->size(); ++i) {
          auto p = rd.vector<3>((*pos)[i], "formation.positions[" + std::to_string(i) + "]");
          if (p) {
            sc.formation.positions.push_back(*p);
          } else {
            positions_ok = false;
          }
        }
      }
    } else {
      positions_ok = false;
    }
    if (positions_ok) {
      const int count = sc.formation.size();
      int n = affine_rank(sc.formation.positions);
      if (const auto dim = rd.number(*f, "dimension", "formation", false)) {
        if (*dim != 1 && *dim != 2 && *dim != 3) {
          rd.fail("formation.dimension", "must be 1, 2 or 3");
        } else if (static_cast<int>(*dim) > n) {
          rd.fail("formation.dimension", "declared " + std::to_string(static_cast<int>(*dim)) +
                                             " but the agents span only " + std::to_string(n) + " dimensions");
        } else {
          // Agents off the declared hyperplane are named by the leader check below.
          n = static_cast<int>(*dim);
        }
      }
      if (n == 0) rd.fail("formation.positions", "all agents coincide");
      sc.formation.dimension = std::max(n, 1);
      std::optional<std::vector<int>> leaders;
      if (const json* l = rd.member(*f, "leaders", "formation", true)) leaders = id_list(rd, *l, "formation.leaders", count);
      if (leaders) {
        sc.formation.leaders = *leaders;
        if (static_cast<int>(leaders->size()) != n + 1) {
          rd.fail("formation.leaders", "a " + std::to_string(n) + "-D formation needs " + std::to_string(n + 1) +
                                           " leaders, got " + std::to_string(leaders->size()));
        } else {
          const auto lp = sc.formation.leader_positions();
          const int rank = rank_fn(lp, n);
          if (rank != n) {
            rd.fail("formation.leaders", "leaders violate the rank condition (rank " + std::to_string(rank) +
                                             ", need " + std::to_string(n) + ")");
          } else {
            try {
              leader_coefficients(sc.formation.positions, lp, n);
              formation_ok = true;
            } catch (const OffHyperplaneError& e) {
              rd.fail("formation.positions[" + std::to_string(e.agent()) + "]", e.what());
            }
          }
        }
      }
      const json* b = rd.member(*f, "boundary", "formation", false);
      const json* in = rd.member(*f, "interior", "formation", false);
      if (b || in) {
        sc.roles_given = true;
        auto bl = b ? id_list(rd, *b, "formation.boundary", count) : std::optional<std::vector<int>>{};
        auto il = in ? id_list(rd, *in, "formation.interior", count) : std::optional<std::vector<int>>{};
        if (!b || !in) rd.fail("formation", "boundary and interior must be given together");
        if (bl && il) {
          std::set<int> all(bl->begin(), bl->end());
          bool disjoint = true;
          for (int id : *il) disjoint = all.insert(id).second && disjoint;
          if (!disjoint) rd.fail("formation.interior", "overlaps the boundary set");
          if (static_cast<int>(all.size()) != count) rd.fail("formation", "boundary and interior must cover every agent");
          for (int id : sc.formation.leaders) {
            if (std::find(bl->begin(), bl->end(), id) == bl->end()) {
              rd.fail("formation.boundary", "leader " + std::to_string(id) + " is not listed as boundary");
            }
          }
          sc.formation.boundary = *bl;
          sc.formation.interior = *il;
        }
      } else if (formation_ok) {
        try {
          auto roles = classify_roles(sc.formation.positions, n, sc.formation.leaders);
          sc.formation.boundary = std::move(roles.boundary);
          sc.formation.interior = std::move(roles.interior);
        } catch (const Error& e) {
          rd.fail("formation.leaders", e.what());
          formation_ok = false;
        }
      }
    }
  }

  // Initial and target configurations.
  bool initial_axis_given = false, target_axis_given = false;
  bool initial_auto = false, target_auto = false;
  sc.theta0 = DeformationFeatures::undeformed();
  if (const json* init = rd.member(doc, "initial", "scenario", false)) {
    initial_auto = read_features(rd, *init, "initial", sc.theta0, false, initial_axis_given);
    if (const json* d0 = rd.member(*init, "d0", "initial", false)) {
      if (auto v = rd.vector<3>(*d0, "initial.d0")) sc.d0 = *v;
    } else {
      Vec3 c = Vec3::Zero();
      for (const auto& p : sc.formation.positions) c += p;
      if (!sc.formation.positions.empty()) sc.d0 = c / static_cast<double>(sc.formation.positions.size());
    }
  } else {
    Vec3 c = Vec3::Zero();
    for (const auto& p : sc.formation.positions) c += p;
    if (!sc.formation.positions.empty()) sc.d0 = c / static_cast<double>(sc.formation.positions.size());
  }
  if (const json* tgt = rd.member(doc, "target", "scenario", true)) {
    target_auto = read_features(rd, *tgt, "target", sc.thetaf, true, target_axis_given);
    if (const json* dfv = rd.member(*tgt, "d_f", "target", true)) {
      if (auto v = rd.vector<3>(*dfv, "target.d_f")) sc.df = *v;
    }
    if (const json* q = rd.member(*tgt, "Q_f", "target", false)) {
      if (!q->is_array() || q->size() != 3) {
        rd.fail("target.Q_f", "expected a 3x3 matrix");
      } else {
        Mat3 m;
        bool ok = true;
        for (int r = 0; r < 3; ++r) {
          auto row = rd.vector<3>((*q)[r], "target.Q_f[" + std::to_string(r) + "]");
          if (row) {
            m.row(r) = row->transpose();
          } else {
            ok = false;
          }
        }
        if (ok) sc.target_jacobian = m;
      }
    }
  }
  sc.shear_auto = initial_auto || target_auto;
  if (sc.shear_auto && formation_ok) {
    try {
      const ShearAngles shear = shear_angles(sc.formation.positions);
      const Vec3 axis(0.0, shear.beta5, shear.beta6);
      if (initial_auto) sc.theta0.coeffs.tail<3>() = axis;
      if (target_auto) sc.thetaf.coeffs.tail<3>() = axis;
    } catch (const Error& e) {
      rd.fail("initial.axis", e.what());
    }
  }
  if (!target_axis_given && !target_auto) sc.thetaf.coeffs.tail<3>() = sc.theta0.coeffs.tail<3>();

  const Mat3 q0 = build_jacobian(sc.theta0);
  if ((q0 - Mat3::Identity()).cwiseAbs().maxCoeff() > kTargetTolerance) {
    rd.fail("initial", "features must describe the undeformed formation (unit stretches, no rotation)");
  }
  if (sc.target_jacobian) {
    const double residual = (build_jacobian(sc.thetaf) - *sc.target_jacobian).cwiseAbs().maxCoeff();
    if (residual > kTargetTolerance) {
      rd.fail("target.Q_f", "inconsistent with the target features (max residual " + std::to_string(residual) + ")");
    }
  }

  // Safety.
  if (const json* s = rd.member(doc, "safety", "scenario", true)) {
    sc.delta = rd.positive(*s, "delta", "safety", 0.0, true);
    sc.epsilon = rd.positive(*s, "epsilon", "safety", 0.0, true);
    sc.r_max = rd.positive(*s, "r_max", "safety", 0.0, true);
    if (sc.r_max > 0.0 && !(sc.r_max > sc.delta + sc.epsilon)) rd.fail("safety.r_max", "must exceed delta + epsilon");
  }

  // Obstacles.
  if (const json* g = rd.member(doc, "grid", "scenario", false)) {
    auto& src = sc.grid_source;
    if (const json* file = rd.member(*g, "file", "grid", false)) {
      if (!file->is_string()) {
        rd.fail("grid.file", "expected a path");
      } else {
        src.file = file->get<std::string>();
        std::filesystem::path p(src.file);
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        try {
          sc.grid = load_grid(p.string());
        } catch (const Error& e) {
          rd.fail("grid.file", e.what());
        }
      }
    } else {
      src.inline_boxes = true;
      if (const json* o = rd.member(*g, "origin", "grid", true)) {
        if (auto v = rd.vector<3>(*o, "grid.origin")) src.origin = *v;
      }
      src.cell_size = rd.positive(*g, "cell_size", "grid", 1.0, true);
      if (const json* d = rd.member(*g, "dims", "grid", true)) {
        if (auto v = rd.vector<3>(*d, "grid.dims")) {
          for (int k = 0; k < 3; ++k) {
            src.dims[k] = static_cast<int>((*v)[k]);
            if (src.dims[k] <= 0 || (*v)[k] != src.dims[k]) rd.fail("grid.dims", "expected positive integers");
          }
        }
      }
      if (const json* boxes = rd.member(*g, "boxes", "grid", false)) {
        if (!boxes->is_array()) {
          rd.fail("grid.boxes", "expected a list");
        } else {
          for (std::size_t k = 0; k < boxes->size(); ++k) {
            const std::string path = "grid.boxes[" + std::to_string(k) + "]";
            const json* lo = rd.member((*boxes)[k], "lo", path, true);
            const json* hi = rd.member((*boxes)[k], "hi", path, true);
            if (!lo || !hi) continue;
            auto l = rd.vector<3>(*lo, path + ".lo");
            auto h = rd.vector<3>(*hi, path + ".hi");
            if (l && h) src.boxes.push_back({*l, *h});
          }
        }
      }
      if (src.cell_size > 0.0 && src.dims[0] > 0 && src.dims[1] > 0 && src.dims[2] > 0) {
        OccupancyGrid grid(src.origin, src.cell_size, src.dims);
        for (const auto& b : src.boxes) grid.add_box(b.lo, b.hi);
        sc.grid = std::move(grid);
      }
    }
    if (sc.grid) {
      if (!sc.grid->contains(sc.d0)) rd.fail("initial.d0", "lies outside the grid");
      if (!sc.grid->contains(sc.df)) rd.fail("target.d_f", "lies outside the grid");
    }
  }

  // Vehicle.
  auto& veh = sc.vehicle;
  if (const json* v = rd.member(doc, "vehicle", "scenario", false)) {
    veh.params.mass = rd.positive(*v, "mass", "vehicle", veh.params.mass);
    veh.params.gravity = rd.positive(*v, "gravity", "vehicle", veh.params.gravity);
    if (const json* j = rd.member(*v, "inertia", "vehicle", false)) {
      if (auto d = rd.vector<3>(*j, "vehicle.inertia")) {
        if ((d->array() > 0.0).all()) {
          veh.params.inertia = d->asDiagonal();
        } else {
          rd.fail("vehicle.inertia", "diagonal entries must be positive");
        }
      }
    }
    if (const json* k = rd.member(*v, "gains", "vehicle", false)) {
      if (auto g = rd.vector<4>(*k, "vehicle.gains")) veh.gains = {(*g)[0], (*g)[1], (*g)[2], (*g)[3]};
    }
    if (const json* k = rd.member(*v, "yaw_gains", "vehicle", false)) {
      if (auto g = rd.vector<2>(*k, "vehicle.yaw_gains")) veh.yaw_gains = {(*g)[0], (*g)[1]};
    }
    if (const json* gy = rd.member(*v, "gyro", "vehicle", false)) {
      if (gy->is_string() && gy->get<std::string>() == "standard") {
        veh.params.gyro = GyroConvention::Standard;
      } else if (gy->is_string() && gy->get<std::string>() == "plus") {
        veh.params.gyro = GyroConvention::Plus;
      } else {
        rd.fail("vehicle.gyro", "expected \"standard\" or \"plus\"");
      }
    }
    if (const json* sat = rd.member(*v, "saturation", "vehicle", false)) {
      if (const auto u = rd.number(*sat, "thrust_accel", "vehicle.saturation", false)) {
        veh.params.max_thrust_accel = rd.positive(*sat, "thrust_accel", "vehicle.saturation", *u);
      }
      if (const auto t = rd.number(*sat, "torque", "vehicle.saturation", false)) {
        veh.params.max_torque = rd.positive(*sat, "torque", "vehicle.saturation", *t);
      }
    }
  }

  // Solver.
  auto& sol = sc.solver;
  if (const json* s = rd.member(doc, "solver", "scenario", false)) {
    sol.dt = rd.positive(*s, "dt", "solver", sol.dt);
    sol.tf_cap = rd.positive(*s, "tf_cap", "solver", sol.tf_cap);
    sol.tf_resolution = rd.positive(*s, "tf_resolution", "solver", sol.tf_resolution);
    sol.tf_initial = rd.positive(*s, "tf_initial", "solver", sol.tf_initial);
    sol.sample_dt = rd.positive(*s, "sample_dt", "solver", sol.sample_dt);
    if (const auto rho = rd.number(*s, "rho", "solver", false)) {
      sol.rho = *rho;
      if (!(*rho > 0.0 && *rho < 1.0)) rd.fail("solver.rho", "must lie in (0, 1)");
    }
    if (const auto t0 = rd.number(*s, "t0", "solver", false)) sol.t0 = *t0;
    if (rd.number(*s, "tf", "solver", false)) sol.tf = rd.positive(*s, "tf", "solver", 0.0);
    if (const auto stride = rd.number(*s, "log_stride", "solver", false)) {
      sol.log_stride = static_cast<int>(*stride);
      if (sol.log_stride < 1 || *stride != sol.log_stride) rd.fail("solver.log_stride", "expected a positive integer");
    }
  }

  if (!rd.problems.empty()) throw ScenarioError(std::move(rd.problems));
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError({path + ": cannot open scenario file"});
  std::stringstream buf;
  buf << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_scenario(buf.str(), dir.empty() ? "." : dir.string());
}

namespace {

using ojson = nlohmann::ordered_json;

ojson vec_json(const Vec3& v) { return ojson::array({v[0], v[1], v[2]}); }

}  // namespace

std::string scenario_json(const Scenario& sc) {
  ojson doc;
  if (!sc.name.empty()) doc["name"] = sc.name;
  auto& f = doc["formation"];
  f["dimension"] = sc.formation.dimension;
  f["positions"] = ojson::array();
  for (const auto& p : sc.formation.positions) f["positions"].push_back(vec_json(p));
  f["leaders"] = sc.formation.leaders;
  if (sc.roles_given) {
    f["boundary"] = sc.formation.boundary;
    f["interior"] = sc.formation.interior;
  }
  const auto features = [&](const DeformationFeatures& th, bool axis_auto) {
    ojson j;
    j["lambda"] = {th.stretch(0), th.stretch(1), th.stretch(2)};
    j["rotation"] = {th.rotation_angle(0), th.rotation_angle(1), th.rotation_angle(2)};
    if (axis_auto) {
      j["axis"] = "auto";
    } else {
      j["axis"] = {th.axis_angle(0), th.axis_angle(1), th.axis_angle(2)};
    }
    return j;
  };
  doc["initial"] = features(sc.theta0, sc.shear_auto);
  doc["initial"]["d0"] = vec_json(sc.d0);
  doc["target"] = features(sc.thetaf, sc.shear_auto);
  doc["target"]["d_f"] = vec_json(sc.df);
  if (sc.target_jacobian) {
    const Mat3& q = *sc.target_jacobian;
    doc["target"]["Q_f"] = {vec_json(q.row(0).transpose()), vec_json(q.row(1).transpose()),
                            vec_json(q.row(2).transpose())};
  }
  doc["safety"] = {{"delta", sc.delta}, {"epsilon", sc.epsilon}, {"r_max", sc.r_max}};
  const auto& src = sc.grid_source;
  if (!src.file.empty()) {
    std::filesystem::path p(src.file);
    if (p.is_relative()) p = std::filesystem::absolute(std::filesystem::path(sc.base_dir) / p);
    doc["grid"] = {{"file", p.lexically_normal().string()}};
  } else if (src.inline_boxes) {
    auto& g = doc["grid"];
    g["origin"] = vec_json(src.origin);
    g["cell_size"] = src.cell_size;
    g["dims"] = src.dims;
    g["boxes"] = ojson::array();
    for (const auto& b : src.boxes) g["boxes"].push_back({{"lo", vec_json(b.lo)}, {"hi", vec_json(b.hi)}});
  }
  const auto& v = sc.vehicle;
  auto& vj = doc["vehicle"];
  vj["mass"] = v.params.mass;
  vj["gravity"] = v.params.gravity;
  vj["inertia"] = vec_json(v.params.inertia.diagonal());
  vj["gains"] = {v.gains.k1, v.gains.k2, v.gains.k3, v.gains.k4};
  vj["yaw_gains"] = {v.yaw_gains.k1, v.yaw_gains.k2};
  vj["gyro"] = v.params.gyro == GyroConvention::Standard ? "standard" : "plus";
  if (v.params.max_thrust_accel || v.params.max_torque) {
    auto& s = vj["saturation"];
    if (v.params.max_thrust_accel) s["thrust_accel"] = *v.params.max_thrust_accel;
    if (v.params.max_torque) s["torque"] = *v.params.max_torque;
  }
  const auto& s = sc.solver;
  auto& sj = doc["solver"];
  sj["t0"] = s.t0;
  sj["dt"] = s.dt;
  sj["tf_cap"] = s.tf_cap;
  sj["tf_resolution"] = s.tf_resolution;
  sj["tf_initial"] = s.tf_initial;
  sj["rho"] = s.rho;
  sj["sample_dt"] = s.sample_dt;
  if (s.tf) sj["tf"] = *s.tf;
  sj["log_stride"] = s.log_stride;
  return doc.dump(2);
}

void save_scenario(const std::string& path, const Scenario& scenario) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write scenario file " + path);
  out << scenario_json(scenario) << '\n';
}

}  // namespace affine_swarm
