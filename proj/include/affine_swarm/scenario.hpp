#pragma once

#include <optional>
#include <string>
#include <vector>

#include "affine_swarm/errors.hpp"
#include "affine_swarm/grid.hpp"
#include "affine_swarm/topology.hpp"
#include "affine_swarm/vehicle.hpp"

namespace affine_swarm {

struct SolverSettings {
  double t0 = 0.0;
  double dt = 1e-3;
  double tf_cap = 1e4;
  double tf_resolution = 1.0;
  double tf_initial = 1.0;
  double rho = 0.1;
  double sample_dt = 1e-2;
  std::optional<double> tf;  // fixed horizon; skips the travel-time search
  int log_stride = 10;
};

struct VehicleSettings {
  QuadParams params;
  Gains gains;
  YawGains yaw_gains;
};

struct GridBox {
  Vec3 lo;
  Vec3 hi;
};

/// Obstacle map reference: a grid file, an inline box list, or nothing.
struct GridSource {
  std::string file;  // as written in the scenario, relative to its directory
  Vec3 origin = Vec3::Zero();
  double cell_size = 1.0;
  CellIndex dims{0, 0, 0};
  std::vector<GridBox> boxes;
  bool inline_boxes = false;
  bool present() const { return !file.empty() || inline_boxes; }
};

struct Scenario {
  std::string name;
  Formation formation;
  bool roles_given = false;  // boundary/interior listed explicitly
  Vec3 d0 = Vec3::Zero();
  DeformationFeatures theta0;
  DeformationFeatures thetaf;
  bool shear_auto = false;   // axis angles chosen by the max-min search
  std::optional<Mat3> target_jacobian;
  Vec3 df = Vec3::Zero();
  double delta = 0.0;
  double epsilon = 0.0;
  double r_max = 0.0;
  GridSource grid_source;
  std::optional<OccupancyGrid> grid;
  VehicleSettings vehicle;
  SolverSettings solver;
  std::string base_dir;  // directory of the scenario file
};

/// Raised by the loader; carries every validation problem with its field path.
class ScenarioError : public Error {
 public:
  explicit ScenarioError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Parses and cross-validates a scenario document. Relative grid paths are
/// resolved against base_dir.
Scenario parse_scenario(const std::string& text, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

/// JSON form of a scenario; parse_scenario(scenario_json(s)) reproduces s.
std::string scenario_json(const Scenario& scenario);
void save_scenario(const std::string& path, const Scenario& scenario);

}  // namespace affine_swarm
