#ifndef SMOLHOM_CONFIG_HPP_
#define SMOLHOM_CONFIG_HPP_

#include <string>
#include <vector>

#include <json.hpp>

#include "smolhom/fields.hpp"
#include "smolhom/geometry.hpp"
#include "smolhom/kinetics.hpp"
#include "smolhom/macro_solver.hpp"
#include "smolhom/micro_solver.hpp"

namespace smolhom {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kSolverVersion = "0.1.0";

// Fully resolved run configuration. Parsing is strict: unknown keys are
// rejected with their path, physical-validity violations name the offending
// field.
struct Config {
  InclusionShape inclusion;
  double width = 1.0;
  double height = 1.0;
  double epsilon = 0.25;
  double z_extent = 0.0;
  int nz = 1;

  KineticParams kinetics;
  AnalyticField initial_monomer;  // U1, default constant 1
  AnalyticField source;           // f, default 0
  MicroSampling sampling = MicroSampling::two_scale;

  double T = 1.0;
  double dt = 1e-3;
  int snapshot_every = 0;

  int cell_divisions = 16;
  int macro_divisions = 32;
  int tensor_divisions = 64;

  std::vector<double> study_epsilons;

  std::string check_target = "micro";
  std::string run_id = "run";
  bool export_fields = true;

  bool non_paper_regime = false;  // degenerate-kernel override in effect

  nlohmann::json resolved;  // echo of every resolved value
};

Config parse_config(const nlohmann::json& j);
Config load_config(const std::string& path);

// Heavy-object builders.
MicroConfig build_micro_config(const Config& cfg);
MacroConfig build_macro_config(const Config& cfg);

}  // namespace smolhom

#endif  // SMOLHOM_CONFIG_HPP_
