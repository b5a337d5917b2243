#ifndef SMOLHOM_MICRO_SOLVER_HPP_
#define SMOLHOM_MICRO_SOLVER_HPP_

#include <memory>
#include <vector>

#include "smolhom/assembly.hpp"
#include "smolhom/fields.hpp"
#include "smolhom/geometry.hpp"
#include "smolhom/kinetics.hpp"
#include "smolhom/mesh.hpp"

namespace smolhom {

// How micro-scale data is sampled from the two-scale limits f(t,x,y,z) and
// U_1(x,y,z): the canonical choice evaluates at the cell coordinate
// y = x/eps mod 1; macro_only drops the oscillatory part (y = 0).
enum class MicroSampling { two_scale, macro_only };

struct MicroConfig {
  PerforatedDomain domain;
  PerforatedMeshes meshes;
  KineticParams kinetics;
  AnalyticField source;           // f, species 1 only
  AnalyticField initial_monomer;  // U_1
  MicroSampling sampling = MicroSampling::two_scale;
  double T = 1.0;
  double dt = 1e-3;
  int nz = 1;
  int snapshot_every = 0;  // 0: pick ~25 snapshots
  double cg_tol = 1e-12;
};

struct MicroState {
  double time = 0.0;
  std::vector<LayeredField> u;  // per species, inclusion mesh x z-grid
  std::vector<LayeredField> v;  // per species, bulk mesh x z-grid
};

struct DiagnosticsRow {
  int step = 0;
  double time = 0.0;
  std::vector<double> total_u;  // per species, volume integral
  std::vector<double> total_v;
  std::vector<double> flux_u;  // coupling flux debited from the u-equation
  std::vector<double> flux_v;  // coupling flux credited to the v-equation
  double min_u = 0.0;
  double min_v = 0.0;
  double guard = 0.0;  // explicit-stage stability indicator, want < 1
};

struct MicroRun {
  std::vector<MicroState> snapshots;
  std::vector<int> snapshot_steps;
  std::vector<DiagnosticsRow> diagnostics;  // row 0 is the initial state
  double source_integral = 0.0;             // integral of f over Pi_eps x [0,L]
  int guard_activations = 0;
  int steps = 0;
  double dt_effective = 0.0;
};

class MicroSolver {
 public:
  explicit MicroSolver(const MicroConfig& cfg);

  MicroState init() const;
  // One IMEX step: implicit diffusion, explicit coagulation and
  // transmission, Lie-split axial sweep. Throws SolverError when the result
  // violates positivity (dt too large) or a linear solve breaks down.
  void step(MicroState& state, DiagnosticsRow* diag = nullptr);
  MicroRun run();

  // eps * integral over Gamma_eps of c_m (u_m - v_m)_+ for every species,
  // edgewise trapezoid quadrature on the shared interface nodes.
  std::vector<double> coupling_flux(const MicroState& state) const;

  DiagnosticsRow diagnostics_row(const MicroState& state, int step) const;

  const MicroConfig& config() const { return cfg_; }
  const ZGrid& z_grid() const { return zgrid_; }
  const InterfacePairing& pairing() const { return pairing_; }

  double total_u(const MicroState& state, int species) const;
  double total_v(const MicroState& state, int species) const;

 private:
  void compute_coupling(const MicroState& state, int species, int layer,
                        std::vector<double>& values) const;

  MicroConfig cfg_;
  ZGrid zgrid_;
  InterfacePairing pairing_;
  std::vector<double> lumped_u_, lumped_v_;
  std::vector<SparseOperator> implicit_u_;  // per species
  std::vector<SparseOperator> implicit_v_;
  // Interface coupling coefficients eps * c_m(x, z_l) * w_i, per species and
  // layer, frozen at setup.
  std::vector<std::vector<std::vector<double>>> coupling_coeff_;
  std::vector<std::vector<double>> source_nodal_;  // per layer, on u-mesh
  std::vector<Vec2> cell_y_;  // cell coordinate of every u-mesh node
  int steps_ = 0;
  double dt_ = 0.0;
  // Warm starts for the plane solves, per species x layer.
  mutable std::vector<std::vector<std::vector<double>>> warm_u_, warm_v_;
};

}  // namespace smolhom

#endif  // SMOLHOM_MICRO_SOLVER_HPP_
