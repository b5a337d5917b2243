#ifndef SMOLHOM_MACRO_SOLVER_HPP_
#define SMOLHOM_MACRO_SOLVER_HPP_

#include <vector>

#include "smolhom/assembly.hpp"
#include "smolhom/cell_problem.hpp"
#include "smolhom/fields.hpp"
#include "smolhom/kinetics.hpp"
#include "smolhom/mesh.hpp"
#include "smolhom/micro_solver.hpp"

namespace smolhom {

struct MacroConfig {
  CellGeometry cell;
  CellMeshes cell_meshes;  // unit-cell meshes; the inclusion mesh carries u
  EffectiveTensor tensor;
  RectMesh macro;          // structured mesh of D
  KineticParams kinetics;
  AnalyticField source;           // f(x,y,z), species 1 only
  AnalyticField initial_monomer;  // U_1(x,y,z)
  double T = 1.0;
  double dt = 1e-3;
  int nz = 1;
  double z_extent = 0.0;
  int snapshot_every = 0;
  double cg_tol = 1e-12;
};

// Limit pair (v_m, u_m): macro fields v_m(x,z) plus one cell field u_m(y)
// attached to every macro node. Cell fields are stored flat per species as
// (macro node, cell node) blocks per layer.
struct TwoScaleState {
  double time = 0.0;
  std::vector<LayeredField> v;  // nodes = macro vertices
  std::vector<LayeredField> u;  // nodes = macro vertices * cell vertices

  double cell_value(int species, int macro_node, int cell_node, int layer,
                    int cell_size) const {
    return u[species].at(macro_node * cell_size + cell_node, layer);
  }
};

struct MacroRun {
  std::vector<TwoScaleState> snapshots;
  std::vector<int> snapshot_steps;
  std::vector<DiagnosticsRow> diagnostics;
  double source_integral = 0.0;  // integral of f over Omega x X
  int guard_activations = 0;
  int steps = 0;
  double dt_effective = 0.0;
};

class MacroSolver {
 public:
  explicit MacroSolver(const MacroConfig& cfg);

  TwoScaleState init() const;
  void step(TwoScaleState& state, DiagnosticsRow* diag = nullptr);
  MacroRun run();

  // Per-species exchange flux: integral over Omega of
  // integral_Gamma c_m (u_m - v_m)_+ dsigma(y), shared-quadrature values.
  std::vector<double> coupling_flux(const TwoScaleState& state) const;

  DiagnosticsRow diagnostics_row(const TwoScaleState& state, int step) const;

  double total_v(const TwoScaleState& state, int species) const;  // |Z| weighted
  double total_u(const TwoScaleState& state, int species) const;

  const MacroConfig& config() const { return cfg_; }
  int cell_size() const { return cell_nodes_; }
  const ZGrid& z_grid() const { return zgrid_; }

 private:
  MacroConfig cfg_;
  ZGrid zgrid_;
  int macro_nodes_ = 0;
  int cell_nodes_ = 0;
  std::vector<double> lumped_macro_;  // dual areas on the macro mesh
  std::vector<double> lumped_cell_;   // dual areas on the cell inclusion mesh
  InterfaceQuadrature cell_gamma_;    // trapezoid weights on the cell interface
  std::vector<SparseOperator> implicit_v_;  // per species
  std::vector<SparseOperator> implicit_u_;  // per species (one cell, reused)
  std::vector<std::vector<std::vector<double>>> cmacro_;  // c_m at (layer, node)
  std::vector<std::vector<double>> source_nodal_;  // per layer, (macro,cell) flat
  int steps_ = 0;
  double dt_ = 0.0;
  mutable std::vector<std::vector<std::vector<double>>> warm_v_;
};

}  // namespace smolhom

#endif  // SMOLHOM_MACRO_SOLVER_HPP_
