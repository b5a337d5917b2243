#ifndef SMOLHOM_CELL_PROBLEM_HPP_
#define SMOLHOM_CELL_PROBLEM_HPP_

#include <array>
#include <vector>

#include "smolhom/assembly.hpp"
#include "smolhom/mesh.hpp"

namespace smolhom {

// Zero-mean periodic corrector for coordinate direction i in {1,2,3}.
// Direction 3 points along the cylinder axis, which has no in-plane
// component, so its corrector vanishes identically.
struct CorrectorField {
  int direction = 0;  // 1-based
  std::vector<double> values;  // nodal, on the cell solid mesh
  LinearSolveReport solve;
};

// Homogenized diffusion tensor A (3x3, symmetric positive definite) together
// with the solid fraction |Z|. The in-plane 2x2 block comes from the
// corrector energies; the axial entries are structural: A33 = |Z|,
// A13 = A23 = 0.
struct EffectiveTensor {
  std::array<std::array<double, 3>, 3> A{};
  double solid_fraction = 1.0;

  std::array<std::array<double, 2>, 2> in_plane() const {
    return {{{A[0][0], A[0][1]}, {A[1][0], A[1][1]}}};
  }
};

CorrectorField solve_corrector(const TriMesh& solid, const PeriodicMap& periodic,
                               int direction, double tol = 1e-10);

// A_ij = integral over Z of (grad w_i + e_i) . (grad w_j + e_j).
EffectiveTensor effective_tensor(const std::array<CorrectorField, 2>& correctors,
                                 const TriMesh& solid, double solid_fraction);

// Alternative flux form A_ij = integral of (grad w_i + e_i) . e_j; equal to
// the energy form under exact Galerkin orthogonality, compared in tests.
std::array<std::array<double, 2>, 2> effective_tensor_flux_form(
    const std::array<CorrectorField, 2>& correctors, const TriMesh& solid);

// Convenience: solve both in-plane correctors (concurrently) and build A.
struct CellProblemResult {
  std::array<CorrectorField, 2> correctors;
  EffectiveTensor tensor;
};

CellProblemResult solve_cell_problem(const TriMesh& solid, const PeriodicMap& periodic,
                                     double solid_fraction, double tol = 1e-10);

// Corrector reconstruction: vtilde(y) = sum_i w_i(y) g_i for a macro
// gradient g (3 components; the third has no in-plane corrector).
std::vector<double> corrector_reconstruct(const std::array<CorrectorField, 2>& correctors,
                                          const std::array<double, 3>& macro_gradient);

}  // namespace smolhom

#endif  // SMOLHOM_CELL_PROBLEM_HPP_
