#include "smolhom/fields.hpp"

#include <vector>

#include "smolhom/errors.hpp"

namespace smolhom {

// Thomas solve of the tridiagonal system (I - mu Lz) column by column, where
// Lz is the second-order Neumann finite-difference Laplacian: the boundary
// rows use the one-sided 2(u1 - u0)/dz^2 closure, which keeps trapezoid
// z-totals exactly conserved.
void z_diffusion_sweep(LayeredField& f, const ZGrid& grid, double mu) {
  const int nz = grid.nz;
  if (nz <= 1 || mu == 0.0) return;
  const double dz = grid.dz();
  const double r = mu / (dz * dz);

  const int nodes = f.nodes();
  std::vector<double> diag(nz), upper(nz), lower(nz);
  lower[0] = 0.0;
  diag[0] = 1.0 + 2.0 * r;
  upper[0] = -2.0 * r;
  for (int l = 1; l < nz - 1; ++l) {
    lower[l] = -r;
    diag[l] = 1.0 + 2.0 * r;
    upper[l] = -r;
  }
  lower[nz - 1] = -2.0 * r;
  diag[nz - 1] = 1.0 + 2.0 * r;
  upper[nz - 1] = 0.0;

  std::vector<double> cp(nz), col(nz);
  for (int node = 0; node < nodes; ++node) {
    for (int l = 0; l < nz; ++l) col[l] = f.at(node, l);
    // forward eliminate
    cp[0] = upper[0] / diag[0];
    col[0] = col[0] / diag[0];
    for (int l = 1; l < nz; ++l) {
      const double m = diag[l] - lower[l] * cp[l - 1];
      cp[l] = upper[l] / m;
      col[l] = (col[l] - lower[l] * col[l - 1]) / m;
    }
    for (int l = nz - 2; l >= 0; --l) col[l] -= cp[l] * col[l + 1];
    for (int l = 0; l < nz; ++l) f.at(node, l) = col[l];
  }
}

}  // namespace smolhom
