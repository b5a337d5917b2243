#ifndef SMOLHOM_FIELDS_HPP_
#define SMOLHOM_FIELDS_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "smolhom/geometry.hpp"

namespace smolhom {

// Named analytic data families for the source f(x,y,z) and the initial
// monomer profile U_1(x,y,z); x is the macro point, y the cell point.
//   constant:        value
//   gaussian:        base + amp * exp(-|x - x0|^2 / (2 sigma^2))
//   cell_modulated:  base * (1 + amp * cos(2 pi y_1) * cos(2 pi y_2)), |amp| <= 1
struct AnalyticField {
  enum class Kind { constant, gaussian, cell_modulated };
  Kind kind = Kind::constant;
  double value = 0.0;     // constant
  double base = 0.0;      // gaussian offset / modulation carrier
  double amp = 0.0;
  Vec2 center{0.5, 0.5};
  double sigma = 0.1;

  double eval(Vec2 x, Vec2 y, double /*z*/) const {
    switch (kind) {
      case Kind::constant:
        return value;
      case Kind::gaussian: {
        const Vec2 r = x - center;
        return base + amp * std::exp(-dot(r, r) / (2.0 * sigma * sigma));
      }
      case Kind::cell_modulated:
        return base * (1.0 + amp * std::cos(2.0 * M_PI * y.x) * std::cos(2.0 * M_PI * y.y));
    }
    return 0.0;
  }

  double sup_norm() const {
    switch (kind) {
      case Kind::constant:
        return std::abs(value);
      case Kind::gaussian:
        return std::abs(base) + std::abs(amp);
      case Kind::cell_modulated:
        return std::abs(base) * (1.0 + std::abs(amp));
    }
    return 0.0;
  }

  bool is_zero() const {
    switch (kind) {
      case Kind::constant:
        return value == 0.0;
      case Kind::gaussian:
        return base == 0.0 && amp == 0.0;
      case Kind::cell_modulated:
        return base == 0.0;
    }
    return true;
  }
};

// Uniform node-centered grid on [0, L] with homogeneous Neumann ends;
// nz = 1 collapses to 2D mode (no axial direction at all).
struct ZGrid {
  int nz = 1;
  double length = 0.0;

  double dz() const { return nz > 1 ? length / (nz - 1) : 0.0; }
  double coordinate(int layer) const { return nz > 1 ? length * layer / (nz - 1) : 0.0; }
  // Trapezoid quadrature weight of a layer; in 2D mode the single layer has
  // weight one so volume integrals degenerate to area integrals.
  double weight(int layer) const {
    if (nz <= 1) return 1.0;
    return (layer == 0 || layer == nz - 1) ? 0.5 * dz() : dz();
  }
};

// Per-species nodal field over (mesh vertices) x (z layers), layer-major.
class LayeredField {
 public:
  LayeredField() = default;
  LayeredField(int nodes, int layers, double init = 0.0)
      : nodes_(nodes), layers_(layers),
        data_(static_cast<std::size_t>(nodes) * layers, init) {}

  int nodes() const { return nodes_; }
  int layers() const { return layers_; }
  double* layer(int l) { return data_.data() + static_cast<std::size_t>(l) * nodes_; }
  const double* layer(int l) const { return data_.data() + static_cast<std::size_t>(l) * nodes_; }
  double& at(int node, int l) { return data_[static_cast<std::size_t>(l) * nodes_ + node]; }
  double at(int node, int l) const { return data_[static_cast<std::size_t>(l) * nodes_ + node]; }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  double min_value() const {
    double m = data_.empty() ? 0.0 : data_[0];
    for (double v : data_) m = std::min(m, v);
    return m;
  }
  double max_value() const {
    double m = data_.empty() ? 0.0 : data_[0];
    for (double v : data_) m = std::max(m, v);
    return m;
  }

 private:
  int nodes_ = 0;
  int layers_ = 1;
  std::vector<double> data_;
};

// Backward-Euler sweep (I - mu d^2/dz^2) for every node column of a layered
// field, second-order Neumann closure at both ends.
void z_diffusion_sweep(LayeredField& f, const ZGrid& grid, double mu);

}  // namespace smolhom

#endif  // SMOLHOM_FIELDS_HPP_
