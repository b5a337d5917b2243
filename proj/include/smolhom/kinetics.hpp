#ifndef SMOLHOM_KINETICS_HPP_
#define SMOLHOM_KINETICS_HPP_

#include <optional>
#include <span>
#include <vector>

#include "smolhom/geometry.hpp"

namespace smolhom {

// Dense symmetric coagulation kernel, species indices 0..M-1 standing for
// cluster sizes 1..M.
class Kernel {
 public:
  Kernel() = default;
  Kernel(int M, double constant);
  static Kernel constant(int M, double value) { return Kernel(M, value); }
  static Kernel sum(int M);      // a_ij = i + j (1-based sizes)
  static Kernel product(int M);  // a_ij = i * j
  static Kernel dense(std::vector<std::vector<double>> values);

  int size() const { return M_; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * M_ + j]; }
  double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * M_ + j]; }

  bool is_symmetric() const;
  double min_entry() const;

 private:
  int M_ = 0;
  std::vector<double> data_;
};

// Transmission coefficient c_m(x,z) >= 0, given as a macro-scale profile.
struct TransmissionCoefficient {
  double c0 = 0.0;
  double cx = 0.0;
  double cz = 0.0;

  double operator()(Vec2 x, double z) const { return c0 + cx * x.x + cz * z; }
  double sup(double width, double z_extent) const {
    return c0 + std::max(0.0, cx) * width + std::max(0.0, cz) * z_extent;
  }
};

struct KineticParams {
  int M = 2;
  Kernel a;  // inclusion-side kernel
  Kernel b;  // bulk-side kernel
  std::vector<double> D;    // in-plane diffusion in the inclusions
  std::vector<double> Dz;   // axial diffusion in the inclusions
  std::vector<double> d;    // isotropic diffusion in the bulk
  std::vector<TransmissionCoefficient> c;  // per species
  std::optional<double> truncation;        // sigma threshold; disabled if absent
  bool allow_degenerate_kernels = false;   // a_ij = 0 entries, non-paper regime

  void validate() const;
};

using ClusterVector = std::vector<double>;

// Clamp into [0, threshold].
double truncate(double s, double threshold);

// Coagulation operators. `truncated` applies the clamp to every factor.
ClusterVector eval_L(std::span<const double> u, const KineticParams& params,
                     bool truncated = false);
ClusterVector eval_N(std::span<const double> v, const KineticParams& params,
                     bool truncated = false);

// In-place variants writing into `out` (hot path for the PDE solvers).
void eval_L_into(std::span<const double> u, const Kernel& kernel,
                 std::optional<double> truncation, std::span<double> out);

struct OdeTrajectory {
  std::vector<double> times;
  std::vector<ClusterVector> states;
};

// Classical RK4 on du/dt = L(u): the well-mixed reduction used as a
// reference for the PDE solvers in spatially homogeneous regimes.
OdeTrajectory ode_oracle(const ClusterVector& u0, const KineticParams& params, double T,
                         double dt, int snapshot_every = 1);

}  // namespace smolhom

#endif  // SMOLHOM_KINETICS_HPP_
