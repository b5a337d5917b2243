#include "smolhom/kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "smolhom/errors.hpp"

namespace smolhom {

Kernel::Kernel(int M, double value) : M_(M), data_(static_cast<std::size_t>(M) * M, value) {}

Kernel Kernel::sum(int M) {
  Kernel k(M, 0.0);
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < M; ++j) k.at(i, j) = static_cast<double>(i + 1) + (j + 1);
  }
  return k;
}

Kernel Kernel::product(int M) {
  Kernel k(M, 0.0);
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < M; ++j) k.at(i, j) = static_cast<double>(i + 1) * (j + 1);
  }
  return k;
}

Kernel Kernel::dense(std::vector<std::vector<double>> values) {
  const int M = static_cast<int>(values.size());
  Kernel k(M, 0.0);
  for (int i = 0; i < M; ++i) {
    if (static_cast<int>(values[i].size()) != M) {
      throw ConfigError("dense kernel must be a square matrix");
    }
    for (int j = 0; j < M; ++j) k.at(i, j) = values[i][j];
  }
  return k;
}

bool Kernel::is_symmetric() const {
  for (int i = 0; i < M_; ++i) {
    for (int j = i + 1; j < M_; ++j) {
      if ((*this)(i, j) != (*this)(j, i)) return false;
    }
  }
  return true;
}

double Kernel::min_entry() const {
  double m = std::numeric_limits<double>::infinity();
  for (double v : data_) m = std::min(m, v);
  return m;
}

void KineticParams::validate() const {
  if (M < 2) throw ConfigError("kinetics: M must be >= 2");
  if (a.size() != M || b.size() != M) throw ConfigError("kinetics: kernel size must equal M");
  if (!a.is_symmetric() || !b.is_symmetric()) {
    throw ConfigError("kinetics: coagulation kernels must be symmetric");
  }
  auto check_kernel = [&](const Kernel& k, const char* name) {
    for (int i = 0; i < M; ++i) {
      for (int j = 0; j < M; ++j) {
        const double v = k(i, j);
        if (v < 0.0 || (!allow_degenerate_kernels && v == 0.0)) {
          std::ostringstream os;
          os << "kinetics: kernel " << name << "[" << i + 1 << "][" << j + 1 << "] = " << v
             << " must be > 0 (set allow_degenerate_kernels to override)";
          throw ConfigError(os.str());
        }
      }
    }
  };
  check_kernel(a, "a");
  check_kernel(b, "b");
  auto check_diff = [&](const std::vector<double>& v, const char* name) {
    if (static_cast<int>(v.size()) != M) {
      throw ConfigError(std::string("kinetics: ") + name + " must have one entry per species");
    }
    for (double x : v) {
      if (!(x > 0.0)) throw ConfigError(std::string("kinetics: ") + name + " entries must be > 0");
    }
  };
  check_diff(D, "D");
  check_diff(Dz, "Dz");
  check_diff(d, "d");
  if (static_cast<int>(c.size()) != M) {
    throw ConfigError("kinetics: transmission coefficient must have one entry per species");
  }
  if (truncation && !(*truncation > 0.0)) {
    throw ConfigError("kinetics: truncation threshold must be > 0");
  }
}

double truncate(double s, double threshold) {
  if (s < 0.0) return 0.0;
  if (s > threshold) return threshold;
  return s;
}

void eval_L_into(std::span<const double> u, const Kernel& kernel,
                 std::optional<double> truncation, std::span<double> out) {
  const int M = kernel.size();
  // Work on the clamped copy when truncation is active; the operators are
  // plain polynomials of the (possibly clamped) factors.
  static thread_local std::vector<double> buf;
  std::span<const double> w = u;
  if (truncation) {
    buf.assign(u.begin(), u.end());
    for (double& s : buf) s = truncate(s, *truncation);
    w = buf;
  }

  // Species 1 (index 0): pure loss.
  double loss = 0.0;
  for (int j = 0; j < M; ++j) loss += kernel(0, j) * w[static_cast<std::size_t>(j)];
  out[0] = -w[0] * loss;

  // Intermediate sizes: binary gains of exact size, losses against everyone.
  for (int m = 1; m < M - 1; ++m) {
    double gain = 0.0;
    for (int p = 0; p < m; ++p) {
      gain += kernel(p, m - 1 - p) * w[static_cast<std::size_t>(p)] *
              w[static_cast<std::size_t>(m - 1 - p)];
    }
    loss = 0.0;
    for (int j = 0; j < M; ++j) loss += kernel(m, j) * w[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(m)] = 0.5 * gain - w[static_cast<std::size_t>(m)] * loss;
  }

  // Top bucket absorbs every merge reaching size >= M; it has no losses.
  double gain = 0.0;
  for (int p = 0; p <= M - 2; ++p) {
    for (int q = M - 2 - p; q <= M - 2; ++q) {
      gain += kernel(p, q) * w[static_cast<std::size_t>(p)] * w[static_cast<std::size_t>(q)];
    }
  }
  out[static_cast<std::size_t>(M - 1)] = 0.5 * gain;
}

ClusterVector eval_L(std::span<const double> u, const KineticParams& params, bool truncated) {
  ClusterVector out(static_cast<std::size_t>(params.M));
  eval_L_into(u, params.a, truncated ? params.truncation : std::nullopt, out);
  return out;
}

ClusterVector eval_N(std::span<const double> v, const KineticParams& params, bool truncated) {
  ClusterVector out(static_cast<std::size_t>(params.M));
  eval_L_into(v, params.b, truncated ? params.truncation : std::nullopt, out);
  return out;
}

OdeTrajectory ode_oracle(const ClusterVector& u0, const KineticParams& params, double T,
                         double dt, int snapshot_every) {
  if (!(dt > 0.0)) throw ConfigError("ode_oracle: dt must be > 0");
  if (static_cast<int>(u0.size()) != params.M) {
    throw ConfigError("ode_oracle: initial state size must equal M");
  }
  const int steps = T > 0.0 ? std::max(1, static_cast<int>(std::round(T / dt))) : 0;
  const double step = steps > 0 ? T / steps : dt;

  OdeTrajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(u0);

  ClusterVector u = u0;
  const std::size_t M = u.size();
  ClusterVector k1(M), k2(M), k3(M), k4(M), tmp(M);
  for (int s = 0; s < steps; ++s) {
    eval_L_into(u, params.a, params.truncation, k1);
    for (std::size_t i = 0; i < M; ++i) tmp[i] = u[i] + 0.5 * step * k1[i];
    eval_L_into(tmp, params.a, params.truncation, k2);
    for (std::size_t i = 0; i < M; ++i) tmp[i] = u[i] + 0.5 * step * k2[i];
    eval_L_into(tmp, params.a, params.truncation, k3);
    for (std::size_t i = 0; i < M; ++i) tmp[i] = u[i] + step * k3[i];
    eval_L_into(tmp, params.a, params.truncation, k4);
    for (std::size_t i = 0; i < M; ++i) {
      u[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    for (std::size_t i = 0; i < M; ++i) {
      if (u[i] < -1e-12) {
        std::ostringstream os;
        os << "ode_oracle: species " << i + 1 << " fell to " << u[i] << " at t = "
           << (s + 1) * step << "; dt too large";
        throw SolverError(os.str());
      }
    }
    if ((s + 1) % snapshot_every == 0 || s + 1 == steps) {
      traj.times.push_back((s + 1) * step);
      traj.states.push_back(u);
    }
  }
  return traj;
}

}  // namespace smolhom
