#include "smolhom/macro_solver.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "smolhom/errors.hpp"
#include "smolhom/parallel.hpp"

namespace smolhom {

namespace {
constexpr double kPositivityTol = -1e-10;
}  // namespace

MacroSolver::MacroSolver(const MacroConfig& cfg) : cfg_(cfg) {
  cfg_.kinetics.validate();
  if (!(cfg_.dt > 0.0)) throw ConfigError("macro: dt must be > 0");
  if (cfg_.T < 0.0) throw ConfigError("macro: T must be >= 0");
  if (cfg_.nz < 1) throw ConfigError("macro: nz must be >= 1");
  if (cfg_.nz > 1 && !(cfg_.z_extent > 0.0)) {
    throw ConfigError("macro: nz > 1 requires a positive z extent L");
  }
  if (!(cfg_.tensor.solid_fraction > 0.0)) {
    throw ConfigError("macro: solid fraction must be positive");
  }

  zgrid_ = ZGrid{cfg_.nz, cfg_.z_extent};
  steps_ = cfg_.T > 0.0 ? std::max(1, static_cast<int>(std::round(cfg_.T / cfg_.dt))) : 0;
  dt_ = steps_ > 0 ? cfg_.T / steps_ : cfg_.dt;

  macro_nodes_ = cfg_.macro.mesh.num_vertices();
  // Without an inclusion the limit system has no cell fields and no
  // exchange: (hom2.1) degenerates to a plain reaction-diffusion equation.
  coupled_ = !cfg_.cell_meshes.inclusion.empty();
  cell_nodes_ = coupled_ ? cfg_.cell_meshes.inclusion.num_vertices() : 0;

  lumped_macro_ = lumped_mass_vector(cfg_.macro.mesh);
  if (coupled_) {
    lumped_cell_ = lumped_mass_vector(cfg_.cell_meshes.inclusion);
    cell_gamma_ = interface_quadrature(cfg_.cell_meshes.inclusion);
  }

  const int M = cfg_.kinetics.M;
  const double zfrac = cfg_.tensor.solid_fraction;

  // Macro operator: |Z| lumped mass + dt d_m (A grad, grad).
  std::vector<double> zmass(lumped_macro_.size());
  for (std::size_t i = 0; i < zmass.size(); ++i) zmass[i] = zfrac * lumped_macro_[i];
  const auto Ablock = cfg_.tensor.in_plane();
  const SparseOperator KA = assemble_stiffness_tensor(cfg_.macro.mesh, Ablock);
  implicit_v_.reserve(M);
  for (int m = 0; m < M; ++m) {
    implicit_v_.push_back(KA.scaled(dt_ * cfg_.kinetics.d[m]).add_diagonal(zmass));
  }

  // Cell operator: the same matrix serves every macro node.
  const SparseOperator KX = assemble_stiffness(cfg_.cell_meshes.inclusion, 1.0);
  implicit_u_.reserve(M);
  for (int m = 0; m < M; ++m) {
    implicit_u_.push_back(KX.scaled(dt_ * cfg_.kinetics.D[m]).add_diagonal(lumped_cell_));
  }

  cmacro_.assign(M, std::vector<std::vector<double>>(cfg_.nz,
                                                     std::vector<double>(macro_nodes_, 0.0)));
  for (int m = 0; m < M; ++m) {
    for (int l = 0; l < cfg_.nz; ++l) {
      const double z = zgrid_.coordinate(l);
      for (int p = 0; p < macro_nodes_; ++p) {
        const double c = cfg_.kinetics.c[m](cfg_.macro.mesh.vertices[p], z);
        if (c < 0.0) throw ConfigError("transmission coefficient is negative on Omega");
        cmacro_[m][l][p] = c;
      }
    }
  }

  source_nodal_.assign(cfg_.nz,
                       std::vector<double>(static_cast<std::size_t>(macro_nodes_) * cell_nodes_, 0.0));
  for (int l = 0; l < cfg_.nz; ++l) {
    const double z = zgrid_.coordinate(l);
    for (int p = 0; p < macro_nodes_; ++p) {
      const Vec2 x = cfg_.macro.mesh.vertices[p];
      for (int k = 0; k < cell_nodes_; ++k) {
        const Vec2 y = cfg_.cell_meshes.inclusion.vertices[k];
        const double f = cfg_.source.eval(x, y, z);
        if (f < 0.0) throw ConfigError("source f must be non-negative");
        source_nodal_[l][static_cast<std::size_t>(p) * cell_nodes_ + k] = f;
      }
    }
  }

  warm_v_.assign(M, std::vector<std::vector<double>>(cfg_.nz));
}

TwoScaleState MacroSolver::init() const {
  const int M = cfg_.kinetics.M;
  TwoScaleState s;
  s.time = 0.0;
  s.v.assign(M, LayeredField(macro_nodes_, cfg_.nz));
  s.u.assign(M, LayeredField(macro_nodes_ * cell_nodes_, cfg_.nz));
  for (int l = 0; l < cfg_.nz; ++l) {
    const double z = zgrid_.coordinate(l);
    for (int p = 0; p < macro_nodes_; ++p) {
      const Vec2 x = cfg_.macro.mesh.vertices[p];
      for (int k = 0; k < cell_nodes_; ++k) {
        const Vec2 y = cfg_.cell_meshes.inclusion.vertices[k];
        const double value = cfg_.initial_monomer.eval(x, y, z);
        if (value < 0.0) throw ConfigError("initial monomer profile is negative");
        s.u[0].at(p * cell_nodes_ + k, l) = value;
      }
    }
  }
  return s;
}

std::vector<double> MacroSolver::coupling_flux(const TwoScaleState& state) const {
  const int M = cfg_.kinetics.M;
  std::vector<double> flux(M, 0.0);
  for (int m = 0; m < M; ++m) {
    double acc = 0.0;
    for (int l = 0; l < cfg_.nz; ++l) {
      double layer_sum = 0.0;
      for (int p = 0; p < macro_nodes_; ++p) {
        const double vp = state.v[m].at(p, l);
        const double cp = cmacro_[m][l][p];
        double s = 0.0;
        for (std::size_t q = 0; q < cell_gamma_.size(); ++q) {
          const double du = state.u[m].at(p * cell_nodes_ + cell_gamma_.node[q], l) - vp;
          if (du > 0.0) s += cp * cell_gamma_.weight[q] * du;
        }
        layer_sum += lumped_macro_[p] * s;
      }
      acc += zgrid_.weight(l) * layer_sum;
    }
    flux[m] = acc;
  }
  return flux;
}

double MacroSolver::total_v(const TwoScaleState& state, int species) const {
  double acc = 0.0;
  for (int l = 0; l < cfg_.nz; ++l) {
    const double* layer = state.v[species].layer(l);
    double s = 0.0;
    for (int p = 0; p < macro_nodes_; ++p) s += lumped_macro_[p] * layer[p];
    acc += zgrid_.weight(l) * s;
  }
  return cfg_.tensor.solid_fraction * acc;
}

double MacroSolver::total_u(const TwoScaleState& state, int species) const {
  double acc = 0.0;
  for (int l = 0; l < cfg_.nz; ++l) {
    double s = 0.0;
    for (int p = 0; p < macro_nodes_; ++p) {
      double cell_int = 0.0;
      for (int k = 0; k < cell_nodes_; ++k) {
        cell_int += lumped_cell_[k] * state.u[species].at(p * cell_nodes_ + k, l);
      }
      s += lumped_macro_[p] * cell_int;
    }
    acc += zgrid_.weight(l) * s;
  }
  return acc;
}

DiagnosticsRow MacroSolver::diagnostics_row(const TwoScaleState& state, int step) const {
  const int M = cfg_.kinetics.M;
  DiagnosticsRow row;
  row.step = step;
  row.time = state.time;
  row.total_u.resize(M);
  row.total_v.resize(M);
  for (int m = 0; m < M; ++m) {
    row.total_u[m] = total_u(state, m);
    row.total_v[m] = total_v(state, m);
  }
  row.flux_u = coupling_flux(state);
  row.flux_v = row.flux_u;
  for (int m = 0; m < M; ++m) {
    row.min_u = std::min(row.min_u, state.u[m].min_value());
    row.min_v = std::min(row.min_v, state.v[m].min_value());
  }
  return row;
}

void MacroSolver::step(TwoScaleState& state, DiagnosticsRow* diag) {
  const int M = cfg_.kinetics.M;
  const int N = macro_nodes_;
  const int K = cell_nodes_;
  const int nz = cfg_.nz;
  const double zfrac = cfg_.tensor.solid_fraction;
  const auto trunc = cfg_.kinetics.truncation;

  TwoScaleState next;
  next.time = state.time + dt_;
  next.v.assign(M, LayeredField(N, nz));
  next.u.assign(M, LayeredField(N * K, nz));

  // Exchange loads E[m][l][p] = lumped_macro_p * S_p with S_p the shared
  // quadrature sum over the cell interface; the same values feed the cell
  // debit and the macro credit.
  std::vector<std::vector<std::vector<double>>> exchange(
      M, std::vector<std::vector<double>>(nz, std::vector<double>(N, 0.0)));

  double max_rate = 0.0;
  std::mutex rate_mutex;

  // --- cell stage: advance every macro node's cell system (hom2.5)/(hom2.6) ---
  global_pool().parallel_for(N, [&](int p) {
    std::vector<double> point(M), rate(M);
    std::vector<std::vector<double>> L(M, std::vector<double>(K));
    std::vector<double> rhs(K);
    std::vector<double> gamma_vals(cell_gamma_.size());
    double local_rate = 0.0;
    for (int l = 0; l < nz; ++l) {
      // coagulation at every cell node
      for (int k = 0; k < K; ++k) {
        for (int m = 0; m < M; ++m) point[m] = state.u[m].at(p * K + k, l);
        eval_L_into(point, cfg_.kinetics.a, trunc, rate);
        for (int m = 0; m < M; ++m) {
          L[m][k] = rate[m];
          if (point[m] > 0.0 && rate[m] < 0.0) {
            local_rate = std::max(local_rate, -rate[m] / point[m]);
          }
        }
      }
      for (int m = 0; m < M; ++m) {
        const double vp = state.v[m].at(p, l);
        const double cp = cmacro_[m][l][p];
        double S = 0.0;
        for (std::size_t q = 0; q < cell_gamma_.size(); ++q) {
          const double du = state.u[m].at(p * K + cell_gamma_.node[q], l) - vp;
          const double g = du > 0.0 ? cp * cell_gamma_.weight[q] * du : 0.0;
          gamma_vals[q] = g;
          S += g;
          const double mk = lumped_cell_[cell_gamma_.node[q]];
          local_rate = std::max(local_rate, cp * cell_gamma_.weight[q] / mk);
        }
        exchange[m][l][p] = lumped_macro_[p] * S;

        for (int k = 0; k < K; ++k) {
          double react = L[m][k];
          if (m == 0) react += source_nodal_[l][static_cast<std::size_t>(p) * K + k];
          rhs[k] = lumped_cell_[k] * (state.u[m].at(p * K + k, l) + dt_ * react);
        }
        for (std::size_t q = 0; q < cell_gamma_.size(); ++q) {
          rhs[cell_gamma_.node[q]] -= dt_ * gamma_vals[q];
        }
        CgOptions opts;
        opts.tol = cfg_.cg_tol;
        // warm start from the previous state of this node's cell field
        std::vector<double> guess(K);
        for (int k = 0; k < K; ++k) guess[k] = state.u[m].at(p * K + k, l);
        opts.initial_guess = &guess;
        auto [x, report] = solve_cg(implicit_u_[m], rhs, opts);
        if (report.breakdown) throw SolverError("macro: cell solve did not converge");
        for (int k = 0; k < K; ++k) next.u[m].at(p * K + k, l) = x[k];
      }
    }
    std::scoped_lock lock(rate_mutex);
    max_rate = std::max(max_rate, local_rate);
  });

  // Axial coupling of the cell fields (term Dz d^2/dz^2 across macro layers).
  if (nz > 1) {
    for (int m = 0; m < M; ++m) {
      z_diffusion_sweep(next.u[m], zgrid_, dt_ * cfg_.kinetics.Dz[m]);
    }
  }

  // --- macro stage: effective equation (hom2.1) with the frozen exchange ---
  std::string failure;
  std::mutex failure_mutex;
  global_pool().parallel_for(M, [&](int m) {
    try {
      std::vector<double> point(M), rate(M);
      std::vector<double> rhs(N);
      for (int l = 0; l < nz; ++l) {
        const double* vold = state.v[m].layer(l);
        for (int p = 0; p < N; ++p) {
          for (int s = 0; s < M; ++s) point[s] = state.v[s].at(p, l);
          eval_L_into(point, cfg_.kinetics.b, trunc, rate);
          rhs[p] = zfrac * lumped_macro_[p] * (vold[p] + dt_ * rate[m]) +
                   dt_ * exchange[m][l][p];
        }
        CgOptions opts;
        opts.tol = cfg_.cg_tol;
        auto& warm = warm_v_[m][l];
        if (warm.size() == static_cast<std::size_t>(N)) opts.initial_guess = &warm;
        auto [x, report] = solve_cg(implicit_v_[m], rhs, opts);
        if (report.breakdown) throw SolverError("macro: v solve did not converge");
        std::copy(x.begin(), x.end(), next.v[m].layer(l));
        warm = std::move(x);
      }
      if (nz > 1) {
        z_diffusion_sweep(next.v[m], zgrid_, dt_ * cfg_.kinetics.d[m]);
      }
    } catch (const std::exception& e) {
      std::scoped_lock lock(failure_mutex);
      if (failure.empty()) failure = e.what();
    }
  });
  if (!failure.empty()) throw SolverError(failure);

  double worst = 0.0;
  for (int m = 0; m < M; ++m) {
    worst = std::min(worst, next.u[m].min_value());
    worst = std::min(worst, next.v[m].min_value());
  }
  if (worst < kPositivityTol) {
    std::ostringstream os;
    os << "macro step rejected at t = " << next.time << ": minimum " << worst
       << " below positivity tolerance; dt too large";
    throw SolverError(os.str());
  }

  state = std::move(next);
  if (diag) {
    DiagnosticsRow row = diagnostics_row(state, -1);
    std::vector<double> flux(M, 0.0);
    for (int m = 0; m < M; ++m) {
      double acc = 0.0;
      for (int l = 0; l < nz; ++l) {
        double layer_sum = 0.0;
        for (int p = 0; p < N; ++p) layer_sum += exchange[m][l][p];
        acc += zgrid_.weight(l) * layer_sum;
      }
      flux[m] = acc;
    }
    row.flux_u = flux;
    row.flux_v = flux;
    row.guard = dt_ * max_rate;
    *diag = std::move(row);
  }
}

MacroRun MacroSolver::run() {
  MacroRun out;
  out.steps = steps_;
  out.dt_effective = dt_;

  TwoScaleState state = init();

  if (!cfg_.source.is_zero()) {
    double acc = 0.0;
    for (int l = 0; l < cfg_.nz; ++l) {
      double s = 0.0;
      for (int p = 0; p < macro_nodes_; ++p) {
        double cell_int = 0.0;
        for (int k = 0; k < cell_nodes_; ++k) {
          cell_int += lumped_cell_[k] * source_nodal_[l][static_cast<std::size_t>(p) * cell_nodes_ + k];
        }
        s += lumped_macro_[p] * cell_int;
      }
      acc += zgrid_.weight(l) * s;
    }
    out.source_integral = acc;
  }

  const int snap_every = cfg_.snapshot_every > 0 ? cfg_.snapshot_every
                                                 : std::max(1, steps_ / 25);
  out.snapshots.push_back(state);
  out.snapshot_steps.push_back(0);
  out.diagnostics.push_back(diagnostics_row(state, 0));

  for (int s = 1; s <= steps_; ++s) {
    DiagnosticsRow row;
    step(state, &row);
    row.step = s;
    row.time = state.time;
    if (row.guard >= 1.0) ++out.guard_activations;
    out.diagnostics.push_back(std::move(row));
    if (s % snap_every == 0 || s == steps_) {
      out.snapshots.push_back(state);
      out.snapshot_steps.push_back(s);
    }
  }
  return out;
}

}  // namespace smolhom
