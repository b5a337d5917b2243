#include "smolhom/micro_solver.hpp"

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

MicroSolver::MicroSolver(const MicroConfig& cfg) : cfg_(cfg) {
  cfg_.kinetics.validate();
  if (!(cfg_.dt > 0.0)) throw ConfigError("micro: dt must be > 0");
  if (cfg_.T < 0.0) throw ConfigError("micro: T must be >= 0");
  if (cfg_.nz < 1) throw ConfigError("micro: nz must be >= 1");
  if (cfg_.nz > 1 && !(cfg_.domain.z_extent > 0.0)) {
    throw ConfigError("micro: nz > 1 requires a positive z extent L");
  }

  zgrid_ = ZGrid{cfg_.nz, cfg_.domain.z_extent};
  steps_ = cfg_.T > 0.0 ? std::max(1, static_cast<int>(std::round(cfg_.T / cfg_.dt))) : 0;
  dt_ = steps_ > 0 ? cfg_.T / steps_ : cfg_.dt;

  const TriMesh& um = cfg_.meshes.inclusions;
  const TriMesh& vm = cfg_.meshes.bulk;
  const bool coupled = !um.empty();
  if (coupled) pairing_ = pair_interfaces(um, vm);

  lumped_v_ = lumped_mass_vector(vm);
  if (coupled) lumped_u_ = lumped_mass_vector(um);

  const int M = cfg_.kinetics.M;
  const double eps = cfg_.domain.epsilon;
  const double eps2 = eps * eps;
  const SparseOperator Kv = assemble_stiffness(vm, 1.0);
  implicit_v_.reserve(M);
  for (int m = 0; m < M; ++m) {
    implicit_v_.push_back(Kv.scaled(dt_ * cfg_.kinetics.d[m]).add_diagonal(lumped_v_));
  }
  if (coupled) {
    const SparseOperator Ku = assemble_stiffness(um, 1.0);
    implicit_u_.reserve(M);
    for (int m = 0; m < M; ++m) {
      implicit_u_.push_back(
          Ku.scaled(dt_ * eps2 * cfg_.kinetics.D[m]).add_diagonal(lumped_u_));
    }

    coupling_coeff_.assign(M, std::vector<std::vector<double>>(
                                  cfg_.nz, std::vector<double>(pairing_.size(), 0.0)));
    for (int m = 0; m < M; ++m) {
      for (int l = 0; l < cfg_.nz; ++l) {
        const double z = zgrid_.coordinate(l);
        for (std::size_t i = 0; i < pairing_.size(); ++i) {
          const Vec2 x = um.vertices[static_cast<std::size_t>(pairing_.inclusion_node[i])];
          const double c = cfg_.kinetics.c[m](x, z);
          if (c < 0.0) throw ConfigError("transmission coefficient is negative on the interface");
          coupling_coeff_[m][l][i] = eps * c * pairing_.weight[i];
        }
      }
    }

    // Cell coordinate y = x/eps mod 1 of every inclusion node; by the tiling
    // construction this is exactly the generating cell-mesh vertex.
    cell_y_.assign(um.vertices.size(), Vec2{0.0, 0.0});
    if (cfg_.sampling == MicroSampling::two_scale) {
      const CellMeshes cell = mesh_cell(cfg_.domain.cell, cfg_.meshes.cell_h);
      for (std::size_t i = 0; i < um.vertices.size(); ++i) {
        cell_y_[i] = cell.inclusion.vertices[cfg_.meshes.inclusion_provenance[i].cell_vertex];
      }
    }

    source_nodal_.assign(cfg_.nz, std::vector<double>(um.vertices.size(), 0.0));
    for (int l = 0; l < cfg_.nz; ++l) {
      const double z = zgrid_.coordinate(l);
      for (std::size_t i = 0; i < um.vertices.size(); ++i) {
        source_nodal_[l][i] = cfg_.source.eval(um.vertices[i], cell_y_[i], z);
        if (source_nodal_[l][i] < 0.0) {
          throw ConfigError("source f must be non-negative");
        }
      }
    }
  }

  warm_u_.assign(M, std::vector<std::vector<double>>(cfg_.nz));
  warm_v_.assign(M, std::vector<std::vector<double>>(cfg_.nz));
}

MicroState MicroSolver::init() const {
  const TriMesh& um = cfg_.meshes.inclusions;
  const TriMesh& vm = cfg_.meshes.bulk;
  const int M = cfg_.kinetics.M;
  MicroState s;
  s.time = 0.0;
  s.u.assign(M, LayeredField(um.num_vertices(), cfg_.nz));
  s.v.assign(M, LayeredField(vm.num_vertices(), cfg_.nz));
  if (um.empty()) return s;

  for (int l = 0; l < cfg_.nz; ++l) {
    const double z = zgrid_.coordinate(l);
    for (int i = 0; i < um.num_vertices(); ++i) {
      const double value = cfg_.initial_monomer.eval(um.vertices[i], cell_y_[i], z);
      if (value < 0.0) {
        std::ostringstream os;
        os << "initial monomer profile is negative (" << value << ") at node " << i;
        throw ConfigError(os.str());
      }
      s.u[0].at(i, l) = value;
    }
  }
  return s;
}

void MicroSolver::compute_coupling(const MicroState& state, int species, int layer,
                                   std::vector<double>& values) const {
  values.resize(pairing_.size());
  const LayeredField& u = state.u[static_cast<std::size_t>(species)];
  const LayeredField& v = state.v[static_cast<std::size_t>(species)];
  const auto& coeff = coupling_coeff_[static_cast<std::size_t>(species)][static_cast<std::size_t>(layer)];
  for (std::size_t i = 0; i < pairing_.size(); ++i) {
    const double du = u.at(pairing_.inclusion_node[i], layer) -
                      v.at(pairing_.solid_node[i], layer);
    values[i] = du > 0.0 ? coeff[i] * du : 0.0;
  }
}

std::vector<double> MicroSolver::coupling_flux(const MicroState& state) const {
  const int M = cfg_.kinetics.M;
  std::vector<double> flux(static_cast<std::size_t>(M), 0.0);
  if (pairing_.size() == 0) return flux;
  std::vector<double> values;
  for (int m = 0; m < M; ++m) {
    double acc = 0.0;
    for (int l = 0; l < cfg_.nz; ++l) {
      compute_coupling(state, m, l, values);
      double layer_sum = 0.0;
      for (double g : values) layer_sum += g;
      acc += zgrid_.weight(l) * layer_sum;
    }
    flux[static_cast<std::size_t>(m)] = acc;
  }
  return flux;
}

double MicroSolver::total_u(const MicroState& state, int species) const {
  double acc = 0.0;
  const LayeredField& f = state.u[static_cast<std::size_t>(species)];
  for (int l = 0; l < cfg_.nz; ++l) {
    const double* layer = f.layer(l);
    double s = 0.0;
    for (std::size_t i = 0; i < lumped_u_.size(); ++i) s += lumped_u_[i] * layer[i];
    acc += zgrid_.weight(l) * s;
  }
  return acc;
}

double MicroSolver::total_v(const MicroState& state, int species) const {
  double acc = 0.0;
  const LayeredField& f = state.v[static_cast<std::size_t>(species)];
  for (int l = 0; l < cfg_.nz; ++l) {
    const double* layer = f.layer(l);
    double s = 0.0;
    for (std::size_t i = 0; i < lumped_v_.size(); ++i) s += lumped_v_[i] * layer[i];
    acc += zgrid_.weight(l) * s;
  }
  return acc;
}

DiagnosticsRow MicroSolver::diagnostics_row(const MicroState& state, int step) const {
  const int M = cfg_.kinetics.M;
  DiagnosticsRow row;
  row.step = step;
  row.time = state.time;
  row.total_u.resize(M);
  row.total_v.resize(M);
  for (int m = 0; m < M; ++m) {
    row.total_u[static_cast<std::size_t>(m)] = pairing_.size() ? total_u(state, m) : 0.0;
    row.total_v[static_cast<std::size_t>(m)] = total_v(state, m);
  }
  row.flux_u = coupling_flux(state);
  row.flux_v = row.flux_u;  // same quadrature values by construction
  row.min_u = 0.0;
  row.min_v = 0.0;
  for (int m = 0; m < M; ++m) {
    if (pairing_.size()) row.min_u = std::min(row.min_u, state.u[static_cast<std::size_t>(m)].min_value());
    row.min_v = std::min(row.min_v, state.v[static_cast<std::size_t>(m)].min_value());
  }
  return row;
}

void MicroSolver::step(MicroState& state, DiagnosticsRow* diag) {
  const int M = cfg_.kinetics.M;
  const TriMesh& um = cfg_.meshes.inclusions;
  const TriMesh& vm = cfg_.meshes.bulk;
  const bool coupled = !um.empty();
  const int nu = um.num_vertices();
  const int nv = vm.num_vertices();
  const int nz = cfg_.nz;

  // --- explicit stage: coagulation at every node, from the previous state ---
  std::vector<LayeredField> Lu(coupled ? M : 0);
  std::vector<LayeredField> Nv(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) {
    if (coupled) Lu[static_cast<std::size_t>(m)] = LayeredField(nu, nz);
    Nv[static_cast<std::size_t>(m)] = LayeredField(nv, nz);
  }
  double max_loss_rate = 0.0;
  std::mutex loss_mutex;

  const auto trunc = cfg_.kinetics.truncation;
  global_pool().parallel_for(nz, [&](int l) {
    std::vector<double> point(static_cast<std::size_t>(M));
    std::vector<double> rate(static_cast<std::size_t>(M));
    double local_loss = 0.0;
    if (coupled) {
      for (int i = 0; i < nu; ++i) {
        for (int m = 0; m < M; ++m) point[static_cast<std::size_t>(m)] = state.u[static_cast<std::size_t>(m)].at(i, l);
        eval_L_into(point, cfg_.kinetics.a, trunc, rate);
        for (int m = 0; m < M; ++m) {
          Lu[static_cast<std::size_t>(m)].at(i, l) = rate[static_cast<std::size_t>(m)];
          if (point[static_cast<std::size_t>(m)] > 0.0 && rate[static_cast<std::size_t>(m)] < 0.0) {
            local_loss = std::max(local_loss, -rate[static_cast<std::size_t>(m)] / point[static_cast<std::size_t>(m)]);
          }
        }
      }
    }
    for (int i = 0; i < nv; ++i) {
      for (int m = 0; m < M; ++m) point[static_cast<std::size_t>(m)] = state.v[static_cast<std::size_t>(m)].at(i, l);
      eval_L_into(point, cfg_.kinetics.b, trunc, rate);
      for (int m = 0; m < M; ++m) {
        Nv[static_cast<std::size_t>(m)].at(i, l) = rate[static_cast<std::size_t>(m)];
        if (point[static_cast<std::size_t>(m)] > 0.0 && rate[static_cast<std::size_t>(m)] < 0.0) {
          local_loss = std::max(local_loss, -rate[static_cast<std::size_t>(m)] / point[static_cast<std::size_t>(m)]);
        }
      }
    }
    std::scoped_lock lock(loss_mutex);
    max_loss_rate = std::max(max_loss_rate, local_loss);
  });

  // --- transmission stage: shared quadrature values, frozen from the old state ---
  std::vector<std::vector<std::vector<double>>> coupling(
      static_cast<std::size_t>(M));
  double max_coupling_rate = 0.0;
  std::vector<double> flux(static_cast<std::size_t>(M), 0.0);
  if (coupled) {
    for (int m = 0; m < M; ++m) {
      coupling[static_cast<std::size_t>(m)].resize(static_cast<std::size_t>(nz));
      double acc = 0.0;
      for (int l = 0; l < nz; ++l) {
        auto& values = coupling[static_cast<std::size_t>(m)][static_cast<std::size_t>(l)];
        compute_coupling(state, m, l, values);
        double layer_sum = 0.0;
        for (double g : values) layer_sum += g;
        acc += zgrid_.weight(l) * layer_sum;
        const auto& coeff = coupling_coeff_[static_cast<std::size_t>(m)][static_cast<std::size_t>(l)];
        for (std::size_t i = 0; i < pairing_.size(); ++i) {
          const double mi = lumped_u_[static_cast<std::size_t>(pairing_.inclusion_node[i])];
          max_coupling_rate = std::max(max_coupling_rate, coeff[i] / mi);
        }
      }
      flux[static_cast<std::size_t>(m)] = acc;
    }
  }
  const double guard = dt_ * std::max(max_loss_rate, max_coupling_rate);

  const double t_new = state.time + dt_;
  MicroState next;
  next.time = t_new;
  next.u.assign(static_cast<std::size_t>(M), LayeredField(nu, nz));
  next.v.assign(static_cast<std::size_t>(M), LayeredField(nv, nz));

  // --- implicit stage: species are independent given the frozen data ---
  std::string failure;
  std::mutex failure_mutex;
  global_pool().parallel_for(M, [&](int m) {
    try {
      std::vector<double> rhs;
      if (coupled) {
        LayeredField& un = next.u[static_cast<std::size_t>(m)];
        for (int l = 0; l < nz; ++l) {
          rhs.assign(static_cast<std::size_t>(nu), 0.0);
          const double* uold = state.u[static_cast<std::size_t>(m)].layer(l);
          const double* Lrow = Lu[static_cast<std::size_t>(m)].layer(l);
          for (int i = 0; i < nu; ++i) {
            double react = Lrow[i];
            if (m == 0) react += source_nodal_[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)];
            rhs[static_cast<std::size_t>(i)] =
                lumped_u_[static_cast<std::size_t>(i)] * (uold[i] + dt_ * react);
          }
          const auto& values = coupling[static_cast<std::size_t>(m)][static_cast<std::size_t>(l)];
          for (std::size_t i = 0; i < pairing_.size(); ++i) {
            rhs[static_cast<std::size_t>(pairing_.inclusion_node[i])] -= dt_ * values[i];
          }
          CgOptions opts;
          opts.tol = cfg_.cg_tol;
          auto& warm = warm_u_[static_cast<std::size_t>(m)][static_cast<std::size_t>(l)];
          if (warm.size() == static_cast<std::size_t>(nu)) opts.initial_guess = &warm;
          auto [x, report] = solve_cg(implicit_u_[static_cast<std::size_t>(m)], rhs, opts);
          if (report.breakdown) {
            throw SolverError("micro: u plane solve did not converge");
          }
          std::copy(x.begin(), x.end(), un.layer(l));
          warm = std::move(x);
        }
        z_diffusion_sweep(un, zgrid_, dt_ * cfg_.kinetics.Dz[static_cast<std::size_t>(m)]);
      }

      LayeredField& vn = next.v[static_cast<std::size_t>(m)];
      for (int l = 0; l < nz; ++l) {
        rhs.assign(static_cast<std::size_t>(nv), 0.0);
        const double* vold = state.v[static_cast<std::size_t>(m)].layer(l);
        const double* Nrow = Nv[static_cast<std::size_t>(m)].layer(l);
        for (int i = 0; i < nv; ++i) {
          rhs[static_cast<std::size_t>(i)] =
              lumped_v_[static_cast<std::size_t>(i)] * (vold[i] + dt_ * Nrow[i]);
        }
        if (coupled) {
          const auto& values = coupling[static_cast<std::size_t>(m)][static_cast<std::size_t>(l)];
          for (std::size_t i = 0; i < pairing_.size(); ++i) {
            rhs[static_cast<std::size_t>(pairing_.solid_node[i])] += dt_ * values[i];
          }
        }
        CgOptions opts;
        opts.tol = cfg_.cg_tol;
        auto& warm = warm_v_[static_cast<std::size_t>(m)][static_cast<std::size_t>(l)];
        if (warm.size() == static_cast<std::size_t>(nv)) opts.initial_guess = &warm;
        auto [x, report] = solve_cg(implicit_v_[static_cast<std::size_t>(m)], rhs, opts);
        if (report.breakdown) {
          throw SolverError("micro: v plane solve did not converge");
        }
        std::copy(x.begin(), x.end(), vn.layer(l));
        warm = std::move(x);
      }
      z_diffusion_sweep(vn, zgrid_, dt_ * cfg_.kinetics.d[static_cast<std::size_t>(m)]);
    } catch (const std::exception& e) {
      std::scoped_lock lock(failure_mutex);
      if (failure.empty()) failure = e.what();
    }
  });
  if (!failure.empty()) throw SolverError(failure);

  // --- positivity audit (Lemma-style invariant, no clipping) ---
  double worst = 0.0;
  for (int m = 0; m < M; ++m) {
    if (coupled) worst = std::min(worst, next.u[static_cast<std::size_t>(m)].min_value());
    worst = std::min(worst, next.v[static_cast<std::size_t>(m)].min_value());
  }
  if (worst < kPositivityTol) {
    std::ostringstream os;
    os << "micro step rejected at t = " << t_new << ": minimum " << worst
       << " below positivity tolerance; dt too large";
    throw SolverError(os.str());
  }

  state = std::move(next);
  if (diag) {
    DiagnosticsRow row = diagnostics_row(state, -1);
    row.flux_u = flux;  // the fluxes actually applied during this step
    row.flux_v = flux;
    row.guard = guard;
    *diag = std::move(row);
  }
}

MicroRun MicroSolver::run() {
  MicroRun out;
  out.steps = steps_;
  out.dt_effective = dt_;

  MicroState state = init();

  // Source volume integral (time-independent by construction).
  if (!cfg_.meshes.inclusions.empty() && !cfg_.source.is_zero()) {
    double acc = 0.0;
    for (int l = 0; l < cfg_.nz; ++l) {
      double s = 0.0;
      for (std::size_t i = 0; i < lumped_u_.size(); ++i) {
        s += lumped_u_[i] * source_nodal_[static_cast<std::size_t>(l)][i];
      }
      acc += zgrid_.weight(l) * s;
    }
    out.source_integral = acc;
  }

  const int snap_every = cfg_.snapshot_every > 0
                             ? cfg_.snapshot_every
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
