#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "solgas/errors.hpp"
#include "solgas/kernels.hpp"
#include "solgas/reduction.hpp"

namespace solgas {

struct Grid1D {
  int cells = 100;
  double x_min = 0.0;
  double x_max = 1.0;
  bool periodic = true;

  double dx() const { return (x_max - x_min) / cells; }
  double center(int j) const { return x_min + (j + 0.5) * dx(); }
};

enum class VariableMode { kUEta, kREta };

/// Discrete state of the reduced system: n "first" fields (weights u or
/// diagonal variables r, depending on the mode) and n spectral fields eta,
/// cell-centered.
struct FieldState {
  Grid1D grid;
  VariableMode mode = VariableMode::kUEta;
  int n = 1;
  std::vector<std::vector<double>> a;    // a[i][j]: u^i or r^i at cell j
  std::vector<std::vector<double>> eta;  // eta[i][j]
  std::vector<std::vector<double>> v;    // effective velocities, filled by step()
  double t = 0.0;
};

namespace detail {

inline int wrap(int j, int m) { return ((j % m) + m) % m; }

inline double at(const std::vector<double>& f, int j, const Grid1D& g) {
  if (g.periodic) return f[wrap(j, g.cells)];
  return f[std::clamp(j, 0, g.cells - 1)];
}

}  // namespace detail

/// Per-cell velocities (and p in r-mode). In u-mode the defining linear
/// system is solved directly in v; in r-mode the full beta route is used.
inline void compute_velocities(const Kernel& k, FieldState& st,
                               std::vector<std::vector<double>>* p_out = nullptr) {
  const int m = st.grid.cells;
  st.v.assign(st.n, std::vector<double>(m, 0.0));
  if (p_out) p_out->assign(st.n, std::vector<double>(m, 0.0));
  std::vector<double> r(st.n), eta(st.n), u(st.n);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < st.n; ++i) eta[i] = st.eta[i][j];
    if (st.mode == VariableMode::kUEta) {
      for (int i = 0; i < st.n; ++i) u[i] = st.a[i][j];
      auto vj = velocities_direct_solve(k, r, eta, u);
      for (int i = 0; i < st.n; ++i) st.v[i][j] = vj[i];
      if (p_out) {
        auto rr = r_from_u<double>(k, u, eta);
        std::vector<double> coords(2 * st.n);
        for (int i = 0; i < st.n; ++i) {
          coords[2 * i] = rr[i];
          coords[2 * i + 1] = eta[i];
        }
        auto core = reduce_at<double>(k, coords);
        for (int i = 0; i < st.n; ++i) (*p_out)[i][j] = core.p[i];
      }
    } else {
      for (int i = 0; i < st.n; ++i) r[i] = st.a[i][j];
      std::vector<double> coords(2 * st.n);
      for (int i = 0; i < st.n; ++i) {
        coords[2 * i] = r[i];
        coords[2 * i + 1] = eta[i];
      }
      auto core = reduce_at<double>(k, coords);
      for (int i = 0; i < st.n; ++i) {
        st.v[i][j] = core.v[i];
        if (p_out) (*p_out)[i][j] = core.p[i];
      }
    }
  }
}

/// Admissibility sweep over all cells; throws AdmissibilityBreakdown with
/// the offending cell index and time.
inline void check_admissible(const Kernel& k, const FieldState& st) {
  std::vector<double> r(st.n), eta(st.n), u(st.n);
  for (int j = 0; j < st.grid.cells; ++j) {
    for (int i = 0; i < st.n; ++i) eta[i] = st.eta[i][j];
    if (st.mode == VariableMode::kUEta) {
      for (int i = 0; i < st.n; ++i) u[i] = st.a[i][j];
      try {
        r = r_from_u<double>(k, u, eta);
      } catch (const Error&) {
        throw AdmissibilityBreakdown("cell left the admissible chart (degenerate weight)", j,
                                     st.t);
      }
    } else {
      for (int i = 0; i < st.n; ++i) r[i] = st.a[i][j];
    }
    if (!admissible(k, r, eta))
      throw AdmissibilityBreakdown("cell left the admissible chart (det/weight threshold)", j,
                                   st.t);
  }
}

constexpr double kDefaultCfl = 0.45;

/// One first-order upwind step.
///   u^i_t = d_x(v^i u^i)  -> conservative flux -v u, interface upwinding;
///   eta^i_t = v^i eta^i_x -> advection at speed -v, upwind differences;
///   r^i_t = v^i r^i_x + p^i eta^i_x in r-mode, same characteristic side.
/// dt must respect the CFL bound cfl * dx / max |v|.
inline FieldState step(const FieldState& state, const Kernel& k, double dt,
                       double cfl = kDefaultCfl) {
  FieldState st = state;
  std::vector<std::vector<double>> p;
  compute_velocities(k, st, st.mode == VariableMode::kREta ? &p : nullptr);

  double vmax = 0.0;
  for (int i = 0; i < st.n; ++i)
    for (double vv : st.v[i]) vmax = std::max(vmax, std::abs(vv));
  const double dx = st.grid.dx();
  if (vmax > 0.0 && dt > cfl * dx / vmax + 1e-15)
    throw CFLViolation("step: dt = " + std::to_string(dt) + " exceeds CFL bound " +
                       std::to_string(cfl * dx / vmax));

  FieldState out = st;
  out.t = st.t + dt;
  const int m = st.grid.cells;
  for (int i = 0; i < st.n; ++i) {
    const auto& vi = st.v[i];
    const auto& ai = st.a[i];
    const auto& ei = st.eta[i];
    auto& an = out.a[i];
    auto& en = out.eta[i];
    for (int j = 0; j < m; ++j) {
      double wind = -vi[j];  // advection speed of the Jordan block
      // upwind derivative on the characteristic side
      auto dup = [&](const std::vector<double>& f) {
        if (wind > 0.0) return (f[j] - detail::at(f, j - 1, st.grid)) / dx;
        return (detail::at(f, j + 1, st.grid) - f[j]) / dx;
      };
      en[j] = ei[j] + dt * vi[j] * dup(ei);
      if (st.mode == VariableMode::kUEta) {
        // conservative update with interface fluxes F = -v u
        auto flux = [&](int jl) {
          double vl = detail::at(vi, jl, st.grid), vr = detail::at(vi, jl + 1, st.grid);
          double w = -0.5 * (vl + vr);
          return w > 0.0 ? w * detail::at(ai, jl, st.grid) : w * detail::at(ai, jl + 1, st.grid);
        };
        an[j] = ai[j] - dt / dx * (flux(j) - flux(j - 1));
      } else {
        an[j] = ai[j] + dt * (vi[j] * dup(ai) + p[i][j] * dup(ei));
      }
    }
  }
  check_admissible(k, out);
  return out;
}

// ---------------------------------------------------------------------------
// Time loops and diagnostics
// ---------------------------------------------------------------------------

struct ConservationReport {
  std::vector<double> times;
  std::vector<std::vector<double>> totals_u;    // totals_u[i] over time: int u^i dx
  std::vector<double> totals_h;                 // int h dx when a density was given
  std::vector<double> admissibility_margin;     // min |det eps_hat| over cells
  double max_total_u_drift = 0.0;
  double max_total_h_drift = 0.0;
  bool shock_detected = false;
  double shock_time = -1.0;
  bool aborted = false;
  std::string abort_reason;
  int abort_cell = -1;
  double abort_time = -1.0;
};

struct Trajectory {
  std::vector<FieldState> snapshots;
  ConservationReport report;
};

namespace detail {

inline void record_diagnostics(const Kernel& k, const FieldState& st,
                               const std::vector<AnyFn1>& h_i, ConservationReport& rep) {
  const double dx = st.grid.dx();
  rep.times.push_back(st.t);
  if (rep.totals_u.empty()) rep.totals_u.resize(st.n);
  std::vector<double> r(st.n), eta(st.n), u(st.n);
  double hsum = 0.0, min_det = 1e300;
  std::vector<double> usum(st.n, 0.0);
  for (int j = 0; j < st.grid.cells; ++j) {
    for (int i = 0; i < st.n; ++i) eta[i] = st.eta[i][j];
    if (st.mode == VariableMode::kUEta) {
      for (int i = 0; i < st.n; ++i) u[i] = st.a[i][j];
      r = r_from_u<double>(k, u, eta);
    } else {
      for (int i = 0; i < st.n; ++i) r[i] = st.a[i][j];
      u = u_from_r<double>(k, r, eta);
    }
    for (int i = 0; i < st.n; ++i) usum[i] += u[i] * dx;
    if (!h_i.empty())
      for (int i = 0; i < st.n; ++i) hsum += u[i] * h_i[i](eta[i]) * dx;
    auto eps = build_eps_hat<double>(k, r, eta);
    min_det = std::min(min_det, std::abs(determinant(eps)));
  }
  for (int i = 0; i < st.n; ++i) rep.totals_u[i].push_back(usum[i]);
  if (!h_i.empty()) rep.totals_h.push_back(hsum);
  rep.admissibility_margin.push_back(min_det);
}

inline double max_eta_gradient(const FieldState& st) {
  double g = 0.0;
  const double dx = st.grid.dx();
  for (int i = 0; i < st.n; ++i)
    for (int j = 0; j < st.grid.cells; ++j) {
      double d = (at(st.eta[i], j + 1, st.grid) - st.eta[i][j]) / dx;
      g = std::max(g, std::abs(d));
    }
  return g;
}

}  // namespace detail

/// Runs the upwind scheme to t_max with automatic CFL time steps, recording
/// snapshots every output_every steps and conservation diagnostics each
/// step. Shocks (per-cell gradient beyond 50/dx) stop the diagnostics, not
/// the run. On admissibility breakdown the partial trajectory is returned
/// with the abort cause recorded.
inline Trajectory run(const FieldState& initial, const Kernel& k, double t_max,
                      int output_every = 10, const std::vector<AnyFn1>& h_i = {},
                      double cfl = kDefaultCfl) {
  Trajectory tr;
  FieldState st = initial;
  compute_velocities(k, st);
  check_admissible(k, st);
  tr.snapshots.push_back(st);
  detail::record_diagnostics(k, st, h_i, tr.report);

  const double dx = st.grid.dx();
  int stepno = 0;
  while (st.t < t_max - 1e-14) {
    double vmax = 0.0;
    for (int i = 0; i < st.n; ++i)
      for (double vv : st.v[i]) vmax = std::max(vmax, std::abs(vv));
    // small safety margin: velocities move between the step that chose dt
    // and the CFL guard inside step()
    double dt = vmax > 0.0 ? 0.98 * cfl * dx / vmax : cfl * dx;
    dt = std::min(dt, t_max - st.t);
    try {
      st = step(st, k, dt, cfl);
      compute_velocities(k, st);  // refresh for dt choice and snapshot use
    } catch (const AdmissibilityBreakdown& e) {
      tr.report.aborted = true;
      tr.report.abort_reason = e.what();
      tr.report.abort_cell = e.cell;
      tr.report.abort_time = e.time;
      break;
    }
    ++stepno;
    if (!tr.report.shock_detected && detail::max_eta_gradient(st) > 50.0 / dx) {
      tr.report.shock_detected = true;
      tr.report.shock_time = st.t;
    }
    if (!tr.report.shock_detected) detail::record_diagnostics(k, st, h_i, tr.report);
    if (stepno % output_every == 0 || st.t >= t_max - 1e-14) tr.snapshots.push_back(st);
  }
  if (tr.snapshots.back().t != st.t && !tr.report.aborted) tr.snapshots.push_back(st);

  for (auto& series : tr.report.totals_u)
    for (double s : series)
      tr.report.max_total_u_drift =
          std::max(tr.report.max_total_u_drift, std::abs(s - series.front()));
  for (double s : tr.report.totals_h)
    tr.report.max_total_h_drift =
        std::max(tr.report.max_total_h_drift, std::abs(s - tr.report.totals_h.front()));
  return tr;
}

// ---------------------------------------------------------------------------
// Characteristics verification
// ---------------------------------------------------------------------------

struct CharacteristicsReport {
  bool skipped_shock = false;
  double max_deviation = 0.0;
  double bound = 0.0;  // 5 (dx + dt) max|grad eta|
  bool pass = false;
};

namespace detail {

inline double interp_periodic(const std::vector<double>& f, const Grid1D& g, double x) {
  double span = g.x_max - g.x_min;
  double xi = x - g.x_min;
  xi -= span * std::floor(xi / span);
  double pos = xi / g.dx() - 0.5;
  int j0 = static_cast<int>(std::floor(pos));
  double w = pos - j0;
  return (1.0 - w) * f[wrap(j0, g.cells)] + w * f[wrap(j0 + 1, g.cells)];
}

}  // namespace detail

/// Integrates characteristic curves dx/dt = -v^i through the stored
/// snapshots and measures how well eta^i is transported along them. Skipped
/// honestly when a shock formed inside the window.
inline CharacteristicsReport characteristics_check(const Trajectory& tr, int component = 0,
                                                   int n_seeds = 16) {
  CharacteristicsReport rep;
  if (tr.report.shock_detected) {
    rep.skipped_shock = true;
    return rep;
  }
  if (tr.snapshots.size() < 2)
    throw InsufficientSamplesError("characteristics_check: need at least two snapshots");
  const auto& first = tr.snapshots.front();
  const Grid1D& g = first.grid;
  if (!g.periodic)
    throw ConfigError("characteristics_check: periodic trajectories only");

  double dt_avg = (tr.snapshots.back().t - first.t) / (tr.snapshots.size() - 1);
  double grad = detail::max_eta_gradient(first);
  rep.bound = 5.0 * (g.dx() + dt_avg) * std::max(grad, 1e-3);

  for (int s = 0; s < n_seeds; ++s) {
    double x0 = g.x_min + (g.x_max - g.x_min) * (s + 0.5) / n_seeds;
    double eta0 = detail::interp_periodic(first.eta[component], g, x0);
    double x = x0;
    for (size_t snap = 0; snap + 1 < tr.snapshots.size(); ++snap) {
      const auto& s0 = tr.snapshots[snap];
      const auto& s1 = tr.snapshots[snap + 1];
      double h = s1.t - s0.t;
      // midpoint rule with velocity field frozen at the earlier snapshot
      double v0 = detail::interp_periodic(s0.v[component], g, x);
      double xm = x - 0.5 * h * v0;
      double vm = detail::interp_periodic(s0.v[component], g, xm);
      x -= h * vm;
    }
    double eta1 = detail::interp_periodic(tr.snapshots.back().eta[component], g, x);
    rep.max_deviation = std::max(rep.max_deviation, std::abs(eta1 - eta0));
  }
  rep.pass = rep.max_deviation <= rep.bound;
  return rep;
}

// ---------------------------------------------------------------------------
// Initial data library
// ---------------------------------------------------------------------------

struct PulseSpec {
  double base = 1.0;
  double amplitude = 0.0;
  double center = 0.5;
  double width = 0.1;
  bool front = false;  // false: Gaussian pulse, true: smooth tanh front
};

inline std::vector<double> sample_pulse(const Grid1D& g, const PulseSpec& p) {
  std::vector<double> f(g.cells);
  const double span = g.x_max - g.x_min;
  for (int j = 0; j < g.cells; ++j) {
    double x = g.center(j);
    if (p.front) {
      f[j] = p.base + p.amplitude * 0.5 * (1.0 + std::tanh((x - p.center) / p.width));
    } else if (g.periodic) {
      // exactly periodic bump with the same near-peak shape as the Gaussian;
      // a plain Gaussian would leave a jump at the wrap boundary
      double kappa = std::pow(span / (2.0 * M_PI * p.width), 2);
      double th = 2.0 * M_PI * (x - p.center) / span;
      f[j] = p.base + p.amplitude * std::exp(kappa * (std::cos(th) - 1.0));
    } else {
      f[j] = p.base + p.amplitude * std::exp(-0.5 * std::pow((x - p.center) / p.width, 2));
    }
  }
  return f;
}

/// Builds a u_eta-mode state from per-component pulse specs.
inline FieldState make_initial(const Grid1D& g, const std::vector<PulseSpec>& u_spec,
                               const std::vector<PulseSpec>& eta_spec) {
  FieldState st;
  st.grid = g;
  st.mode = VariableMode::kUEta;
  st.n = static_cast<int>(u_spec.size());
  for (const auto& p : u_spec) st.a.push_back(sample_pulse(g, p));
  for (const auto& p : eta_spec) st.eta.push_back(sample_pulse(g, p));
  return st;
}

/// Converts a u_eta state to the equivalent r_eta state cell by cell.
inline FieldState to_r_mode(const FieldState& st, const Kernel& k) {
  if (st.mode == VariableMode::kREta) return st;
  FieldState out = st;
  out.mode = VariableMode::kREta;
  std::vector<double> u(st.n), eta(st.n);
  for (int j = 0; j < st.grid.cells; ++j) {
    for (int i = 0; i < st.n; ++i) {
      u[i] = st.a[i][j];
      eta[i] = st.eta[i][j];
    }
    auto r = r_from_u<double>(k, u, eta);
    for (int i = 0; i < st.n; ++i) out.a[i][j] = r[i];
  }
  return out;
}

/// u fields of a state regardless of mode (r-mode states convert).
inline std::vector<std::vector<double>> u_fields(const FieldState& st, const Kernel& k) {
  if (st.mode == VariableMode::kUEta) return st.a;
  std::vector<std::vector<double>> out(st.n, std::vector<double>(st.grid.cells));
  std::vector<double> r(st.n), eta(st.n);
  for (int j = 0; j < st.grid.cells; ++j) {
    for (int i = 0; i < st.n; ++i) {
      r[i] = st.a[i][j];
      eta[i] = st.eta[i][j];
    }
    auto u = u_from_r<double>(k, r, eta);
    for (int i = 0; i < st.n; ++i) out[i][j] = u[i];
  }
  return out;
}

}  // namespace solgas
