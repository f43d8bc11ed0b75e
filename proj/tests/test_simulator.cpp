#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "solgas/simulator.hpp"
#include "solgas/structures.hpp"

using namespace solgas;

namespace {

// Smooth two-component KdV setup: periodic bumps, velocities sign-definite,
// no gradient catastrophe before t = 0.2.
FieldState kdv2_initial(int cells) {
  Grid1D g{cells, 0.0, 2.0, true};
  return make_initial(g,
                      {{0.35, 0.025, 1.0, 0.5, false}, {0.30, -0.02, 0.8, 0.5, false}},
                      {{1.15, 0.02, 0.7, 0.5, false}, {1.8, -0.02, 1.3, 0.5, false}});
}

}  // namespace

TEST_CASE("spatially constant data is stationary") {
  auto kdv = make_kdv_kernel();
  Grid1D g{64, 0.0, 1.0, true};
  auto init = make_initial(g, {{0.9, 0, 0, 1, false}, {0.7, 0, 0, 1, false}},
                           {{1.1, 0, 0, 1, false}, {2.3, 0, 0, 1, false}});
  auto tr = run(init, kdv, 0.05, 10);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 64; ++j) {
      CHECK(tr.snapshots.back().a[i][j] == doctest::Approx(init.a[i][j]).epsilon(1e-14));
      CHECK(tr.snapshots.back().eta[i][j] == doctest::Approx(init.eta[i][j]).epsilon(1e-14));
    }
}

TEST_CASE("CFL guard") {
  auto kdv = make_kdv_kernel();
  auto init = kdv2_initial(50);
  FieldState st = init;
  compute_velocities(kdv, st);
  double vmax = 0.0;
  for (auto& vi : st.v)
    for (double v : vi) vmax = std::max(vmax, std::abs(v));
  double dx = st.grid.dx();
  CHECK_THROWS_AS(step(init, kdv, 2.0 * 0.45 * dx / vmax), CFLViolation);
  CHECK_NOTHROW(step(init, kdv, 0.5 * 0.45 * dx / vmax));
}

TEST_CASE("t_max = 0 returns only the initial snapshot") {
  auto kdv = make_kdv_kernel();
  auto tr = run(kdv2_initial(50), kdv, 0.0, 10);
  CHECK(tr.snapshots.size() == 1);
  CHECK(tr.snapshots.front().t == doctest::Approx(0.0));
}

TEST_CASE("conservative totals are machine-exact on periodic grids") {
  auto kdv = make_kdv_kernel();
  auto tr = run(kdv2_initial(200), kdv, 0.3, 50);
  CHECK(tr.report.max_total_u_drift <= 1e-10);
  CHECK_FALSE(tr.report.aborted);
  CHECK_FALSE(tr.report.shock_detected);
  CHECK(tr.report.times.size() > 1000);  // the bound is quantified over 1e3 steps

  auto hr = make_hard_rod_kernel(1.0);
  Grid1D g{128, 0.0, 2.0, true};
  auto init = make_initial(g, {{0.5, 0.1, 1.0, 0.4, false}, {0.4, -0.05, 0.7, 0.4, false}},
                           {{0.8, 0.05, 0.6, 0.4, false}, {1.9, -0.05, 1.4, 0.4, false}});
  auto trh = run(init, hr, 0.3, 50);
  CHECK(trh.report.max_total_u_drift <= 1e-12);
}

TEST_CASE("hamiltonian drift vanishes under refinement at first order") {
  auto kdv = make_kdv_kernel();
  auto h = find_family("kdv_flat").make_density(kdv, 2, {}, kdv.eta_lo);
  double drift[3];
  int i = 0;
  for (int M : {100, 200, 400}) {
    auto tr = run(kdv2_initial(M), kdv, 0.2, 1000000, h);
    drift[i++] = tr.report.max_total_h_drift;
  }
  CHECK(std::log2(drift[0] / drift[1]) >= 0.8);
  CHECK(std::log2(drift[1] / drift[2]) >= 0.8);
}

TEST_CASE("u_eta and r_eta modes produce the same trajectory to O(dx)") {
  auto kdv = make_kdv_kernel();
  double prev = 0.0;
  int i = 0;
  for (int M : {100, 200, 400}) {
    auto init = kdv2_initial(M);
    auto tru = run(init, kdv, 0.2, 1000000);
    auto trr = run(to_r_mode(init, kdv), kdv, 0.2, 1000000);
    auto uu = u_fields(tru.snapshots.back(), kdv);
    auto ur = u_fields(trr.snapshots.back(), kdv);
    double diff = 0.0;
    for (int c = 0; c < 2; ++c)
      for (int j = 0; j < M; ++j) diff = std::max(diff, std::abs(uu[c][j] - ur[c][j]));
    double dx = 2.0 / M;
    CHECK(diff <= 0.5 * dx);
    if (i > 0) CHECK(diff <= 0.75 * prev);  // shrinks with refinement
    prev = diff;
    ++i;
  }
}

TEST_CASE("characteristics: exact on constant fields, first-order on pulses") {
  auto kdv = make_kdv_kernel();
  {
    Grid1D g{100, 0.0, 2.0, true};
    auto init = make_initial(g, {{0.8, 0, 0, 1, false}}, {{1.5, 0, 0, 1, false}});
    auto tr = run(init, kdv, 0.05, 5);
    auto cr = characteristics_check(tr);
    CHECK(cr.pass);
    CHECK(cr.max_deviation <= 1e-10);
  }
  double prev = 0.0;
  int i = 0;
  for (int M : {100, 200, 400}) {
    Grid1D g{M, 0.0, 2.0, true};
    auto init = make_initial(g, {{0.8, 0.0, 0, 1, false}}, {{1.2, 0.1, 1.0, 0.25, false}});
    auto tr = run(init, kdv, 0.05, 5);
    auto cr = characteristics_check(tr, 0, 16);
    CHECK(cr.pass);  // deviation within 5 (dx + dt) |grad eta|
    if (i > 0) CHECK(cr.max_deviation <= 0.65 * prev);  // order about one
    prev = cr.max_deviation;
    ++i;
  }
}

TEST_CASE("characteristics check is skipped honestly after a shock") {
  auto kdv = make_kdv_kernel();
  // strong front: gradient catastrophe inside the window
  Grid1D g{200, 0.0, 2.0, true};
  auto init = make_initial(g, {{0.9, 0.3, 1.0, 0.08, false}, {0.7, -0.2, 0.8, 0.08, false}},
                           {{1.0, 0.15, 0.7, 0.06, false}, {2.2, -0.15, 1.3, 0.06, false}});
  auto tr = run(init, kdv, 0.3, 20);
  // either the run aborted at the admissibility boundary or a shock was
  // flagged; in the shock case the characteristics check must refuse
  if (tr.report.shock_detected) {
    auto cr = characteristics_check(tr);
    CHECK(cr.skipped_shock);
    CHECK_FALSE(cr.pass);
  } else {
    CHECK(tr.report.aborted);
    CHECK(tr.report.abort_cell >= 0);
  }
}

TEST_CASE("admissibility breakdown reports cell and time, partial trajectory kept") {
  auto kdv = make_kdv_kernel();
  // drive u^2 toward zero: strong opposing pulses
  Grid1D g{100, 0.0, 2.0, true};
  auto init = make_initial(g, {{0.9, 0.15, 1.0, 0.3, false}, {0.7, -0.1, 0.8, 0.3, false}},
                           {{1.0, 0.08, 0.7, 0.25, false}, {2.2, -0.08, 1.3, 0.25, false}});
  auto tr = run(init, kdv, 0.2, 10);
  CHECK(tr.report.aborted);
  CHECK(tr.report.abort_cell >= 0);
  CHECK(tr.report.abort_time > 0.0);
  CHECK(tr.snapshots.size() >= 2);
  CHECK(tr.snapshots.back().t < 0.2);
}

TEST_CASE("n=1 advection against the method of characteristics") {
  // constant u, pulsed eta: eta advects with speed -v = S(eta) = 4 eta^2;
  // compare against the implicit characteristic solution at a point where
  // the solution is still single-valued
  auto kdv = make_kdv_kernel();
  Grid1D g{400, 0.0, 2.0, true};
  auto init = make_initial(g, {{0.8, 0.0, 0, 1, false}}, {{1.2, 0.05, 1.0, 0.3, false}});
  double t_end = 0.02;
  auto tr = run(init, kdv, t_end, 1000000);
  const auto& fin = tr.snapshots.back();
  // reference: for each cell x, solve eta(x,t) = eta0(x - t*(-v(eta))) by
  // fixed-point iteration on the characteristic foot point
  auto eta0 = [&](double x) {
    double span = 2.0;
    double xi = x - std::floor(x / span) * span;
    double kappa = std::pow(span / (2.0 * M_PI * 0.3), 2);
    return 1.2 + 0.05 * std::exp(kappa * (std::cos(2.0 * M_PI * (xi - 1.0) / span) - 1.0));
  };
  // n=1: v = -S(eta)/(1) exactly? v = -S(eta) + interaction sum (empty) = -S.
  double worst = 0.0;
  for (int j = 0; j < 400; j += 7) {
    double x = g.center(j);
    double foot = x;
    for (int it = 0; it < 200; ++it) foot = x - t_end * 4.0 * eta0(foot) * eta0(foot);
    worst = std::max(worst, std::abs(fin.eta[0][j] - eta0(foot)));
  }
  CHECK(worst <= 5.0 * (g.dx() + 0.001));
}
