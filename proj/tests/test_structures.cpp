#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "solgas/structures.hpp"

using namespace solgas;

namespace {

std::vector<std::vector<double>> etas_for(const Kernel& k, int n, int count, uint64_t seed) {
  return sample_eta_tuples(seed, k, n, count, SampleBox::for_kernel(k));
}

}  // namespace

TEST_CASE("flat conditions: Table rows satisfy them, residual structure") {
  auto kdv = make_kdv_kernel();
  auto fam = find_family("kdv_flat");
  auto an = fam.make_ansatz(kdv, 3, {});
  auto cond = residual_flat_conditions(kdv, an, etas_for(kdv, 3, 25, 3));
  CHECK(cond.res_pair <= 1e-9);
  CHECK(cond.res_diagonal <= 1e-9);

  // phi = psi = 0 makes the diagonal condition identically zero
  CHECK(cond.res_diagonal == 0.0);

  auto sg = make_sinh_gordon_kernel(1.0);
  auto sg_an = find_family("sinh_gordon_flat").make_ansatz(sg, 3, {});
  auto sg_cond = residual_flat_conditions(sg, sg_an, etas_for(sg, 3, 25, 4));
  CHECK(sg_cond.res_pair <= 1e-9);
}

TEST_CASE("cc conditions: KdV-I family, c=0 reduction, Lieb-Liniger negative") {
  auto kdv = make_kdv_kernel();
  auto fam = find_family("kdv_cc");
  auto etas = etas_for(kdv, 3, 25, 5);

  auto an = fam.make_ansatz(kdv, 3, {{"c", 0.5}, {"ctilde", 1.0}});
  auto cond = residual_cc_conditions(kdv, an, 0.5, etas);
  CHECK(cond.res_pair <= 1e-9);
  CHECK(cond.res_diagonal <= 1e-9);

  // c = 0 must be bit-identical to the flat residuals on the same samples
  auto an0 = fam.make_ansatz(kdv, 3, {{"c", 0.0}, {"ctilde", 1.0}});
  auto c0 = residual_cc_conditions(kdv, an0, 0.0, etas);
  auto fl = residual_flat_conditions(kdv, an0, etas);
  CHECK(c0.res_pair == fl.res_pair);
  CHECK(c0.res_diagonal == fl.res_diagonal);

  // Lieb-Liniger: the compatible template stays bounded away from zero
  auto ll = make_lieb_liniger_kernel(1.0);
  auto llfam = find_family("lieb_liniger_cc");
  auto ll_etas = etas_for(ll, 2, 25, 6);
  double min_res = 1e300;
  for (double c : {0.5, -0.5, 1.0, -1.0}) {
    auto lan = llfam.make_ansatz(ll, 2, {{"c", c}});
    auto lc = residual_cc_conditions(ll, lan, c, ll_etas);
    min_res = std::min(min_res, std::max(lc.res_pair, lc.res_diagonal));
    CHECK(lc.res_pair > 1e-3);
  }
  CHECK(min_res > 1e-3);
}

TEST_CASE("separability probe") {
  auto hr = make_hard_rod_kernel(1.5);
  auto rep = separability_probe(hr, default_probe_grid(hr));
  CHECK(rep.separable);
  CHECK(rep.single_argument);  // constant kernel: both partials vanish

  // constructed product kernel phi(mu) phi(eta), phi = exp
  auto prod = make_expr_kernel("product_exp", "exp(mu)*exp(eta)", "eta");
  prod.eta_lo = 0.2;
  prod.eta_hi = 1.5;
  prod.eta_gap = 0.1;
  auto prep = separability_probe(prod, default_probe_grid(prod));
  CHECK(prep.separable);
  CHECK_FALSE(prep.single_argument);

  auto kdv = make_kdv_kernel();
  auto krep = separability_probe(kdv, default_probe_grid(kdv));
  CHECK_FALSE(krep.separable);
  CHECK(krep.mixed_log_residual > 1e-3);

  auto ll = make_lieb_liniger_kernel(1.0);
  auto lrep = separability_probe(ll, default_probe_grid(ll));
  CHECK_FALSE(lrep.separable);

  // sign change across the grid is a domain error
  auto sgn = make_expr_kernel("sgn", "mu + eta - 2", "eta");
  sgn.eta_lo = 0.2;
  sgn.eta_hi = 3.0;
  sgn.eta_gap = 0.1;
  CHECK_THROWS_AS(separability_probe(sgn, default_probe_grid(sgn)), DomainError);
}

TEST_CASE("densities: closed forms and quadrature cross-check") {
  auto kdv = make_kdv_kernel();
  // kdv flat: h_i = -(4/3) eta^2
  auto h = find_family("kdv_flat").make_density(kdv, 1, {}, kdv.eta_lo);
  CHECK(h[0](1.5) == doctest::Approx(-3.0));

  // kdv cc closed form vs direct quadrature of -(8/eta) int t^2/(2ct - c t^2)
  for (auto [c, ct] : std::vector<std::pair<double, double>>{{-0.5, 1.0}, {0.3, 1.0}}) {
    detail::KdvCcDensity hd{c, ct};
    for (double eta : {0.6, 1.1, 1.7}) {
      double quad =
          -8.0 / eta *
          integrate([&](double t) { return t * t / (2.0 * ct - c * t * t); }, 0.0, eta, 1e-13);
      CHECK(hd(eta) == doctest::Approx(quad).epsilon(1e-10));
    }
  }
  // c = 0 branch equals the Table value at ctilde = 1
  detail::KdvCcDensity h0{0.0, 1.0};
  CHECK(h0(1.5) == doctest::Approx(-3.0));
  // ctilde = 0 branch is constant 8/c
  detail::KdvCcDensity hc{0.5, 0.0};
  CHECK(hc(1.3) == doctest::Approx(16.0));
  // pole inside [0, eta]: artanh branch invalid
  detail::KdvCcDensity hp{0.5, 1.0};  // pole at sqrt(2/0.5) = 2
  CHECK(hp(1.5) == doctest::Approx(hp(1.5)));
  CHECK_THROWS_AS(hp(2.5), BranchError);

  // DNLS: h = sum u^i
  auto dnls = make_dnls_kernel();
  auto hdn = find_family("dnls_flat").make_density(dnls, 2, {}, dnls.eta_lo);
  auto pts = sample_points(31, dnls, 2, 3, SampleBox::for_kernel(dnls));
  for (auto& x : pts) {
    auto core = reduce_at<double>(dnls, x);
    CHECK(hamiltonian_density(dnls, hdn, x) ==
          doctest::Approx(core.u[0] + core.u[1]).epsilon(1e-12));
  }
}

TEST_CASE("flow reconstruction: kdv flat n=1 against the closed-form system") {
  auto kdv = make_kdv_kernel();
  auto fam = find_family("kdv_flat");
  auto an = fam.make_ansatz(kdv, 1, {});
  auto h = fam.make_density(kdv, 1, {}, kdv.eta_lo);
  std::vector<double> x{2.2, 1.4};
  auto rec = reconstruct_flow(kdv, an, h, 0.0, x);
  CHECK(rec.max_rel_diff <= 1e-9);
  // v = -4 eta^2, p = 8 eta r
  CHECK(rec.flow(0, 0) == doctest::Approx(-4.0 * 1.4 * 1.4).epsilon(1e-10));
  CHECK(rec.flow(0, 1) == doctest::Approx(8.0 * 1.4 * 2.2).epsilon(1e-10));
  CHECK(rec.flow(1, 0) == doctest::Approx(0.0));
  CHECK(rec.flow(1, 1) == doctest::Approx(rec.flow(0, 0)));
}

TEST_CASE("flow reconstruction: flat families at n=2, cc family with tail") {
  for (const char* name : {"kdv_flat", "dnls_flat"}) {
    auto fam = find_family(name);
    Kernel k = fam.kernel();
    auto an = fam.make_ansatz(k, 2, {});
    auto h = fam.make_density(k, 2, {}, k.eta_lo);
    auto pts = sample_points(37, k, 2, 10, SampleBox::for_kernel(k));
    for (auto& x : pts) {
      auto rec = reconstruct_flow(k, an, h, 0.0, x);
      CHECK(rec.max_rel_diff <= 1e-6);
    }
  }
  // constant-curvature family: the tail term c h delta is required
  auto fam = find_family("kdv_cc");
  Kernel k = fam.kernel();
  std::map<std::string, double> cs{{"c", -0.5}, {"ctilde", 1.0}};
  auto an = fam.make_ansatz(k, 2, cs);
  auto h = fam.make_density(k, 2, cs, k.eta_lo);
  auto pts = sample_points(41, k, 2, 5, SampleBox::for_kernel(k));
  for (auto& x : pts) {
    CHECK(reconstruct_flow(k, an, h, -0.5, x).max_rel_diff <= 1e-6);
    CHECK_THROWS_AS(reconstruct_flow(k, an, h, 0.0, x), MismatchError);  // tail omitted
  }
}

TEST_CASE("quadrature densities are lower-limit-shift invariant") {
  for (const char* name : {"additive_separable_flat", "general_flat"}) {
    auto fam = find_family(name);
    Kernel k = fam.kernel();
    auto an = fam.make_ansatz(k, 2, {});
    auto h_a = fam.make_density(k, 2, {}, k.eta_lo);
    auto h_b = fam.make_density(k, 2, {}, k.eta_lo + 0.7);
    auto pts = sample_points(43, k, 2, 5, SampleBox::for_kernel(k));
    for (auto& x : pts) {
      auto ra = reconstruct_flow(k, an, h_a, 0.0, x);
      auto rb = reconstruct_flow(k, an, h_b, 0.0, x);
      double scale = std::max(1.0, max_abs(ra.flow));
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          CHECK(std::abs(ra.flow(i, j) - rb.flow(i, j)) <= 1e-9 * scale);
    }
  }
}

TEST_CASE("affinors: constant generators give the identity") {
  auto kdv = make_kdv_kernel();
  AffinorGenerators gen;
  gen.phi = {AnyFnN([](auto e) { return e[0] * 0.0 + 1.0; }),
             AnyFnN([](auto e) { return e[0] * 0.0 + 1.0; })};
  gen.mu = {zero_fn(), zero_fn()};
  auto pts = sample_points(47, kdv, 2, 5, SampleBox::for_kernel(kdv));
  for (auto& x : pts) {
    auto af = build_affinor(kdv, gen, x);
    CHECK(af.w[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(af.w[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(af.q[0] == doctest::Approx(0.0));
    CHECK(af.q[1] == doctest::Approx(0.0));
  }
}

TEST_CASE("affinors: general formulas vs n=2 closed forms at random points") {
  // the KdV-II generators exercise eta-dependent phi; build_affinor
  // cross-checks internally and throws on disagreement
  auto fam = find_family("kdv_ii");
  Kernel k = fam.kernel();
  auto gen = fam.make_affinor(k, 2, fam.constants);
  auto pts = sample_points(53, k, 2, 100, SampleBox::for_kernel(k));
  for (auto& x : pts) CHECK_NOTHROW(build_affinor(k, gen, x));

  // broken generators: mu inconsistent with phi
  AffinorGenerators bad;
  bad.phi = {AnyFnN([](auto e) { return e[1] * e[1]; }),  // phi^1 depends on eta^2
             AnyFnN([](auto e) { return e[1] * 0.0 + 1.0; })};
  bad.mu = {zero_fn(), zero_fn()};
  CHECK_THROWS_AS(build_affinor(k, bad, pts[0]), ConstraintError);
}

TEST_CASE("verify_family: catalogue flat entries and the conformal examples") {
  self_test_catalogue(20, 99);  // throws on any failure

  // expected-negative entry: lieb_liniger_cc with c != 0 must fail
  auto v = verify_family(find_family("lieb_liniger_cc"), 2, 20, 99, {{"c", 1.0}});
  CHECK_FALSE(v.pass);
  CHECK(v.condition_residual_pair > 1e-3);

  // and c = 0 reduces to the flat local structure
  auto v0 = verify_family(find_family("lieb_liniger_cc"), 2, 20, 99, {{"c", 0.0}});
  CHECK(v0.pass);
}

TEST_CASE("KdV-II degenerations") {
  auto fam = find_family("kdv_ii");
  Kernel k = fam.kernel();
  auto pts = sample_points(61, k, 2, 20, SampleBox::for_kernel(k));
  BundleOptions opt;
  opt.box_width = SampleBox::for_kernel(k).width();

  // c1 = c2 = c3 = 0: w = 0 and the structure is flat
  std::map<std::string, double> flat_cs{{"c1", 0.0}, {"c2", 0.0}, {"c3", 0.0},
                                        {"c4", -2.0}, {"c5", -2.0}};
  auto an_flat = fam.make_ansatz(k, 2, flat_cs);
  CHECK(check_flat(k, an_flat, pts, opt).pass);
  auto gen0 = fam.make_affinor(k, 2, flat_cs);
  for (auto& x : pts) {
    auto af = build_affinor(k, gen0, x);
    CHECK(std::abs(af.w[0]) <= 1e-12);
    CHECK(std::abs(af.q[0]) <= 1e-12);
  }

  // c1 = c3, c2 = 0: constant curvature matching the KdV-I family at c = 2 c3
  double kappa = 0.2;
  std::map<std::string, double> cc_cs{{"c1", kappa}, {"c2", 0.0}, {"c3", kappa},
                                      {"c4", 1.0}, {"c5", 1.0}};
  auto an_cc = fam.make_ansatz(k, 2, cc_cs);
  auto fit = check_constant_curvature(k, an_cc, pts, opt);
  CHECK(fit.pass);
  CHECK(*fit.fitted_c == doctest::Approx(2.0 * kappa).epsilon(1e-7));

  // Lieb-Liniger-II with c1 = 0 degenerates to flat
  auto llfam = find_family("lieb_liniger_ii");
  Kernel ll = llfam.kernel();
  auto ll_pts = sample_points(67, ll, 2, 20, SampleBox::for_kernel(ll));
  auto ll_an = llfam.make_ansatz(ll, 2, {{"c1", 0.0}, {"c2", 1.0}, {"c3", 1.0}});
  CHECK(check_flat(ll, ll_an, ll_pts, opt).pass);
}

TEST_CASE("flat families hold at n = 1 as well") {
  // at one component the pair conditions are vacuous and the 2x2 metric is
  // flat for any quadratic g_i; the tensor checks confirm it numerically
  for (const char* name : {"kdv_flat", "sinh_gordon_flat", "lieb_liniger_flat", "dnls_flat",
                           "additive_separable_flat", "general_flat"}) {
    auto fam = find_family(name);
    Kernel k = fam.kernel();
    auto an = fam.make_ansatz(k, 1, fam.constants);
    auto pts = sample_structure_points(73, k, an, 1, 20, SampleBox::for_kernel(k));
    BundleOptions opt;
    opt.box_width = SampleBox::for_kernel(k).width();
    CHECK(check_flat(k, an, pts, opt).pass);
    SystemField vf{k};
    CHECK(check_tsarev(k, an, vf, pts, opt).pass);
    auto etas = sample_eta_tuples(74, k, 1, 10, SampleBox::for_kernel(k));
    auto cond = residual_flat_conditions(k, an, etas);
    CHECK(cond.res_pair == 0.0);  // no pairs at n = 1
    CHECK(cond.res_diagonal <= 1e-9);
  }
}

TEST_CASE("higher reductions of the KdV-I family keep only the flat local structure at c=0") {
  auto fam = find_family("kdv_cc");
  Kernel k = fam.kernel();
  for (double ct : {0.7, 1.0}) {
    auto an = fam.make_ansatz(k, 3, {{"c", 0.0}, {"ctilde", ct}});
    auto pts = sample_structure_points(79, k, an, 3, 20, SampleBox::for_kernel(k));
    BundleOptions opt;
    opt.box_width = SampleBox::for_kernel(k).width();
    CHECK(check_flat(k, an, pts, opt).pass);
  }
}

TEST_CASE("two-tail examples satisfy the conformal curvature form, not the N=1 one") {
  // the curvature equations differ (linear vs quadratic in w); the same
  // affinor cannot satisfy both unless it degenerates
  auto fam = find_family("kdv_ii");
  Kernel k = fam.kernel();
  auto an = fam.make_ansatz(k, 2, fam.constants);
  auto gen = fam.make_affinor(k, 2, fam.constants);
  AffinorField wf{k, gen};
  auto pts = sample_structure_points(83, k, an, 2, 20, SampleBox::for_kernel(k));
  BundleOptions opt;
  opt.box_width = SampleBox::for_kernel(k).width();
  CHECK(check_conformal(k, an, wf, pts, opt).pass);
  CHECK_FALSE(check_ferapontov_n1(k, an, wf, pts, opt).pass);
}

TEST_CASE("curvature sign is resolved consistently across the cc catalogue") {
  auto v1 = verify_family(find_family("kdv_cc"), 2, 20, 13, {{"c", 0.5}, {"ctilde", 1.0}});
  auto v2 = verify_family(find_family("kdv_cc"), 2, 20, 13, {{"c", -0.5}, {"ctilde", 1.0}});
  auto v3 = verify_family(find_family("additive_separable_cc"), 2, 20, 13,
                          {{"c", 0.4}, {"ctilde", 1.0}});
  REQUIRE(v1.curvature_sign.has_value());
  CHECK(*v1.curvature_sign == doctest::Approx(1.0));
  CHECK(*v2.curvature_sign == doctest::Approx(1.0));
  CHECK(*v3.curvature_sign == doctest::Approx(1.0));
}

TEST_CASE("sinh-gordon flat row holds for other kernel constants too") {
  // the pair condition scales by a^2 on both sides
  auto k = make_sinh_gordon_kernel(2.0);
  auto an = find_family("sinh_gordon_flat").make_ansatz(k, 2, {});
  auto etas = sample_eta_tuples(89, k, 2, 15, SampleBox::for_kernel(k));
  auto cond = residual_flat_conditions(k, an, etas);
  CHECK(cond.res_pair <= 1e-9);
  auto pts = sample_structure_points(91, k, an, 2, 20, SampleBox::for_kernel(k));
  BundleOptions opt;
  opt.box_width = SampleBox::for_kernel(k).width();
  CHECK(check_flat(k, an, pts, opt).pass);
}
