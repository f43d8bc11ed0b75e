#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "solgas/kernels.hpp"
#include "solgas/sampling.hpp"

using namespace solgas;

namespace {

std::vector<Kernel> catalogue() {
  return {make_kdv_kernel(),           make_sinh_gordon_kernel(1.0),
          make_hard_rod_kernel(1.0),   make_lieb_liniger_kernel(1.0),
          make_dnls_kernel(),          make_additive_separable_kernel(),
          make_general_kernel()};
}

// valid (mu, eta) pair inside the kernel's eta box with the pairwise gap
std::pair<double, double> valid_pair(Rng& rng, const Kernel& k) {
  for (;;) {
    double mu = rng.uniform(k.eta_lo, k.eta_hi);
    double eta = rng.uniform(k.eta_lo, k.eta_hi);
    if (std::abs(mu - eta) < k.eta_gap) continue;
    if (k.domain(mu, eta)) return {mu, eta};
  }
}

}  // namespace

TEST_CASE("catalogue point values") {
  auto kdv = make_kdv_kernel();
  CHECK(eval_G(kdv, 1.0, 2.0) == doctest::Approx(0.5 * std::log(1.0 / 3.0)).epsilon(1e-12));
  CHECK(eval_S(kdv, 2.0) == doctest::Approx(16.0));
  CHECK(eval_S(kdv, 0.0) == doctest::Approx(0.0));

  auto hr = make_hard_rod_kernel(2.0);
  CHECK(eval_G(hr, 0.3, 7.0) == doctest::Approx(-2.0));

  auto ll = make_lieb_liniger_kernel(2.0);
  CHECK(eval_dG(ll, 1.0, 1.0).first == doctest::Approx(0.0));
  CHECK(eval_dG(ll, 1.0, 1.0).second == doctest::Approx(0.0));
  CHECK(eval_S(ll, 3.0) == doctest::Approx(3.0));

  auto hr_dg = eval_dG(hr, 0.4, 1.9);
  CHECK(hr_dg.first == doctest::Approx(0.0));
  CHECK(hr_dg.second == doctest::Approx(0.0));

  // Lieb-Liniger off-diagonal from the reduced-system example: a=2,
  // eta=(0,2) -> 2*2/(2^2+2^2) = 0.5
  CHECK(eval_G(ll, 0.0, 2.0) == doctest::Approx(0.5));
}

TEST_CASE("domain guards") {
  auto kdv = make_kdv_kernel();
  CHECK_THROWS_AS(eval_G(kdv, 2.0, 2.0), DomainError);
  CHECK_THROWS_AS(eval_G(kdv, -2.0, 2.0), DomainError);
  auto dnls = make_dnls_kernel();
  CHECK_THROWS_AS(eval_G(dnls, 0.5, 2.0), DomainError);
  CHECK_THROWS_AS(eval_S(dnls, 0.5), DomainError);
  CHECK(eval_G(dnls, 1.5, 2.5) == eval_G(dnls, 2.5, 1.5));
}

TEST_CASE("symmetry G(mu,eta) = G(eta,mu) on 100 random pairs per kernel") {
  for (const auto& k : catalogue()) {
    Rng rng(42);
    for (int i = 0; i < 100; ++i) {
      auto [mu, eta] = valid_pair(rng, k);
      double d = std::abs(k.G(mu, eta) - k.G(eta, mu));
      CHECK(d <= 1e-12);
    }
  }
}

TEST_CASE("derivative symmetry d1 G(mu,eta) = d2 G(eta,mu)") {
  for (const auto& k : catalogue()) {
    Rng rng(43);
    for (int i = 0; i < 100; ++i) {
      auto [mu, eta] = valid_pair(rng, k);
      auto [d1, d2] = eval_dG(k, mu, eta);
      auto [e1, e2] = eval_dG(k, eta, mu);
      CHECK(std::abs(d1 - e2) <= 1e-9);
      CHECK(std::abs(d2 - e1) <= 1e-9);
    }
  }
}

TEST_CASE("dual derivatives match central finite differences") {
  for (const auto& k : catalogue()) {
    Rng rng(44);
    for (int i = 0; i < 40; ++i) {
      auto [mu, eta] = valid_pair(rng, k);
      CHECK_NOTHROW(eval_dG(k, mu, eta, /*cross_check=*/true));
    }
  }
  // the frozen example from the contract: kdv at (1, 2), step 1e-5, 1e-7
  auto kdv = make_kdv_kernel();
  auto [d1, d2] = eval_dG(kdv, 1.0, 2.0);
  const double h = 1e-5;
  double f1 = (kdv.G(1.0 + h, 2.0) - kdv.G(1.0 - h, 2.0)) / (2 * h);
  double f2 = (kdv.G(1.0, 2.0 + h) - kdv.G(1.0, 2.0 - h)) / (2 * h);
  CHECK(std::abs(d1 - f1) <= 1e-7);
  CHECK(std::abs(d2 - f2) <= 1e-7);
}

TEST_CASE("expression kernels integrate with the same contracts") {
  auto k = make_expr_kernel("ll_expr", "2*a/(a^2+(eta-mu)^2)", "eta", "", {{"a", 2.0}});
  auto ll = make_lieb_liniger_kernel(2.0);
  Rng rng(45);
  for (int i = 0; i < 25; ++i) {
    auto [mu, eta] = valid_pair(rng, ll);
    CHECK(k.G(mu, eta) == doctest::Approx(ll.G(mu, eta)).epsilon(1e-13));
    auto [d1, d2] = eval_dG(k, mu, eta, true);
    auto [l1, l2] = eval_dG(ll, mu, eta);
    CHECK(d1 == doctest::Approx(l1).epsilon(1e-9));
    CHECK(d2 == doctest::Approx(l2).epsilon(1e-9));
  }
  auto guarded = make_expr_kernel("guarded", "1/(mu+eta)", "eta", "mu + eta - 1");
  CHECK(guarded.domain(0.7, 0.6));
  CHECK_FALSE(guarded.domain(0.2, 0.3));
  CHECK_THROWS_AS(eval_G(guarded, 0.2, 0.3), DomainError);
}

TEST_CASE("sinh-gordon carries its constant but stays symmetric") {
  auto k = make_sinh_gordon_kernel(1.7);
  CHECK(k.params.at("a") == doctest::Approx(1.7));
  CHECK(k.G(0.4, 1.1) == doctest::Approx(k.G(1.1, 0.4)).epsilon(1e-13));
}
