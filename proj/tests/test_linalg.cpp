#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "solgas/linalg.hpp"
#include "solgas/sampling.hpp"

using namespace solgas;

TEST_CASE("inverse of random symmetric 3x3 against identity") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Mat<double> a(3, 3);
    for (int i = 0; i < 3; ++i) {
      a(i, i) = rng.uniform(1.0, 4.0) * (rng.coin() ? 1 : -1);
      for (int j = i + 1; j < 3; ++j) a(i, j) = a(j, i) = rng.uniform(-0.8, 0.8);
    }
    Mat<double> inv = invert(a);
    Mat<double> prod = a * inv;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(std::abs(prod(i, j) - (i == j ? 1.0 : 0.0)) <= 1e-10);
  }
}

TEST_CASE("determinant matches cofactor expansion on 3x3") {
  Mat<double> a(3, 3);
  double vals[9] = {2, -1, 0.5, -1, 3, 1.2, 0.5, 1.2, -2};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = vals[3 * i + j];
  double det = determinant(a);
  double expand = 0.0;
  for (int j = 0; j < 3; ++j)
    expand += ((j % 2 == 0) ? 1 : -1) * a(0, j) * minor_det(a, 0, j);
  CHECK(det == doctest::Approx(expand).epsilon(1e-13));
}

TEST_CASE("inverse propagates derivatives through duals") {
  // d/dt of inv([[t, 1],[1, t]]) at t=2 matches closed form
  double t0 = 2.0;
  Mat<D1> a(2, 2);
  a(0, 0) = D1{t0, 1.0};
  a(0, 1) = D1{1.0, 0.0};
  a(1, 0) = D1{1.0, 0.0};
  a(1, 1) = D1{t0, 1.0};
  Mat<D1> inv = invert(a);
  // inv = 1/(t^2-1) [[t, -1],[-1, t]]; d(inv00)/dt = (-(t^2+1))/(t^2-1)^2
  double den = t0 * t0 - 1.0;
  CHECK(inv(0, 0).a == doctest::Approx(t0 / den));
  CHECK(inv(0, 0).b == doctest::Approx(-(t0 * t0 + 1.0) / (den * den)).epsilon(1e-12));
}

TEST_CASE("eigenvalue oracle recovers a known spectrum") {
  // companion-free check: triangular matrix with given diagonal
  Mat<double> a(4, 4);
  double lam[4] = {-3.0, -3.0, 2.5, 7.0};
  for (int i = 0; i < 4; ++i) a(i, i) = lam[i];
  a(0, 1) = 5.0; a(1, 2) = -2.0; a(0, 3) = 1.0;
  auto ev = eigenvalues(a);
  std::vector<double> re;
  for (auto& z : ev) {
    CHECK(std::abs(z.imag()) < 1e-6);
    re.push_back(z.real());
  }
  std::sort(re.begin(), re.end());
  std::vector<double> want(lam, lam + 4);
  std::sort(want.begin(), want.end());
  for (int i = 0; i < 4; ++i) CHECK(re[i] == doctest::Approx(want[i]).epsilon(1e-5));
}
