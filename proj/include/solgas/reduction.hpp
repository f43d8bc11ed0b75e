#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "solgas/dual.hpp"
#include "solgas/errors.hpp"
#include "solgas/kernels.hpp"
#include "solgas/linalg.hpp"

namespace solgas {

// Thresholds of the admissible chart: points failing them are rejected, not
// repaired.
constexpr double kDistinctGap = 1e-9;
constexpr double kDetThresholdRel = 1e-12;
constexpr double kWeightThreshold = 1e-10;

/// eps_hat: diagonal r^i, off-diagonal G(eta^i, eta^j).
template <class T>
Mat<T> build_eps_hat(const Kernel& k, std::span<const T> r, std::span<const T> eta) {
  const int n = static_cast<int>(r.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(value(eta[i]) - value(eta[j])) < kDistinctGap)
        throw DistinctnessError("build_eps_hat: eta^" + std::to_string(i + 1) + " and eta^" +
                                std::to_string(j + 1) + " coincide");
      if (!k.domain(value(eta[i]), value(eta[j])))
        throw DomainError(k.name + ": (eta^i, eta^j) pair outside kernel domain");
    }
  Mat<T> e(n, n);
  for (int i = 0; i < n; ++i) {
    e(i, i) = r[i];
    for (int j = i + 1; j < n; ++j) {
      T g = k.G(eta[i], eta[j]);
      e(i, j) = g;
      e(j, i) = g;
    }
  }
  return e;
}

/// beta = -eps_hat^{-1}, with the minor determinants A_{i,k} and det.
/// Throws SingularError when |det| < 1e-12 * (max row norm)^n: the point is
/// outside the admissible chart.
template <class T>
struct BetaResult {
  Mat<T> beta;
  Mat<T> cofactors;  // A_{i,k}: minor deleting row i, column k
  T det;
};

template <class T>
BetaResult<T> invert_to_beta(const Mat<T>& eps_hat) {
  const int n = eps_hat.rows();
  double scale = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += std::abs(value(eps_hat(i, j)));
    scale = std::max(scale, row);
  }
  T det;
  Mat<T> inv = invert(eps_hat, &det);
  if (std::abs(value(det)) <= kDetThresholdRel * std::pow(scale, n))
    throw SingularError("invert_to_beta: det(eps_hat) below admissibility threshold");
  Mat<T> beta(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) beta(i, j) = -inv(i, j);
  BetaResult<T> out{std::move(beta), cofactor_minors(eps_hat), det};
  return out;
}

/// u^i = sum_k beta_{ki} (column sums); solves eps_hat . u = -1.
template <class T>
std::vector<T> weights_u(const Mat<T>& beta) {
  const int n = beta.rows();
  std::vector<T> u(n, T{});
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) u[i] += beta(k, i);
  for (int i = 0; i < n; ++i)
    if (std::abs(value(u[i])) < kWeightThreshold)
      throw DegenerateWeightError("weights_u: u^" + std::to_string(i + 1) + " vanishes");
  return u;
}

/// Everything the reduced system needs at one state point.
/// Coordinates are ordered (r^1, eta^1, ..., r^n, eta^n) throughout.
template <class T>
struct ReducedCore {
  int n = 0;
  std::vector<T> r, eta;
  Mat<T> eps_hat, beta, cofactors;
  T det{};
  std::vector<T> u, xi, v, p;
};

/// v^i via the beta formula (the value that is returned):
///   v^i = (1/u^i) sum_k beta_{ki} xi^k,  xi^k = -S(eta^k).
template <class T>
std::vector<T> velocities_beta_route(const Mat<T>& beta, std::span<const T> u,
                                     std::span<const T> xi) {
  const int n = beta.rows();
  std::vector<T> v(n, T{});
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) v[i] += beta(k, i) * xi[k];
    v[i] /= u[i];
  }
  return v;
}

/// Independent route: solve the defining linear system
///   v^i = -S(eta^i) + sum_{k != i} eps^{ki} u^k (v^k - v^i)
/// as a dense solve in the unknowns v^j.
inline std::vector<double> velocities_direct_solve(const Kernel& k, std::span<const double> r,
                                                   std::span<const double> eta,
                                                   std::span<const double> u) {
  const int n = static_cast<int>(r.size());
  Mat<double> a(n, n);
  std::vector<double> rhs(n);
  for (int i = 0; i < n; ++i) {
    double diag = 1.0;
    for (int kk = 0; kk < n; ++kk) {
      if (kk == i) continue;
      double eps = k.G(eta[kk], eta[i]);
      a(i, kk) = -eps * u[kk];
      diag += eps * u[kk];
    }
    a(i, i) = diag;
    rhs[i] = -k.S(eta[i]);
  }
  Mat<double> ainv = invert(a);
  return mat_vec(ainv, rhs);
}

/// Full assembly of the reduced quantities at (r, eta). The velocity is
/// computed by the beta route; at plain double precision it is additionally
/// cross-checked against the direct linear solve (1e-8 relative), throwing
/// CrossCheckError on disagreement.
template <class T>
ReducedCore<T> reduce_at(const Kernel& k, std::span<const T> r, std::span<const T> eta) {
  ReducedCore<T> c;
  c.n = static_cast<int>(r.size());
  c.r.assign(r.begin(), r.end());
  c.eta.assign(eta.begin(), eta.end());
  c.eps_hat = build_eps_hat(k, r, eta);
  auto br = invert_to_beta(c.eps_hat);
  c.beta = std::move(br.beta);
  c.cofactors = std::move(br.cofactors);
  c.det = br.det;
  c.u = weights_u(c.beta);
  c.xi.resize(c.n);
  for (int i = 0; i < c.n; ++i) c.xi[i] = -k.S(eta[i]);
  c.v = velocities_beta_route(c.beta, std::span<const T>(c.u), std::span<const T>(c.xi));

  if constexpr (std::is_same_v<T, double>) {
    auto vd = velocities_direct_solve(k, r, eta, c.u);
    for (int i = 0; i < c.n; ++i) {
      double ref = std::max({1.0, std::abs(c.v[i]), std::abs(vd[i])});
      if (std::abs(c.v[i] - vd[i]) > 1e-8 * ref)
        throw CrossCheckError("velocities: beta route and direct solve disagree at i=" +
                              std::to_string(i + 1));
    }
  }

  // p^i = (1/u^i) ( sum_{k != i} eps^{ki}_{,eta^i} (v^k - v^i) u^k + (xi^i)' );
  // the k = i term drops since v^i - v^i = 0.
  c.p.resize(c.n);
  for (int i = 0; i < c.n; ++i) {
    T acc{0.0};
    for (int kk = 0; kk < c.n; ++kk) {
      if (kk == i) continue;
      T de = k.dG_deta(eta[kk], eta[i]);
      acc += de * (c.v[kk] - c.v[i]) * c.u[kk];
    }
    acc += -k.dS(eta[i]);
    c.p[i] = acc / c.u[i];
  }
  return c;
}

template <class T>
ReducedCore<T> reduce_at(const Kernel& k, std::span<const T> coords) {
  const int n = static_cast<int>(coords.size()) / 2;
  std::vector<T> r(n), eta(n);
  for (int i = 0; i < n; ++i) {
    r[i] = coords[2 * i];
    eta[i] = coords[2 * i + 1];
  }
  return reduce_at(k, std::span<const T>(r), std::span<const T>(eta));
}

/// 2n x 2n quasilinear system matrix in coordinates (r^1, eta^1, ...):
/// block-diagonal, block i = [[v^i, p^i], [0, v^i]].
template <class T>
Mat<T> assemble_system(const ReducedCore<T>& c) {
  Mat<T> m(2 * c.n, 2 * c.n);
  for (int i = 0; i < c.n; ++i) {
    m(2 * i, 2 * i) = c.v[i];
    m(2 * i, 2 * i + 1) = c.p[i];
    m(2 * i + 1, 2 * i + 1) = c.v[i];
  }
  return m;
}

/// r^i = -(1/u^i)(1 + sum_{k != i} eps^{ki} u^k).
template <class T>
std::vector<T> r_from_u(const Kernel& k, std::span<const T> u, std::span<const T> eta) {
  const int n = static_cast<int>(u.size());
  std::vector<T> r(n);
  for (int i = 0; i < n; ++i) {
    if (std::abs(value(u[i])) < kWeightThreshold)
      throw DegenerateWeightError("r_from_u: u^" + std::to_string(i + 1) + " vanishes");
    T acc{1.0};
    for (int kk = 0; kk < n; ++kk) {
      if (kk == i) continue;
      acc += k.G(eta[kk], eta[i]) * u[kk];
    }
    r[i] = -acc / u[i];
  }
  return r;
}

/// Inverse direction, through the full chain.
template <class T>
std::vector<T> u_from_r(const Kernel& k, std::span<const T> r, std::span<const T> eta) {
  auto eps = build_eps_hat(k, r, eta);
  auto br = invert_to_beta(eps);
  return weights_u(br.beta);
}

/// Admissibility predicate used by samplers and the simulator: the chart is
/// open where det(eps_hat) and every weight stay above thresholds.
inline bool admissible(const Kernel& k, std::span<const double> r, std::span<const double> eta,
                       double det_margin = 1.0, double weight_margin = 1.0) {
  const int n = static_cast<int>(r.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(eta[i] - eta[j]) < kDistinctGap) return false;
      if (!k.domain(eta[i], eta[j])) return false;
    }
  try {
    auto eps = build_eps_hat(k, r, eta);
    double scale = 0.0;
    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j) row += std::abs(eps(i, j));
      scale = std::max(scale, row);
    }
    double det = determinant(eps);
    if (std::abs(det) <= det_margin * kDetThresholdRel * std::pow(scale, n)) return false;
    auto inv = invert(eps);
    for (int i = 0; i < n; ++i) {
      double ui = 0.0;
      for (int kk = 0; kk < n; ++kk) ui -= inv(kk, i);
      if (std::abs(ui) < weight_margin * kWeightThreshold) return false;
    }
  } catch (const Error&) {
    return false;
  }
  return true;
}

}  // namespace solgas
