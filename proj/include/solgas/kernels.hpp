#pragma once

#include <cmath>
#include <type_traits>
#include <functional>
#include <map>
#include <string>
#include <utility>

#include "solgas/dual.hpp"
#include "solgas/errors.hpp"
#include "solgas/expr.hpp"
#include "solgas/func.hpp"

namespace solgas {

/// Interaction kernel G(mu, eta) plus free soliton velocity S(eta), with
/// exact first-partial access and a validity predicate. Immutable after
/// construction; safe to share across threads read-only.
struct Kernel {
  std::string name;
  std::map<std::string, double> params;

  AnyFn2 G;        ///< symmetric phase-shift kernel
  AnyFn1 S;        ///< free velocity
  AnyFn2 dG_dmu;   ///< dG/dmu, closed form where the catalogue has one
  AnyFn2 dG_deta;  ///< dG/deta
  AnyFn1 dS;

  std::function<bool(double, double)> domain;  ///< (mu, eta) validity
  std::function<bool(double)> s_domain;        ///< eta validity for S

  // Default sampling box for eta (r is kernel-independent): chosen away from
  // singular sets while still exercising curvature.
  double eta_lo = 0.5;
  double eta_hi = 3.0;
  double eta_gap = 0.3;

  // Inner functions, present for the separable / general rows.
  AnyFn1 phi, gfun, afun;
};

namespace detail {

constexpr double kSingularGuard = 1e-9;

/// dG via dual sweeps when no closed form is catalogued. The depth-3 entry
/// would need a fourth dual level; no evaluation chain reaches it.
struct DualPartial {
  AnyFn2 f;
  int slot;  // 0 = mu, 1 = eta
  double operator()(double x, double y) const { return at(x, y); }
  D1 operator()(const D1& x, const D1& y) const { return at(x, y); }
  D2 operator()(const D2& x, const D2& y) const { return at(x, y); }
  D3 operator()(const D3&, const D3&) const {
    throw NumericalError("kernel dG: dual tower exhausted at depth 3");
  }
  template <class T>
  T at(const T& x, const T& y) const {
    Dual<T> dx{x, T{slot == 0 ? 1.0 : 0.0}};
    Dual<T> dy{y, T{slot == 1 ? 1.0 : 0.0}};
    return f(dx, dy).b;
  }
};

inline void attach_dual_dG(Kernel& k) {
  k.dG_dmu = AnyFn2(DualPartial{k.G, 0});
  k.dG_deta = AnyFn2(DualPartial{k.G, 1});
}

inline void attach_dual_dS(Kernel& k) { k.dS = fn_derivative(k.S); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Catalogue
// ---------------------------------------------------------------------------

inline Kernel make_kdv_kernel() {
  Kernel k;
  k.name = "kdv";
  k.G = [](const auto& mu, const auto& eta) {
    return log(abs((mu - eta) / (mu + eta))) / (mu * eta);
  };
  k.S = [](const auto& eta) { return 4.0 * eta * eta; };
  k.dG_dmu = [](const auto& mu, const auto& eta) {
    auto g = log(abs((mu - eta) / (mu + eta))) / (mu * eta);
    return -g / mu + 2.0 / (mu * (mu * mu - eta * eta));
  };
  k.dG_deta = [](const auto& mu, const auto& eta) {
    auto g = log(abs((mu - eta) / (mu + eta))) / (mu * eta);
    return -g / eta - 2.0 / (eta * (mu * mu - eta * eta));
  };
  k.dS = [](const auto& eta) { return 8.0 * eta; };
  k.domain = [](double mu, double eta) {
    return std::abs(mu - eta) > detail::kSingularGuard &&
           std::abs(mu + eta) > detail::kSingularGuard &&
           std::abs(mu) > detail::kSingularGuard && std::abs(eta) > detail::kSingularGuard;
  };
  k.s_domain = [](double) { return true; };
  k.eta_lo = 0.5; k.eta_hi = 3.0; k.eta_gap = 0.3;
  return k;
}

inline Kernel make_sinh_gordon_kernel(double a = 1.0) {
  Kernel k;
  k.name = "sinh_gordon";
  k.params["a"] = a;
  k.G = [a](const auto& mu, const auto& eta) {
    auto d = eta - mu;
    auto sh = sinh(d);
    return (a * a) * cosh(d) / (4.0 * cosh(eta) * cosh(mu) * sh * sh);
  };
  k.S = [](const auto& eta) { return tanh(eta); };
  detail::attach_dual_dG(k);
  k.dS = [](const auto& eta) {
    auto t = tanh(eta);
    return 1.0 - t * t;
  };
  k.domain = [](double mu, double eta) { return std::abs(mu - eta) > detail::kSingularGuard; };
  k.s_domain = [](double) { return true; };
  k.eta_lo = 0.3; k.eta_hi = 2.4; k.eta_gap = 0.3;
  return k;
}

inline Kernel make_hard_rod_kernel(double a = 1.0) {
  Kernel k;
  k.name = "hard_rod";
  k.params["a"] = a;
  k.G = [a](const auto& mu, const auto&) { return std::decay_t<decltype(mu)>{-a}; };
  k.S = [](const auto& eta) { return eta; };
  k.dG_dmu = [](const auto& mu, const auto&) { return std::decay_t<decltype(mu)>{0.0}; };
  k.dG_deta = [](const auto& mu, const auto&) { return std::decay_t<decltype(mu)>{0.0}; };
  k.dS = [](const auto& eta) { return std::decay_t<decltype(eta)>{1.0}; };
  k.domain = [](double, double) { return true; };
  k.s_domain = [](double) { return true; };
  k.eta_lo = 0.5; k.eta_hi = 3.0; k.eta_gap = 0.3;
  return k;
}

inline Kernel make_lieb_liniger_kernel(double a = 1.0) {
  Kernel k;
  k.name = "lieb_liniger";
  k.params["a"] = a;
  k.G = [a](const auto& mu, const auto& eta) {
    auto d = eta - mu;
    return 2.0 * a / (a * a + d * d);
  };
  k.S = [](const auto& eta) { return eta; };
  k.dG_dmu = [a](const auto& mu, const auto& eta) {
    auto d = eta - mu;
    auto den = a * a + d * d;
    return 4.0 * a * d / (den * den);
  };
  k.dG_deta = [a](const auto& mu, const auto& eta) {
    auto d = eta - mu;
    auto den = a * a + d * d;
    return -4.0 * a * d / (den * den);
  };
  k.dS = [](const auto& eta) { return std::decay_t<decltype(eta)>{1.0}; };
  k.domain = [](double, double) { return true; };
  k.s_domain = [](double) { return true; };
  k.eta_lo = 0.5; k.eta_hi = 3.0; k.eta_gap = 0.3;
  return k;
}

inline Kernel make_dnls_kernel() {
  Kernel k;
  k.name = "dnls";
  k.G = [](const auto& mu, const auto& eta) {
    auto se = sqrt(eta * eta - 1.0);
    auto sm = sqrt(mu * mu - 1.0);
    auto d2 = (eta - mu) * (eta - mu);
    auto num = d2 - (se + sm) * (se + sm);
    auto den = d2 - (se - sm) * (se - sm);
    return log(num / den) / (2.0 * se * sm);
  };
  k.S = [](const auto& eta) { return eta; };
  detail::attach_dual_dG(k);
  k.dS = [](const auto& eta) { return std::decay_t<decltype(eta)>{1.0}; };
  // Branch fixed to mu, eta > 1; the log argument is then positive away from
  // the collision set mu = eta.
  k.domain = [](double mu, double eta) {
    if (mu <= 1.0 + detail::kSingularGuard || eta <= 1.0 + detail::kSingularGuard) return false;
    if (std::abs(mu - eta) < detail::kSingularGuard) return false;
    double se = std::sqrt(eta * eta - 1.0), sm = std::sqrt(mu * mu - 1.0);
    double d2 = (eta - mu) * (eta - mu);
    double num = d2 - (se + sm) * (se + sm);
    double den = d2 - (se - sm) * (se - sm);
    return num / den > 0.0;
  };
  k.s_domain = [](double eta) { return std::abs(eta) > 1.0; };
  k.eta_lo = 1.2; k.eta_hi = 3.0; k.eta_gap = 0.3;
  return k;
}

/// Table row "separable case": G = phi(eta) + phi(mu), S arbitrary
/// (defaults to S = eta when no expression is supplied).
inline Kernel make_additive_separable_kernel(AnyFn1 phi_fn, AnyFn1 s_fn = {},
                                             const std::string& tag = "additive_separable") {
  Kernel k;
  k.name = tag;
  k.phi = std::move(phi_fn);
  if (!s_fn) s_fn = AnyFn1([](const auto& eta) { return eta; });
  k.S = s_fn;
  AnyFn1 phi = k.phi;
  k.G = [phi](const auto& mu, const auto& eta) { return phi(mu) + phi(eta); };
  AnyFn1 dphi = fn_derivative(phi);
  k.dG_dmu = [dphi](const auto& mu, const auto&) { return dphi(mu); };
  k.dG_deta = [dphi](const auto&, const auto& eta) { return dphi(eta); };
  detail::attach_dual_dS(k);
  k.domain = [](double, double) { return true; };
  k.s_domain = [](double) { return true; };
  k.eta_lo = 0.2; k.eta_hi = 2.0; k.eta_gap = 0.3;
  return k;
}

inline Kernel make_additive_separable_kernel() {
  return make_additive_separable_kernel(AnyFn1([](const auto& eta) { return exp(eta); }));
}

/// Table row "general case": G = phi(mu) phi(eta) g(a(mu) - a(eta)).
/// Defaults phi = exp, g = cosh, a = identity.
inline Kernel make_general_kernel(AnyFn1 phi_fn, AnyFn1 g_fn, AnyFn1 a_fn, AnyFn1 s_fn = {},
                                  const std::string& tag = "general") {
  Kernel k;
  k.name = tag;
  k.phi = std::move(phi_fn);
  k.gfun = std::move(g_fn);
  k.afun = std::move(a_fn);
  if (!s_fn) s_fn = AnyFn1([](const auto& eta) { return eta; });
  k.S = s_fn;
  AnyFn1 phi = k.phi, g = k.gfun, a = k.afun;
  k.G = [phi, g, a](const auto& mu, const auto& eta) {
    return phi(mu) * phi(eta) * g(a(mu) - a(eta));
  };
  detail::attach_dual_dG(k);
  detail::attach_dual_dS(k);
  k.domain = [](double, double) { return true; };
  k.s_domain = [](double) { return true; };
  k.eta_lo = 0.2; k.eta_hi = 1.6; k.eta_gap = 0.3;
  return k;
}

inline Kernel make_general_kernel() {
  return make_general_kernel(AnyFn1([](const auto& eta) { return exp(eta); }),
                             AnyFn1([](const auto& x) { return cosh(x); }),
                             AnyFn1([](const auto& x) { return x; }));
}

/// User kernel from expressions over the fixed grammar. The domain
/// expression, when present, marks (mu, eta) valid where it evaluates > 0.
inline Kernel make_expr_kernel(const std::string& name, const std::string& g_src,
                               const std::string& s_src, const std::string& domain_src = "",
                               const std::map<std::string, double>& params = {}) {
  Kernel k;
  k.name = name;
  k.params = params;
  Expr ge = Expr::parse(g_src, {"mu", "eta"}, params);
  Expr se = Expr::parse(s_src, {"eta"}, params);
  k.G = ge.as_fn2();
  k.S = se.as_fn1();
  detail::attach_dual_dG(k);
  detail::attach_dual_dS(k);
  if (!domain_src.empty()) {
    Expr de = Expr::parse(domain_src, {"mu", "eta"}, params);
    k.domain = [de](double mu, double eta) { return de.eval2(mu, eta) > 0.0; };
  } else {
    k.domain = [](double, double) { return true; };
  }
  k.s_domain = [](double) { return true; };
  return k;
}

/// Catalogue lookup by name; parameterized entries accept "a" from params.
inline Kernel make_kernel(const std::string& name,
                          const std::map<std::string, double>& params = {}) {
  auto a_of = [&params](double dflt) {
    auto it = params.find("a");
    return it == params.end() ? dflt : it->second;
  };
  if (name == "kdv") return make_kdv_kernel();
  if (name == "sinh_gordon") return make_sinh_gordon_kernel(a_of(1.0));
  if (name == "hard_rod") return make_hard_rod_kernel(a_of(1.0));
  if (name == "lieb_liniger") return make_lieb_liniger_kernel(a_of(1.0));
  if (name == "dnls") return make_dnls_kernel();
  if (name == "additive_separable") return make_additive_separable_kernel();
  if (name == "general") return make_general_kernel();
  throw ConfigError("unknown kernel '" + name + "'");
}

// ---------------------------------------------------------------------------
// Checked evaluation entry points
// ---------------------------------------------------------------------------

inline double eval_G(const Kernel& k, double mu, double eta) {
  if (!k.domain(mu, eta))
    throw DomainError(k.name + ": (mu, eta) = (" + std::to_string(mu) + ", " +
                      std::to_string(eta) + ") outside kernel domain");
  double g = k.G(mu, eta);
  if (!std::isfinite(g)) throw DomainError(k.name + ": non-finite kernel value");
  return g;
}

inline double eval_S(const Kernel& k, double eta) {
  if (!k.s_domain(eta))
    throw DomainError(k.name + ": eta = " + std::to_string(eta) + " outside S domain");
  return k.S(eta);
}

/// Both first partials of G. With cross_check on, a central finite
/// difference (step 1e-5 scaled) must agree with the primary derivative to
/// max(1e-7, 1e-6 |value|), else NumericalError.
inline std::pair<double, double> eval_dG(const Kernel& k, double mu, double eta,
                                         bool cross_check = false) {
  if (!k.domain(mu, eta))
    throw DomainError(k.name + ": (mu, eta) outside kernel domain in eval_dG");
  double d1 = k.dG_dmu(mu, eta);
  double d2 = k.dG_deta(mu, eta);
  if (cross_check) {
    const double h = 1e-5;
    double f1 = (k.G(mu + h, eta) - k.G(mu - h, eta)) / (2 * h);
    double f2 = (k.G(mu, eta + h) - k.G(mu, eta - h)) / (2 * h);
    auto bad = [](double d, double f) {
      return std::abs(d - f) > std::max(1e-7, 1e-6 * std::abs(d));
    };
    if (bad(d1, f1) || bad(d2, f2))
      throw NumericalError(k.name + ": dG dual/finite-difference cross-check failed");
  }
  return {d1, d2};
}

}  // namespace solgas
