#pragma once

#include <cmath>
#include <functional>

#include "solgas/dual.hpp"
#include "solgas/errors.hpp"
#include "solgas/func.hpp"

namespace solgas {

namespace detail {

inline double simpson(double a, double fa, double fm, double b, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_step(const std::function<double(double)>& f, double a, double fa, double b,
                            double fb, double m, double fm, double whole, double tol, int depth) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson(a, fa, flm, m, fm);
  double right = simpson(m, fm, frm, b, fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adaptive_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature; smooth integrands only.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12, int max_depth = 40) {
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm))
    throw NumericalError("integrate: non-finite integrand");
  double whole = detail::simpson(a, fa, fm, b, fb);
  return detail::adaptive_step(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

/// F(x) = int_{x0}^{x} integrand(t) dt as a member of the dual tower:
/// quadrature delivers the value, the fundamental theorem of calculus the
/// derivative parts — F(a + eps b) = F(a) + integrand(a) b eps, recursively.
struct Antiderivative {
  AnyFn1 integrand;
  double x0 = 0.0;
  double tol = 1e-12;

  double operator()(double x) const {
    return integrate([this](double t) { return integrand(t); }, x0, x, tol);
  }

  template <class T>
  Dual<T> operator()(const Dual<T>& x) const {
    return {(*this)(x.a), integrand(x.a) * x.b};
  }
};

}  // namespace solgas
