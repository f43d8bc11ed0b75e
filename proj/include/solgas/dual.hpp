#pragma once

#include <cmath>
#include <ostream>

namespace solgas {

/// Forward-mode dual number. Replacing double with Dual<double> in a
/// computation propagates one directional derivative exactly (to roundoff);
/// nesting the template (Dual<Dual<double>>, ...) propagates second and
/// higher derivatives. The whole library is templated on the scalar type so
/// that metric/curvature chains — including matrix inversion — can be pushed
/// through up to three levels deep.
template <class T>
struct Dual {
  T a{};  ///< value part
  T b{};  ///< derivative part

  constexpr Dual() = default;
  constexpr Dual(double v) : a(v), b() {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(T value, T deriv) : a(std::move(value)), b(std::move(deriv)) {}

  Dual& operator+=(const Dual& o) { a += o.a; b += o.b; return *this; }
  Dual& operator-=(const Dual& o) { a -= o.a; b -= o.b; return *this; }
  Dual& operator*=(const Dual& o) { *this = *this * o; return *this; }
  Dual& operator/=(const Dual& o) { *this = *this / o; return *this; }

  friend Dual operator+(const Dual& x) { return x; }
  friend Dual operator-(const Dual& x) { return {-x.a, -x.b}; }

  friend Dual operator+(const Dual& x, const Dual& y) { return {x.a + y.a, x.b + y.b}; }
  friend Dual operator-(const Dual& x, const Dual& y) { return {x.a - y.a, x.b - y.b}; }
  friend Dual operator*(const Dual& x, const Dual& y) {
    return {x.a * y.a, x.a * y.b + x.b * y.a};
  }
  friend Dual operator/(const Dual& x, const Dual& y) {
    T q = x.a / y.a;
    return {q, (x.b - q * y.b) / y.a};
  }

  friend Dual operator+(const Dual& x, double c) { return {x.a + c, x.b}; }
  friend Dual operator+(double c, const Dual& x) { return {x.a + c, x.b}; }
  friend Dual operator-(const Dual& x, double c) { return {x.a - c, x.b}; }
  friend Dual operator-(double c, const Dual& x) { return {c - x.a, -x.b}; }
  friend Dual operator*(const Dual& x, double c) { return {x.a * c, x.b * c}; }
  friend Dual operator*(double c, const Dual& x) { return {x.a * c, x.b * c}; }
  friend Dual operator/(const Dual& x, double c) { return {x.a / c, x.b / c}; }
  friend Dual operator/(double c, const Dual& x) { return Dual(c) / x; }

  friend std::ostream& operator<<(std::ostream& os, const Dual& x) {
    return os << "(" << x.a << " + " << x.b << "e)";
  }
};

/// Innermost value of an arbitrarily nested dual.
inline double value(double x) { return x; }
template <class T>
double value(const Dual<T>& x) { return value(x.a); }

// Comparisons act on the value part: branching (abs, pivoting, domain
// checks) must agree with the plain-double execution path.
template <class T> bool operator<(const Dual<T>& x, const Dual<T>& y) { return value(x) < value(y); }
template <class T> bool operator>(const Dual<T>& x, const Dual<T>& y) { return value(x) > value(y); }
template <class T> bool operator<(const Dual<T>& x, double y) { return value(x) < y; }
template <class T> bool operator>(const Dual<T>& x, double y) { return value(x) > y; }
template <class T> bool operator<(double x, const Dual<T>& y) { return x < value(y); }
template <class T> bool operator>(double x, const Dual<T>& y) { return x > value(y); }

using std::abs;
using std::atan;
using std::atanh;
using std::cos;
using std::cosh;
using std::exp;
using std::log;
using std::pow;
using std::sin;
using std::sinh;
using std::sqrt;
using std::tanh;

template <class T>
Dual<T> sin(const Dual<T>& x) {
  return {sin(x.a), cos(x.a) * x.b};
}

template <class T>
Dual<T> cos(const Dual<T>& x) {
  return {cos(x.a), -sin(x.a) * x.b};
}

template <class T>
Dual<T> exp(const Dual<T>& x) {
  T e = exp(x.a);
  return {e, e * x.b};
}

template <class T>
Dual<T> log(const Dual<T>& x) {
  return {log(x.a), x.b / x.a};
}

template <class T>
Dual<T> sqrt(const Dual<T>& x) {
  T s = sqrt(x.a);
  return {s, x.b / (2.0 * s)};
}

template <class T>
Dual<T> sinh(const Dual<T>& x) {
  return {sinh(x.a), cosh(x.a) * x.b};
}

template <class T>
Dual<T> cosh(const Dual<T>& x) {
  return {cosh(x.a), sinh(x.a) * x.b};
}

template <class T>
Dual<T> tanh(const Dual<T>& x) {
  T t = tanh(x.a);
  return {t, (1.0 - t * t) * x.b};
}

template <class T>
Dual<T> atan(const Dual<T>& x) {
  return {atan(x.a), x.b / (1.0 + x.a * x.a)};
}

template <class T>
Dual<T> atanh(const Dual<T>& x) {
  return {atanh(x.a), x.b / (1.0 - x.a * x.a)};
}

template <class T>
Dual<T> abs(const Dual<T>& x) {
  return value(x) < 0.0 ? -x : x;
}

template <class T>
Dual<T> pow(const Dual<T>& x, double c) {
  T p = pow(x.a, c);
  return {p, c * pow(x.a, c - 1.0) * x.b};
}

/// General power via exp(y log x); requires a positive base.
template <class T>
Dual<T> pow(const Dual<T>& x, const Dual<T>& y) {
  return exp(y * log(x));
}

using D1 = Dual<double>;
using D2 = Dual<D1>;
using D3 = Dual<D2>;

/// Derivative of a single-argument callable at x, via one dual sweep.
template <class F>
double derivative(const F& f, double x) {
  return f(D1{x, 1.0}).b;
}

/// Second derivative via nested duals.
template <class F>
double second_derivative(const F& f, double x) {
  D2 r = f(D2{D1{x, 1.0}, D1{1.0, 0.0}});
  return r.b.b;
}

}  // namespace solgas
