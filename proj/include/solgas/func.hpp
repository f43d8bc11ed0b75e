#pragma once

#include <memory>
#include <span>
#include <utility>

#include "solgas/dual.hpp"
#include "solgas/errors.hpp"

namespace solgas {

// Type-erased scalar functions evaluable on the whole dual tower
// {double, D1, D2, D3}. Erasure keeps kernels and structure ansatz
// runtime-composable (catalogue entries, config expressions) while the
// geometry chain stays generic in the scalar type. Three derivative levels
// are enough: the Riemann tensor needs two, and one more is consumed when an
// ansatz function itself is defined through a dual-evaluated derivative
// (e.g. phi' in the separable families).

/// Single-argument scalar function.
class AnyFn1 {
  struct Iface {
    virtual ~Iface() = default;
    virtual double eval(double x) const = 0;
    virtual D1 eval(const D1& x) const = 0;
    virtual D2 eval(const D2& x) const = 0;
    virtual D3 eval(const D3& x) const = 0;
  };
  template <class F>
  struct Impl final : Iface {
    F f;
    explicit Impl(F fn) : f(std::move(fn)) {}
    double eval(double x) const override { return f(x); }
    D1 eval(const D1& x) const override { return f(x); }
    D2 eval(const D2& x) const override { return f(x); }
    D3 eval(const D3& x) const override { return f(x); }
  };
  std::shared_ptr<const Iface> p_;

 public:
  AnyFn1() = default;
  template <class F>
  AnyFn1(F fn) : p_(std::make_shared<Impl<F>>(std::move(fn))) {}  // NOLINT

  explicit operator bool() const { return static_cast<bool>(p_); }

  template <class T>
  T operator()(const T& x) const { return p_->eval(x); }
};

/// Two-argument scalar function (interaction kernels G(mu, eta)).
class AnyFn2 {
  struct Iface {
    virtual ~Iface() = default;
    virtual double eval(double x, double y) const = 0;
    virtual D1 eval(const D1& x, const D1& y) const = 0;
    virtual D2 eval(const D2& x, const D2& y) const = 0;
    virtual D3 eval(const D3& x, const D3& y) const = 0;
  };
  template <class F>
  struct Impl final : Iface {
    F f;
    explicit Impl(F fn) : f(std::move(fn)) {}
    double eval(double x, double y) const override { return f(x, y); }
    D1 eval(const D1& x, const D1& y) const override { return f(x, y); }
    D2 eval(const D2& x, const D2& y) const override { return f(x, y); }
    D3 eval(const D3& x, const D3& y) const override { return f(x, y); }
  };
  std::shared_ptr<const Iface> p_;

 public:
  AnyFn2() = default;
  template <class F>
  AnyFn2(F fn) : p_(std::make_shared<Impl<F>>(std::move(fn))) {}  // NOLINT

  explicit operator bool() const { return static_cast<bool>(p_); }

  template <class T>
  T operator()(const T& x, const T& y) const { return p_->eval(x, y); }
};

/// Vector-argument scalar function (affinor generators phi^i(eta^1..eta^n)).
class AnyFnN {
  struct Iface {
    virtual ~Iface() = default;
    virtual double eval(std::span<const double> x) const = 0;
    virtual D1 eval(std::span<const D1> x) const = 0;
    virtual D2 eval(std::span<const D2> x) const = 0;
    virtual D3 eval(std::span<const D3> x) const = 0;
  };
  template <class F>
  struct Impl final : Iface {
    F f;
    explicit Impl(F fn) : f(std::move(fn)) {}
    double eval(std::span<const double> x) const override { return f(x); }
    D1 eval(std::span<const D1> x) const override { return f(x); }
    D2 eval(std::span<const D2> x) const override { return f(x); }
    D3 eval(std::span<const D3> x) const override { return f(x); }
  };
  std::shared_ptr<const Iface> p_;

 public:
  AnyFnN() = default;
  template <class F>
  AnyFnN(F fn) : p_(std::make_shared<Impl<F>>(std::move(fn))) {}  // NOLINT

  explicit operator bool() const { return static_cast<bool>(p_); }

  template <class T>
  T operator()(std::span<const T> x) const { return p_->eval(x); }
};

/// d/dx of a type-erased single-argument function, as another AnyFn1.
/// Consumes one level of the dual tower; the depth-3 entry point cannot be
/// reached by any evaluation chain in this library and throws if it ever is.
inline AnyFn1 fn_derivative(AnyFn1 f) {
  struct DerivFn {
    AnyFn1 f;
    double operator()(double x) const { return f(D1{x, 1.0}).b; }
    D1 operator()(const D1& x) const { return f(D2{x, D1{1.0}}).b; }
    D2 operator()(const D2& x) const { return f(D3{x, D2{1.0}}).b; }
    D3 operator()(const D3&) const {
      throw NumericalError("fn_derivative: dual tower exhausted at depth 3");
    }
  };
  return AnyFn1(DerivFn{std::move(f)});
}

}  // namespace solgas
