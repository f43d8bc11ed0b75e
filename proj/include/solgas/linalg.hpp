#pragma once

#include <complex>
#include <vector>

#include "solgas/dual.hpp"
#include "solgas/errors.hpp"

namespace solgas {

/// Dense row-major matrix over an arbitrary scalar (double or nested duals).
/// Sizes here are tiny (n <= 4 spectral components, 2n coordinates), so no
/// attempt at blocking or expression templates is made.
template <class T>
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols) : r_(rows), c_(cols), d_(static_cast<size_t>(rows) * cols, T{}) {}

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = T{1.0};
    return m;
  }

  int rows() const { return r_; }
  int cols() const { return c_; }

  T& operator()(int i, int j) { return d_[static_cast<size_t>(i) * c_ + j]; }
  const T& operator()(int i, int j) const { return d_[static_cast<size_t>(i) * c_ + j]; }

  friend Mat operator*(const Mat& x, const Mat& y) {
    Mat out(x.r_, y.c_);
    for (int i = 0; i < x.r_; ++i)
      for (int k = 0; k < x.c_; ++k) {
        const T& xik = x(i, k);
        for (int j = 0; j < y.c_; ++j) out(i, j) += xik * y(k, j);
      }
    return out;
  }

  friend Mat operator-(const Mat& x, const Mat& y) {
    Mat out(x.r_, x.c_);
    for (int i = 0; i < x.r_; ++i)
      for (int j = 0; j < x.c_; ++j) out(i, j) = x(i, j) - y(i, j);
    return out;
  }

  friend Mat operator*(const T& s, const Mat& x) {
    Mat out(x.r_, x.c_);
    for (int i = 0; i < x.r_; ++i)
      for (int j = 0; j < x.c_; ++j) out(i, j) = s * x(i, j);
    return out;
  }

 private:
  int r_ = 0, c_ = 0;
  std::vector<T> d_;
};

template <class T>
double max_abs(const Mat<T>& m) {
  double w = 0.0;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) w = std::max(w, std::abs(value(m(i, j))));
  return w;
}

/// Matrix-vector product.
template <class T>
std::vector<T> mat_vec(const Mat<T>& m, const std::vector<T>& v) {
  std::vector<T> out(m.rows(), T{});
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out[i] += m(i, j) * v[j];
  return out;
}

/// Gauss-Jordan inverse with partial pivoting; pivot selection uses the
/// value part so dual and plain executions take identical branches.
/// Returns the determinant alongside. Throws SingularError when a pivot
/// vanishes to machine scale.
template <class T>
Mat<T> invert(Mat<T> a, T* det_out = nullptr) {
  const int n = a.rows();
  Mat<T> inv = Mat<T>::identity(n);
  T det{1.0};
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int i = col + 1; i < n; ++i)
      if (std::abs(value(a(i, col))) > std::abs(value(a(piv, col)))) piv = i;
    if (std::abs(value(a(piv, col))) == 0.0)
      throw SingularError("invert: exactly singular matrix");
    if (piv != col) {
      for (int j = 0; j < n; ++j) {
        std::swap(a(piv, j), a(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
      det = -det;
    }
    T d = a(col, col);
    det *= d;
    for (int j = 0; j < n; ++j) {
      a(col, j) /= d;
      inv(col, j) /= d;
    }
    for (int i = 0; i < n; ++i) {
      if (i == col) continue;
      T f = a(i, col);
      for (int j = 0; j < n; ++j) {
        a(i, j) -= f * a(col, j);
        inv(i, j) -= f * inv(col, j);
      }
    }
  }
  if (det_out) *det_out = det;
  return inv;
}

/// Determinant by LU with partial pivoting.
template <class T>
T determinant(Mat<T> a) {
  const int n = a.rows();
  T det{1.0};
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int i = col + 1; i < n; ++i)
      if (std::abs(value(a(i, col))) > std::abs(value(a(piv, col)))) piv = i;
    if (std::abs(value(a(piv, col))) == 0.0) return T{0.0};
    if (piv != col) {
      for (int j = col; j < n; ++j) std::swap(a(piv, j), a(col, j));
      det = -det;
    }
    det *= a(col, col);
    for (int i = col + 1; i < n; ++i) {
      T f = a(i, col) / a(col, col);
      for (int j = col; j < n; ++j) a(i, j) -= f * a(col, j);
    }
  }
  return det;
}

/// Minor determinant: delete row i, column k.
template <class T>
T minor_det(const Mat<T>& a, int i, int k) {
  const int n = a.rows();
  if (n == 1) return T{1.0};
  Mat<T> m(n - 1, n - 1);
  for (int r = 0, rr = 0; r < n; ++r) {
    if (r == i) continue;
    for (int c = 0, cc = 0; c < n; ++c) {
      if (c == k) continue;
      m(rr, cc) = a(r, c);
      ++cc;
    }
    ++rr;
  }
  return determinant(m);
}

/// All minor determinants A_{i,k} (no sign factors).
template <class T>
Mat<T> cofactor_minors(const Mat<T>& a) {
  const int n = a.rows();
  Mat<T> out(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) out(i, k) = minor_det(a, i, k);
  return out;
}

/// Characteristic polynomial coefficients by the Faddeev-LeVerrier
/// recursion: p(x) = x^n + c[1] x^{n-1} + ... + c[n].
inline std::vector<double> char_poly(const Mat<double>& a) {
  const int n = a.rows();
  std::vector<double> c(static_cast<size_t>(n) + 1, 0.0);
  c[0] = 1.0;
  Mat<double> m = Mat<double>::identity(n);  // M_0 = I
  for (int k = 1; k <= n; ++k) {
    m = a * m;
    double tr = 0.0;
    for (int i = 0; i < n; ++i) tr += m(i, i);
    c[k] = -tr / k;
    for (int i = 0; i < n; ++i) m(i, i) += c[k];
  }
  return c;
}

/// Roots of a monic real polynomial by Durand-Kerner iteration.
/// Adequate for the degree <= 8 spectra exercised here; used as an
/// eigenvalue oracle independent of any matrix structure assumptions.
inline std::vector<std::complex<double>> poly_roots(const std::vector<double>& coeff,
                                                    int max_iter = 500) {
  using C = std::complex<double>;
  const int deg = static_cast<int>(coeff.size()) - 1;
  std::vector<C> z(deg);
  C seed(0.4, 0.9);
  C w(1.0, 0.0);
  for (int i = 0; i < deg; ++i) {
    z[i] = w;
    w *= seed;
  }
  auto eval = [&](C x) {
    C p(0.0, 0.0);
    for (double ck : coeff) p = p * x + ck;
    return p;
  };
  for (int it = 0; it < max_iter; ++it) {
    double moved = 0.0;
    for (int i = 0; i < deg; ++i) {
      C num = eval(z[i]);
      C den(1.0, 0.0);
      for (int j = 0; j < deg; ++j)
        if (j != i) den *= z[i] - z[j];
      C step = num / den;
      z[i] -= step;
      moved = std::max(moved, std::abs(step));
    }
    if (moved < 1e-14) break;
  }
  return z;
}

/// Eigenvalues of a small dense real matrix (possibly complex).
inline std::vector<std::complex<double>> eigenvalues(const Mat<double>& a) {
  return poly_roots(char_poly(a));
}

}  // namespace solgas
