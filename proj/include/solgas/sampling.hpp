#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "solgas/errors.hpp"
#include "solgas/kernels.hpp"
#include "solgas/reduction.hpp"

namespace solgas {

/// Deterministic splitmix64 generator: reports must be bit-reproducible for
/// a given seed across platforms, which rules out <random> distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool coin() { return (next_u64() & 1ull) != 0; }

 private:
  uint64_t state_;
};

struct SampleBox {
  // r is drawn from [-r_hi, -r_lo] U [r_lo, r_hi]; eta from the kernel box
  // with a minimum pairwise gap.
  double r_lo = 0.5;
  double r_hi = 5.0;
  double eta_lo = 0.5;
  double eta_hi = 3.0;
  double eta_gap = 0.3;

  static SampleBox for_kernel(const Kernel& k) {
    SampleBox b;
    b.eta_lo = k.eta_lo;
    b.eta_hi = k.eta_hi;
    b.eta_gap = k.eta_gap;
    return b;
  }

  /// Largest coordinate span; feeds the tolerance scale of the checkers.
  double width() const { return std::max(2.0 * r_hi, eta_hi - eta_lo); }
};

/// One admissible state point (r^1, eta^1, ..., r^n, eta^n). Rejection
/// sampling against the chart thresholds plus a margin so that derivative
/// stencils of half-width delta stay admissible too.
inline std::vector<double> sample_point(Rng& rng, const Kernel& k, int n, const SampleBox& box,
                                        double delta = 1e-3, int max_tries = 4000) {
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    std::vector<double> r(n), eta(n);
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      r[i] = rng.uniform(box.r_lo, box.r_hi) * (rng.coin() ? 1.0 : -1.0);
      int et = 0;
      for (;; ++et) {
        if (et > 200) { ok = false; break; }
        eta[i] = rng.uniform(box.eta_lo, box.eta_hi);
        bool spaced = true;
        for (int j = 0; j < i; ++j)
          if (std::abs(eta[i] - eta[j]) < box.eta_gap) spaced = false;
        if (spaced) break;
      }
    }
    if (!ok) continue;
    // chart margin: require admissibility with stricter thresholds and at
    // the corners of the delta-stencil in each coordinate
    if (!admissible(k, r, eta, 100.0, 100.0)) continue;
    bool margin_ok = true;
    for (int c = 0; c < 2 * n && margin_ok; ++c) {
      for (double sgn : {-1.0, 1.0}) {
        std::vector<double> rr = r, ee = eta;
        if (c % 2 == 0) rr[c / 2] += sgn * delta;
        else ee[c / 2] += sgn * delta;
        if (!admissible(k, rr, ee, 10.0, 10.0)) { margin_ok = false; break; }
      }
    }
    if (!margin_ok) continue;
    std::vector<double> x(2 * n);
    for (int i = 0; i < n; ++i) {
      x[2 * i] = r[i];
      x[2 * i + 1] = eta[i];
    }
    return x;
  }
  throw InsufficientSamplesError("sample_point: no admissible point found for kernel " + k.name);
}

/// Batch of admissible points.
inline std::vector<std::vector<double>> sample_points(uint64_t seed, const Kernel& k, int n,
                                                      int count, const SampleBox& box,
                                                      double delta = 1e-3) {
  Rng rng(seed);
  std::vector<std::vector<double>> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) pts.push_back(sample_point(rng, k, n, box, delta));
  return pts;
}

/// eta-only tuples (for the algebraic kernel conditions, which do not
/// involve r).
inline std::vector<std::vector<double>> sample_eta_tuples(uint64_t seed, const Kernel& k, int n,
                                                          int count, const SampleBox& box) {
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (int c = 0; c < count; ++c) {
    std::vector<double> eta(n);
    for (int i = 0; i < n; ++i) {
      for (int tries = 0;; ++tries) {
        if (tries > 500)
          throw InsufficientSamplesError("sample_eta_tuples: box too tight for gap");
        eta[i] = rng.uniform(box.eta_lo, box.eta_hi);
        bool ok = true;
        for (int j = 0; j < i; ++j)
          if (std::abs(eta[i] - eta[j]) < box.eta_gap || !k.domain(eta[j], eta[i])) ok = false;
        if (ok) break;
      }
    }
    out.push_back(std::move(eta));
  }
  return out;
}

}  // namespace solgas
