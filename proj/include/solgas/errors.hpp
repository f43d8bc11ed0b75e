#pragma once

#include <stdexcept>
#include <string>

namespace solgas {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input outside the validity region of a kernel or scalar function
// (log singularities, branch regions, sign changes on a probed grid).
struct DomainError : Error {
  using Error::Error;
};

// Spectral positions too close to coincide: the reduced system needs
// pairwise distinct eta^i.
struct DistinctnessError : Error {
  using Error::Error;
};

// det(eps_hat) below threshold: the point is outside the admissible chart.
struct SingularError : Error {
  using Error::Error;
};

// A weight u^i vanished; the metric and the r<->u transform are undefined.
struct DegenerateWeightError : Error {
  using Error::Error;
};

// A metric block became singular (n_i = 0).
struct DegenerateMetricError : Error {
  using Error::Error;
};

// Two independent evaluation routes disagree beyond tolerance.
struct CrossCheckError : Error {
  using Error::Error;
};

// Derivative modes (dual vs finite difference) or tensor identities failed
// their internal consistency bounds.
struct NumericalError : Error {
  using Error::Error;
};

// Not enough admissible sample points to run a checker.
struct InsufficientSamplesError : Error {
  using Error::Error;
};

// Affinor generator functions violate d phi^j / d eta^i = eps^{ij} mu^i.
struct ConstraintError : Error {
  using Error::Error;
};

// Closed-form density requested outside its branch of validity.
struct BranchError : Error {
  using Error::Error;
};

// Reconstructed flow disagrees with the assembled system matrix.
struct MismatchError : Error {
  using Error::Error;
};

// Time step violates the CFL bound.
struct CFLViolation : Error {
  using Error::Error;
};

// A grid cell left the admissible chart during time evolution.
struct AdmissibilityBreakdown : Error {
  int cell = -1;
  double time = 0.0;
  AdmissibilityBreakdown(const std::string& msg, int cell_, double time_)
      : Error(msg), cell(cell_), time(time_) {}
};

// Configuration / expression parse problems.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace solgas
