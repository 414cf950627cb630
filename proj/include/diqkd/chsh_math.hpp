#pragma once

// Scalar formula layer for CHSH-based device-independent QKD analysis:
// binary entropy, CHSH <-> game-probability conversions, the depolarizing
// noise model, Hoeffding tails, and the three single-round entropy bounds
// (von Neumann, min-entropy, collision) as functions of the violation.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace diqkd {

inline constexpr double kSqrt2 = 1.41421356237309504880168872420969808;
inline constexpr double kBetaClassical = 2.0;
inline constexpr double kBetaQuantumMax = 2.0 * kSqrt2;
inline constexpr double kOmegaClassical = 0.75;
inline constexpr double kOmegaQuantumMax = (2.0 + kSqrt2) / 4.0;

namespace detail {

[[noreturn]] inline void domain_fail(const std::string& what, double value) {
  throw std::domain_error(what + " (got " + std::to_string(value) + ")");
}

// clamp a square-root argument whose analytic range is [lo, hi]; values
// drift out by rounding near the endpoints of the beta interval
inline double clamp_arg(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}

}  // namespace detail

// h(p) = -p log2 p - (1-p) log2(1-p), endpoints defined as exactly 0
inline double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) detail::domain_fail("binary_entropy: p must lie in [0,1]", p);
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

// h'(p) = log2((1-p)/p); diverges at the endpoints
inline double binary_entropy_derivative(double p) {
  if (!(p > 0.0 && p < 1.0))
    detail::domain_fail("binary_entropy_derivative: p must lie in (0,1)", p);
  return std::log2((1.0 - p) / p);
}

class WinningProbability;

// CHSH value; quantum-feasible range [2, 2*sqrt(2)], values in [0,2) are
// legal inputs ("classical": every entropy bound evaluates to 0 there).
// Values within 1e-12 above the quantum maximum are clamped.
class ChshViolation {
 public:
  explicit ChshViolation(double beta) : beta_(beta) {
    if (!(beta >= 0.0 && beta <= kBetaQuantumMax + 1e-12))
      detail::domain_fail("ChshViolation: beta must lie in [0, 2*sqrt(2)]", beta);
    beta_ = std::min(beta_, kBetaQuantumMax);
  }
  double value() const { return beta_; }
  bool classical() const { return beta_ < kBetaClassical; }
  WinningProbability to_omega() const;

 private:
  double beta_;
};

// CHSH game winning probability; omega = (4+beta)/8
class WinningProbability {
 public:
  explicit WinningProbability(double omega) : omega_(omega) {
    if (!(omega >= 0.0 && omega <= 1.0))
      detail::domain_fail("WinningProbability: omega must lie in [0,1]", omega);
  }
  double value() const { return omega_; }
  bool quantum_feasible() const {
    return omega_ >= kOmegaClassical && omega_ <= kOmegaQuantumMax + 1e-12;
  }
  ChshViolation to_beta() const { return ChshViolation(8.0 * omega_ - 4.0); }

 private:
  double omega_;
};

inline WinningProbability ChshViolation::to_omega() const {
  return WinningProbability((4.0 + beta_) / 8.0);
}

// depolarized singlet: Q = nu/2 and beta = 2*sqrt(2)*(1-nu) = 2*sqrt(2)*(1-2Q)
struct NoisePoint {
  double nu;
  double q;
  double beta;
};

inline NoisePoint depolarizing_point(double nu) {
  if (!(nu >= 0.0 && nu <= 1.0))
    detail::domain_fail("depolarizing_point: nu must lie in [0,1]", nu);
  return NoisePoint{nu, nu / 2.0, 2.0 * kSqrt2 * (1.0 - nu)};
}

inline NoisePoint depolarizing_point_from_qber(double q) {
  if (!(q >= 0.0 && q <= 0.5))
    detail::domain_fail("depolarizing_point_from_qber: q must lie in [0,1/2]", q);
  return depolarizing_point(2.0 * q);
}

// P(observed mean below expectation - delta) <= exp(-2 gamma n delta^2)
inline double hoeffding_tail(double gamma, double n, double delta) {
  if (!(gamma > 0.0 && gamma <= 1.0)) detail::domain_fail("hoeffding_tail: gamma in (0,1]", gamma);
  if (!(n >= 1.0)) detail::domain_fail("hoeffding_tail: n >= 1", n);
  if (!(delta >= 0.0)) detail::domain_fail("hoeffding_tail: delta >= 0", delta);
  return std::exp(-2.0 * gamma * n * delta * delta);
}

// inverse of hoeffding_tail in delta; -log(eps) keeps subnormal eps finite
inline double hoeffding_width(double gamma, double n, double eps) {
  if (!(gamma > 0.0 && gamma <= 1.0)) detail::domain_fail("hoeffding_width: gamma in (0,1]", gamma);
  if (!(n >= 1.0)) detail::domain_fail("hoeffding_width: n >= 1", n);
  if (!(eps > 0.0 && eps < 1.0)) detail::domain_fail("hoeffding_width: eps in (0,1)", eps);
  return std::sqrt(-std::log(eps) / (2.0 * gamma * n));
}

// Conditional von Neumann entropy bound, omega form:
// 1 - h(1/2 + 1/2 sqrt(16 w (w-1) + 3)); 0 at and below the classical point.
inline double von_neumann_bound_omega(double omega) {
  if (omega <= kOmegaClassical) return 0.0;
  double arg = detail::clamp_arg(16.0 * omega * (omega - 1.0) + 3.0, 0.0, 1.0);
  return std::max(0.0, 1.0 - binary_entropy(0.5 + 0.5 * std::sqrt(arg)));
}

// same bound in beta form: 1 - h(1/2 + 1/2 sqrt((beta/2)^2 - 1))
inline double von_neumann_bound(const ChshViolation& beta) {
  double b = beta.value();
  if (b <= kBetaClassical) return 0.0;
  double arg = detail::clamp_arg(b * b / 4.0 - 1.0, 0.0, 1.0);
  return std::max(0.0, 1.0 - binary_entropy(0.5 + 0.5 * std::sqrt(arg)));
}

// Conditional min-entropy bound: -log2(1/2 + 1/2 sqrt(2 - beta^2/4))
inline double min_entropy_bound(const ChshViolation& beta) {
  double b = beta.value();
  if (b <= kBetaClassical) return 0.0;
  double arg = detail::clamp_arg(2.0 - b * b / 4.0, 0.0, 2.0);
  return std::max(0.0, -std::log2(0.5 + 0.5 * std::sqrt(arg)));
}

inline double min_entropy_bound_omega(double omega) {
  if (omega <= kOmegaClassical) return 0.0;
  double arg = detail::clamp_arg(16.0 * omega * (1.0 - omega) - 2.0, 0.0, 2.0);
  return std::max(0.0, -std::log2(0.5 + 0.5 * std::sqrt(arg)));
}

// The collision-entropy bound is tight and coincides with the min-entropy
// bound; exposed under its own name so call sites document which bound
// they invoke.
inline double collision_bound(const ChshViolation& beta) { return min_entropy_bound(beta); }
inline double collision_bound_omega(double omega) { return min_entropy_bound_omega(omega); }

}  // namespace diqkd
