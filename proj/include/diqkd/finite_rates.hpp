#pragma once

// Finite-size key lengths for CHSH-based DIQKD.
//
// Three bounds are implemented over the same protocol parameters:
//   - coherent attacks via entropy accumulation over variable-length blocks
//     (min-tradeoff function, tangent construction, sqrt(m) second order),
//   - collective attacks via the finite asymptotic equipartition property
//     and the von Neumann entropy bound,
//   - collective attacks via additivity of the conditional collision entropy.
// Every bound is reported as a signed term decomposition whose fields sum
// exactly to the total.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "diqkd/chsh_math.hpp"

namespace diqkd {

enum class AttackKind { kCoherent, kCollectiveAep, kCollectiveH2 };

inline const char* attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::kCoherent: return "coherent";
    case AttackKind::kCollectiveAep: return "collective-aep";
    case AttackKind::kCollectiveH2: return "collective-h2";
  }
  return "?";
}

// Second-order factor of the accumulation bound. The closed form uses the
// bare smoothing parameter; the variant discounts it by the lower bound on
// the non-abort probability, which is strictly more conservative.
enum class EatNuForm { kBare, kAbortDiscounted };

struct InfeasibleBudgetError : std::domain_error {
  using std::domain_error::domain_error;
};

// epsilon decomposition; eps_ea/eps_t are used by the coherent bound only,
// eps_con by the collective bounds only
struct SecurityBudget {
  double eps_smooth = 0.0;
  double eps_ec = 0.0;
  double eps_ec_prime = 0.0;
  double eps_pa = 0.0;
  double eps_ea = 0.0;
  double eps_con = 0.0;
  double eps_t = 0.0;

  void validate(AttackKind kind) const {
    auto in01 = [](double e, const char* what) {
      if (!(e > 0.0 && e < 1.0))
        throw std::domain_error(std::string("SecurityBudget: ") + what +
                                " must lie in (0,1), got " + std::to_string(e));
    };
    in01(eps_ec, "eps_ec");
    in01(eps_ec_prime, "eps_ec_prime");
    in01(eps_pa, "eps_pa");
    if (kind != AttackKind::kCollectiveH2) in01(eps_smooth, "eps_smooth");
    if (kind == AttackKind::kCoherent) {
      in01(eps_ea, "eps_ea");
      in01(eps_t, "eps_t");
      if (!(eps_ec_prime > 2.0 * std::sqrt(eps_t)))
        throw InfeasibleBudgetError("SecurityBudget: requires eps_ec_prime > 2*sqrt(eps_t)");
    } else {
      in01(eps_con, "eps_con");
    }
  }
};

struct ComposedSecurity {
  double soundness;        // attack-specific correct-and-secret parameter
  double abort_threshold;  // the bound is vacuous if P(abort) exceeds 1 - this
};

inline ComposedSecurity compose_security(const SecurityBudget& b, AttackKind kind) {
  switch (kind) {
    case AttackKind::kCoherent:
      return {2.0 * b.eps_ec + b.eps_pa + b.eps_smooth, b.eps_ea + b.eps_ec};
    case AttackKind::kCollectiveAep:
      return {2.0 * b.eps_ec + b.eps_smooth + b.eps_pa, b.eps_con + b.eps_ec};
    case AttackKind::kCollectiveH2:
      return {2.0 * b.eps_ec + b.eps_pa, b.eps_con + b.eps_ec};
  }
  throw std::logic_error("compose_security: bad attack kind");
}

// expected rounds n, test fraction gamma, honest winning probability and
// QBER, statistical widths for the Bell estimate
struct ProtocolParams {
  double n = 0.0;
  double gamma = 0.0;
  double omega_exp = 0.0;
  double q = 0.0;
  double delta_est = 0.0;
  double delta_con = 0.0;  // collective only

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0))
      detail::domain_fail("ProtocolParams: gamma must lie in (0,1]", gamma);
    if (!(gamma * n >= 1.0)) detail::domain_fail("ProtocolParams: requires gamma*n >= 1", gamma * n);
    if (!(omega_exp >= 0.0 && omega_exp <= kOmegaQuantumMax + 1e-12))
      detail::domain_fail("ProtocolParams: omega_exp outside quantum range", omega_exp);
    if (!(q >= 0.0 && q <= 0.5)) detail::domain_fail("ProtocolParams: q must lie in [0,1/2]", q);
    if (!(delta_est >= 0.0)) detail::domain_fail("ProtocolParams: delta_est >= 0", delta_est);
    if (!(delta_con >= 0.0)) detail::domain_fail("ProtocolParams: delta_con >= 0", delta_con);
  }
};

// block bookkeeping for the variable-length protocol:
// s_max = ceil(1/gamma), s_bar = expected block length, m = n / s_bar
struct BlockStructure {
  long long s_max;
  double s_bar;
  double m;
};

inline BlockStructure block_structure(double gamma, double n) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    detail::domain_fail("block_structure: gamma must lie in (0,1]", gamma);
  long long s_max = static_cast<long long>(std::ceil(1.0 / gamma));
  double s_bar = (1.0 - std::pow(1.0 - gamma, static_cast<double>(s_max))) / gamma;
  return BlockStructure{s_max, s_bar, n / s_bar};
}

// probability that a block contains a test round: 1 - (1-gamma)^s_max
inline double block_test_probability(double gamma) {
  long long s_max = static_cast<long long>(std::ceil(1.0 / gamma));
  return 1.0 - std::pow(1.0 - gamma, static_cast<double>(s_max));
}

// normalized tangency point of the min-tradeoff tangent construction
struct TradeoffTangent {
  double pt_ratio;

  void validate() const {
    if (!(pt_ratio > kOmegaClassical && pt_ratio < kOmegaQuantumMax))
      detail::domain_fail("TradeoffTangent: pt_ratio must lie in (3/4, (2+sqrt2)/4)", pt_ratio);
  }
};

// free parameters chosen for one evaluation, echoed into every breakdown
struct ChosenParams {
  AttackKind attack = AttackKind::kCollectiveAep;
  double n = 0.0;
  double gamma = 0.0;
  double omega_exp = 0.0;
  double q = 0.0;
  double delta_est = 0.0;
  double delta_con = 0.0;
  double pt_ratio = 0.0;  // coherent only
  SecurityBudget budget;
};

// signed decomposition of a key-length bound; the four components satisfy
// total_l = entropy_term - ec_leakage - sqrt_n_corrections - constant_penalties
struct KeyLengthBreakdown {
  double entropy_term = 0.0;
  double ec_leakage = 0.0;
  double sqrt_n_corrections = 0.0;
  double constant_penalties = 0.0;
  double total_l = 0.0;
  double rate = 0.0;
  bool feasible = false;
  double soundness = 0.0;
  double abort_threshold = 0.0;
  ChosenParams chosen;
};

namespace detail {

inline double log2_1p_scaled(long long s_max) {
  // log2(1 + 6 * 2^s_max) = s_max + log2(6 + 2^-s_max), safe for any s_max
  double tail = (s_max < 1060) ? std::pow(2.0, -static_cast<double>(s_max)) : 0.0;
  return static_cast<double>(s_max) + std::log2(6.0 + tail);
}

inline double ec_round_entropy(const ProtocolParams& p) {
  return (1.0 - p.gamma) * binary_entropy(p.q) + p.gamma * binary_entropy(p.omega_exp);
}

inline double four_log_eta() { return 4.0 * std::log2(2.0 * kSqrt2 + 1.0); }

inline double smoothing_factor(double eps_smooth, EatNuForm form, double abort_threshold) {
  double eps = (form == EatNuForm::kBare) ? eps_smooth : eps_smooth * abort_threshold;
  return std::sqrt(1.0 - 2.0 * std::log2(eps));
}

}  // namespace detail

// Minimum error-correction leakage for the fixed-length protocol:
// n((1-g)h(Q) + g h(w)) + sqrt(n) 4log2(2sqrt2+1) sqrt(log2(8/e'^2))
//   + log2(8/e'^2 + 2/(2-e')) + log2(1/e_EC)
inline double ec_leakage_collective(const ProtocolParams& p, const SecurityBudget& b) {
  p.validate();
  double ep = b.eps_ec_prime;
  return p.n * detail::ec_round_entropy(p) +
         std::sqrt(p.n) * detail::four_log_eta() * std::sqrt(std::log2(8.0 / (ep * ep))) +
         std::log2(8.0 / (ep * ep) + 2.0 / (2.0 - ep)) + std::log2(1.0 / b.eps_ec);
}

namespace detail {

struct CoherentLeakageParts {
  double lead;    // (n + t) * per-round EC entropy
  double sqrt_corr;  // sqrt(n + t) * nu_ec
  double consts;
  double t;
};

inline CoherentLeakageParts coherent_leakage_parts(const ProtocolParams& p,
                                                   const SecurityBudget& b) {
  double ep = b.eps_ec_prime;
  if (!(ep > 2.0 * std::sqrt(b.eps_t)))
    throw InfeasibleBudgetError("ec_leakage_coherent: requires eps_ec_prime > 2*sqrt(eps_t)");
  BlockStructure bs = block_structure(p.gamma, p.n);
  double t = std::sqrt(bs.m * (1.0 - p.gamma) * (1.0 - p.gamma) * std::log(1.0 / b.eps_t) /
                       (2.0 * p.gamma * p.gamma));
  double floor = ep - 2.0 * std::sqrt(b.eps_t);
  double nu_ec = four_log_eta() * std::sqrt(2.0 * std::log2(8.0 / (floor * floor)));
  return CoherentLeakageParts{
      (p.n + t) * ec_round_entropy(p), std::sqrt(p.n + t) * nu_ec,
      std::log2(8.0 / (ep * ep) + 2.0 / (2.0 - ep)) + std::log2(1.0 / b.eps_ec), t};
}

}  // namespace detail

// Leakage for the variable-length protocol. The round count exceeds its
// expectation n by more than t with probability at most eps_t, where
// t = sqrt(m (1-gamma)^2 ln(1/eps_t) / (2 gamma^2)); the max-entropy
// smoothing then loses sqrt(eps_t), hence the eps'_EC - 2 sqrt(eps_t) floor.
inline double ec_leakage_coherent(const ProtocolParams& p, const SecurityBudget& b) {
  p.validate();
  auto parts = detail::coherent_leakage_parts(p, b);
  return parts.lead + parts.sqrt_corr + parts.consts;
}

// accumulated entropy per block at normalized winning ratio r:
// g(r) = s_bar (1 - h(1/2 + 1/2 sqrt(16 r (r-1) + 3)))
inline double g_tradeoff(double p1_ratio, double gamma) {
  if (!(p1_ratio >= kOmegaClassical && p1_ratio <= kOmegaQuantumMax + 1e-12))
    detail::domain_fail("g_tradeoff: ratio must lie in [3/4, (2+sqrt2)/4]", p1_ratio);
  BlockStructure bs = block_structure(gamma, 1.0);
  return bs.s_bar * von_neumann_bound_omega(std::min(p1_ratio, kOmegaQuantumMax));
}

namespace detail {

// dg/dr in ratio space; nonnegative, increasing, divergent at the right edge
inline double g_tradeoff_slope_ratio(double r, double gamma) {
  BlockStructure bs = block_structure(gamma, 1.0);
  double arg = clamp_arg(16.0 * r * (r - 1.0) + 3.0, 0.0, 1.0);
  if (arg <= 0.0) return 0.0;
  double u = 0.5 + 0.5 * std::sqrt(arg);
  if (u >= 1.0) return std::numeric_limits<double>::infinity();
  return bs.s_bar * std::log2(u / (1.0 - u)) * 4.0 * (2.0 * r - 1.0) / std::sqrt(arg);
}

// derivative with respect to the unnormalized block frequency p(1) = r * c
inline double g_tradeoff_slope_unnormalized(double r, double gamma) {
  return g_tradeoff_slope_ratio(r, gamma) / block_test_probability(gamma);
}

}  // namespace detail

// tangent of g at pt, evaluated at p1_ratio; g is convex so this is a
// global lower bound, equal to g at the tangency point
inline double f_min_tangent(double p1_ratio, const TradeoffTangent& tangent, double gamma) {
  tangent.validate();
  if (!(p1_ratio >= kOmegaClassical && p1_ratio <= kOmegaQuantumMax + 1e-12))
    detail::domain_fail("f_min_tangent: ratio must lie in [3/4, (2+sqrt2)/4]", p1_ratio);
  double c = block_test_probability(gamma);
  double slope = detail::g_tradeoff_slope_unnormalized(tangent.pt_ratio, gamma);
  // slope * p(1) + (g(pt) - slope * pt(1)) with p(1) = ratio * c
  return slope * p1_ratio * c + g_tradeoff(tangent.pt_ratio, gamma) -
         slope * tangent.pt_ratio * c;
}

// second-order factor for the max-entropy test-statistic bound
inline double nu_one(double omega_exp, double delta_est, double gamma, double eps_smooth,
                     EatNuForm form = EatNuForm::kBare, double abort_threshold = 1.0) {
  if (!(omega_exp + delta_est < 1.0))
    detail::domain_fail("nu_one: omega_exp + delta_est must lie below 1", omega_exp + delta_est);
  double c = block_test_probability(gamma);
  double grad = std::abs(binary_entropy_derivative(omega_exp + delta_est)) / c;
  return 2.0 * (std::log2(7.0) + std::ceil(grad)) *
         detail::smoothing_factor(eps_smooth, form, abort_threshold);
}

// second-order factor for the accumulated min-entropy at tangency point pt
inline double nu_tradeoff(const TradeoffTangent& tangent, double gamma, double eps_smooth,
                          EatNuForm form = EatNuForm::kBare, double abort_threshold = 1.0) {
  tangent.validate();
  long long s_max = block_structure(gamma, 1.0).s_max;
  double grad = detail::g_tradeoff_slope_unnormalized(tangent.pt_ratio, gamma);
  return 2.0 * (detail::log2_1p_scaled(s_max) + std::ceil(grad)) *
         detail::smoothing_factor(eps_smooth, form, abort_threshold);
}

namespace detail {

struct EtaOpt {
  double eta;
  double pt_ratio;
};

// eta_opt = max over pt of [tangent value at the abort threshold - nu/sqrt(m)];
// deterministic 64-point coarse grid followed by golden-section refinement
inline EtaOpt maximize_eta(double p1_ratio, double gamma, double m, double eps_smooth,
                           EatNuForm form, double abort_threshold, double tol) {
  const double lo = kOmegaClassical + 1e-9;
  const double hi = kOmegaQuantumMax - 1e-9;
  const double sqrt_m = std::sqrt(m);

  auto objective = [&](double pt) {
    TradeoffTangent t{pt};
    return f_min_tangent(p1_ratio, t, gamma) -
           nu_tradeoff(t, gamma, eps_smooth, form, abort_threshold) / sqrt_m;
  };

  const int kCoarse = 64;
  double best_pt = lo, best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kCoarse; ++i) {
    double pt = lo + (hi - lo) * (i + 0.5) / kCoarse;
    double v = objective(pt);
    if (v > best) {
      best = v;
      best_pt = pt;
    }
  }

  double span = (hi - lo) / kCoarse;
  double a = std::max(lo, best_pt - span);
  double b = std::min(hi, best_pt + span);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c1 = b - invphi * (b - a);
  double d1 = a + invphi * (b - a);
  double fc = objective(c1), fd = objective(d1);
  while (b - a > tol) {
    if (fc > fd) {
      b = d1;
      d1 = c1;
      fd = fc;
      c1 = b - invphi * (b - a);
      fc = objective(c1);
    } else {
      a = c1;
      c1 = d1;
      fc = fd;
      d1 = a + invphi * (b - a);
      fd = objective(d1);
    }
  }
  double mid = 0.5 * (a + b);
  double fm = objective(mid);
  if (fm > best) {
    best = fm;
    best_pt = mid;
  }
  return EtaOpt{best, best_pt};
}

inline KeyLengthBreakdown assemble(AttackKind kind, const ProtocolParams& p,
                                   const SecurityBudget& b, double entropy, double leak,
                                   double sqrt_corr, double consts, double pt_ratio) {
  KeyLengthBreakdown out;
  out.entropy_term = entropy;
  out.ec_leakage = leak;
  out.sqrt_n_corrections = sqrt_corr;
  out.constant_penalties = consts;
  out.total_l = entropy - leak - sqrt_corr - consts;
  out.rate = out.total_l / p.n;
  out.feasible = out.total_l > 0.0;
  ComposedSecurity cs = compose_security(b, kind);
  out.soundness = cs.soundness;
  out.abort_threshold = cs.abort_threshold;
  out.chosen = ChosenParams{kind, p.n,     p.gamma,     p.omega_exp, p.q,
                            p.delta_est,   p.delta_con, pt_ratio,    b};
  return out;
}

}  // namespace detail

// Collective attacks via the asymptotic equipartition property. The
// entropy rate is the von Neumann bound at the attested winning probability
// omega_exp - delta_est - delta_con.
inline KeyLengthBreakdown key_length_collective_aep(const ProtocolParams& p,
                                                    const SecurityBudget& b) {
  p.validate();
  b.validate(AttackKind::kCollectiveAep);
  double w = p.omega_exp - p.delta_est - p.delta_con;
  double entropy = (w > kOmegaClassical)
                       ? p.n * von_neumann_bound_omega(std::min(w, kOmegaQuantumMax))
                       : 0.0;
  double leak = p.n * detail::ec_round_entropy(p);
  double es = b.eps_smooth, ep = b.eps_ec_prime;
  double sqrt_corr = std::sqrt(p.n) * detail::four_log_eta() *
                     (std::sqrt(std::log2(2.0 / (es * es))) + std::sqrt(std::log2(8.0 / (ep * ep))));
  double consts = std::log2(8.0 / (ep * ep) + 2.0 / (2.0 - ep)) + std::log2(1.0 / b.eps_ec) +
                  2.0 * std::log2(1.0 / (2.0 * b.eps_pa));
  return detail::assemble(AttackKind::kCollectiveAep, p, b, entropy, leak, sqrt_corr, consts, 0.0);
}

// Collective attacks via collision-entropy additivity: smaller entropy rate,
// but no smoothing term in the sqrt(n) correction.
inline KeyLengthBreakdown key_length_collective_h2(const ProtocolParams& p,
                                                   const SecurityBudget& b) {
  p.validate();
  b.validate(AttackKind::kCollectiveH2);
  double w = p.omega_exp - p.delta_est - p.delta_con;
  double entropy = (w > kOmegaClassical)
                       ? p.n * collision_bound_omega(std::min(w, kOmegaQuantumMax))
                       : 0.0;
  double leak = p.n * detail::ec_round_entropy(p);
  double ep = b.eps_ec_prime;
  double sqrt_corr =
      std::sqrt(p.n) * detail::four_log_eta() * std::sqrt(std::log2(8.0 / (ep * ep)));
  double consts = std::log2(8.0 / (ep * ep) + 2.0 / (2.0 - ep)) + std::log2(1.0 / b.eps_ec) +
                  2.0 * std::log2(1.0 / (2.0 * b.eps_pa)) +
                  2.0 * std::log2(1.0 / (b.eps_con + b.eps_ec));
  return detail::assemble(AttackKind::kCollectiveH2, p, b, entropy, leak, sqrt_corr, consts, 0.0);
}

// Coherent attacks via entropy accumulation. The worst frequency consistent
// with not aborting fixes the tangent evaluation point
// p(1) = (omega_exp - delta_est)(1 - (1-gamma)^s_max); the tangency point is
// maximized unless an explicit tangent override is supplied.
inline KeyLengthBreakdown key_length_coherent(const ProtocolParams& p, const SecurityBudget& b,
                                              std::optional<TradeoffTangent> tangent = std::nullopt,
                                              EatNuForm form = EatNuForm::kBare,
                                              double tangent_tol = 1e-10) {
  p.validate();
  b.validate(AttackKind::kCoherent);
  BlockStructure bs = block_structure(p.gamma, p.n);
  double abort_thr = b.eps_ea + b.eps_ec;
  double p1_ratio = p.omega_exp - p.delta_est;

  auto leak = detail::coherent_leakage_parts(p, b);

  double x = b.eps_smooth / (4.0 * abort_thr);
  double chain_penalty = -3.0 * std::log2(1.0 - std::sqrt(std::max(0.0, 1.0 - x * x)));

  double entropy = 0.0;
  double sqrt_corr = leak.sqrt_corr;
  double pt_used = 0.0;
  if (p1_ratio > kOmegaClassical && p1_ratio <= kOmegaQuantumMax + 1e-12) {
    p1_ratio = std::min(p1_ratio, kOmegaQuantumMax);
    detail::EtaOpt eo{};
    if (tangent) {
      tangent->validate();
      eo.pt_ratio = tangent->pt_ratio;
      eo.eta = f_min_tangent(p1_ratio, *tangent, p.gamma) -
               nu_tradeoff(*tangent, p.gamma, b.eps_smooth, form, abort_thr) / std::sqrt(bs.m);
    } else {
      eo = detail::maximize_eta(p1_ratio, p.gamma, bs.m, b.eps_smooth, form, abort_thr,
                                tangent_tol);
    }
    pt_used = eo.pt_ratio;
    entropy = bs.m * eo.eta - bs.m * binary_entropy(p.omega_exp - p.delta_est);
    sqrt_corr += std::sqrt(bs.m) * nu_one(p.omega_exp, p.delta_est, p.gamma, b.eps_smooth, form,
                                          abort_thr);
  }
  double consts = leak.consts + chain_penalty + 2.0 * std::log2(1.0 / (2.0 * b.eps_pa));

  KeyLengthBreakdown out = detail::assemble(AttackKind::kCoherent, p, b, entropy, leak.lead,
                                            sqrt_corr, consts, pt_used);
  if (!(p1_ratio > kOmegaClassical)) out.feasible = false;
  return out;
}

// honest abort probability: EC completeness + estimation tail,
// eps'_EC + 2 eps_EC + exp(-2 gamma n delta_est^2); may exceed 1
inline double completeness_bound(const ProtocolParams& p, const SecurityBudget& b) {
  p.validate();
  return b.eps_ec_prime + 2.0 * b.eps_ec + hoeffding_tail(p.gamma, p.n, p.delta_est);
}

// gamma -> 0, delta -> 0, n -> infinity limit of the key rate
inline double asymptotic_rate(double beta, double q, AttackKind kind) {
  ChshViolation v(beta);
  double bound = (kind == AttackKind::kCollectiveH2) ? collision_bound(v) : von_neumann_bound(v);
  return bound - binary_entropy(q);
}

}  // namespace diqkd
