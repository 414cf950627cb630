#pragma once

// Deterministic optimization of the free protocol parameters, minimum-round
// solving, and (Q, beta) region scanning.
//
// The search is a fixed nested grid — no randomness, no adaptive step sizes —
// so identical inputs give bit-identical outputs. Free parameters:
//   gamma          log grid
//   delta_est      Hoeffding width for half the completeness budget, times a
//                  small multiplier grid; the completeness constraint is
//                  re-checked against the actual width
//   delta_con      Hoeffding width for eps_con, with eps_con swept on a log
//                  grid (collective only; the implied eps_con is reported)
//   eps_t          log grid around (eps'_EC/4)^2 (coherent only)
//   tangent point  handled inside key_length_coherent
// The epsilon split policy "equal" gives each soundness component a quarter
// of the soundness target and half the completeness budget to the Hoeffding
// term, the rest to eps'_EC.

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "diqkd/finite_rates.hpp"

namespace diqkd {

struct SearchTargets {
  double soundness = 1e-5;
  double completeness = 1e-2;

  void validate() const {
    if (!(soundness > 0.0 && soundness < 1.0))
      detail::domain_fail("SearchTargets: soundness must lie in (0,1)", soundness);
    if (!(completeness > 0.0 && completeness < 1.0))
      detail::domain_fail("SearchTargets: completeness must lie in (0,1)", completeness);
  }
};

struct OptimizerConfig {
  int gamma_points = 24;
  double gamma_min = 1e-4;
  double gamma_max = 0.5;
  std::array<double, 3> delta_multipliers{0.5, 1.0, 2.0};
  int eps_grid_points = 5;      // log-spaced points per refinable epsilon
  double refine_tolerance = 1e-10;  // tangent golden-section width
  double log10_n_min = 4.0;     // bracket lower bound for min_rounds
  double log10_n_max = 20.0;    // "infeasible-at-bound" beyond this
  double bisect_rel_width = 0.10;
  std::string eps_policy = "equal";
  EatNuForm nu_form = EatNuForm::kBare;

  // fixed overrides: when set, the corresponding grid collapses to the value
  std::optional<double> fixed_gamma;
  std::optional<double> fixed_delta_est;
  std::optional<double> fixed_delta_con;
  std::optional<double> fixed_pt_ratio;
  std::optional<double> fixed_eps_smooth;
  std::optional<double> fixed_eps_ec;
  std::optional<double> fixed_eps_ec_prime;
  std::optional<double> fixed_eps_pa;
  std::optional<double> fixed_eps_ea;
  std::optional<double> fixed_eps_con;
  std::optional<double> fixed_eps_t;

  void validate() const {
    if (gamma_points < 3) detail::domain_fail("OptimizerConfig: gamma_points >= 3", gamma_points);
    if (eps_grid_points < 1)
      detail::domain_fail("OptimizerConfig: eps_grid_points >= 1", eps_grid_points);
    if (!(refine_tolerance > 0.0))
      detail::domain_fail("OptimizerConfig: refine_tolerance > 0", refine_tolerance);
    if (eps_policy != "equal")
      throw std::domain_error("OptimizerConfig: unknown eps policy '" + eps_policy + "'");
  }
};

namespace detail {

inline std::vector<double> log_grid(double lo, double hi, int points) {
  std::vector<double> out;
  out.reserve(points);
  if (points == 1) {
    out.push_back(lo);
    return out;
  }
  double llo = std::log10(lo), lhi = std::log10(hi);
  for (int i = 0; i < points; ++i)
    out.push_back(std::pow(10.0, llo + (lhi - llo) * i / (points - 1)));
  return out;
}

inline KeyLengthBreakdown evaluate(AttackKind kind, const ProtocolParams& p,
                                   const SecurityBudget& b, const OptimizerConfig& cfg) {
  switch (kind) {
    case AttackKind::kCoherent: {
      std::optional<TradeoffTangent> t;
      if (cfg.fixed_pt_ratio) t = TradeoffTangent{*cfg.fixed_pt_ratio};
      return key_length_coherent(p, b, t, cfg.nu_form, cfg.refine_tolerance);
    }
    case AttackKind::kCollectiveAep:
      return key_length_collective_aep(p, b);
    case AttackKind::kCollectiveH2:
      return key_length_collective_h2(p, b);
  }
  throw std::logic_error("evaluate: bad attack kind");
}

}  // namespace detail

// Best key-length breakdown over the deterministic parameter grid, subject
// to compose_security <= soundness target and completeness_bound <=
// completeness target. With no feasible point, returns the least-negative
// breakdown found with feasible = false.
inline KeyLengthBreakdown optimize_rate(AttackKind kind, double beta, double q, double n,
                                        const SearchTargets& targets = {},
                                        const OptimizerConfig& cfg = {}) {
  targets.validate();
  cfg.validate();
  ChshViolation violation(beta);
  double omega_exp = violation.to_omega().value();

  SecurityBudget base;
  base.eps_smooth = cfg.fixed_eps_smooth.value_or(targets.soundness / 4.0);
  base.eps_ec = cfg.fixed_eps_ec.value_or(targets.soundness / 4.0);
  base.eps_pa = cfg.fixed_eps_pa.value_or(targets.soundness / 4.0);
  base.eps_ea = cfg.fixed_eps_ea.value_or(targets.soundness / 4.0);
  double est_budget = targets.completeness / 2.0;
  base.eps_ec_prime =
      cfg.fixed_eps_ec_prime.value_or(targets.completeness / 2.0 - 2.0 * base.eps_ec);
  if (!(base.eps_ec_prime > 0.0))
    throw InfeasibleBudgetError("optimize_rate: completeness budget too small for eps'_EC");

  std::vector<double> gammas = cfg.fixed_gamma
                                   ? std::vector<double>{*cfg.fixed_gamma}
                                   : detail::log_grid(cfg.gamma_min, cfg.gamma_max,
                                                      cfg.gamma_points);

  const double eps_con_base = targets.soundness / 4.0;
  std::vector<double> eps_cons;
  if (kind == AttackKind::kCoherent) {
    eps_cons = {0.0};  // unused
  } else if (cfg.fixed_eps_con || cfg.fixed_delta_con) {
    eps_cons = {cfg.fixed_eps_con.value_or(eps_con_base)};
  } else {
    for (int k = 0; k < cfg.eps_grid_points; ++k)
      eps_cons.push_back(std::min(0.1, eps_con_base * std::pow(10.0, k)));
  }

  std::vector<double> eps_ts;
  if (kind != AttackKind::kCoherent) {
    eps_ts = {0.0};  // unused
  } else if (cfg.fixed_eps_t) {
    eps_ts = {*cfg.fixed_eps_t};
  } else {
    double center = std::pow(base.eps_ec_prime / 4.0, 2);
    for (int k = 0; k < cfg.eps_grid_points; ++k) {
      double e = center * std::pow(10.0, k - cfg.eps_grid_points / 2);
      if (base.eps_ec_prime > 2.0 * std::sqrt(e)) eps_ts.push_back(e);
    }
    if (eps_ts.empty()) eps_ts.push_back(center);
  }

  bool have_best = false;
  KeyLengthBreakdown best;
  auto consider = [&](const KeyLengthBreakdown& cand) {
    if (!have_best || cand.total_l > best.total_l) {
      best = cand;
      have_best = true;
    }
  };

  for (double gamma : gammas) {
    if (gamma * n < 1.0) continue;
    std::vector<double> est_widths;
    if (cfg.fixed_delta_est) {
      est_widths = {*cfg.fixed_delta_est};
    } else {
      double base = hoeffding_width(gamma, n, est_budget);
      for (double mult : cfg.delta_multipliers) est_widths.push_back(base * mult);
    }
    for (double delta_est : est_widths) {
      if (!(omega_exp - delta_est > 0.0)) continue;
      for (double eps_con : eps_cons) {
        for (double eps_t : eps_ts) {
          ProtocolParams p;
          p.n = n;
          p.gamma = gamma;
          p.omega_exp = omega_exp;
          p.q = q;
          p.delta_est = delta_est;
          SecurityBudget b = base;
          if (kind == AttackKind::kCoherent) {
            b.eps_t = eps_t;
          } else {
            p.delta_con = cfg.fixed_delta_con.value_or(hoeffding_width(gamma, n, eps_con));
            // report the eps_con implied by the width actually used
            b.eps_con = hoeffding_tail(gamma, n, p.delta_con);
          }
          // tolerance keeps the exact-budget point (delta multiplier 1) from
          // being dropped to rounding, and lets 12-digit echoed parameters
          // replay cleanly
          if (completeness_bound(p, b) > targets.completeness * (1.0 + 1e-9)) continue;
          if (compose_security(b, kind).soundness > targets.soundness * (1.0 + 1e-9)) continue;
          consider(detail::evaluate(kind, p, b, cfg));
        }
      }
    }
  }

  if (!have_best)
    throw InfeasibleBudgetError(
        "optimize_rate: no parameter combination satisfied the targets (n too small for the "
        "completeness budget)");
  return best;
}

enum class MinRoundsStatus { kFeasible, kInfeasible, kInfeasibleAtBound };

struct BracketStep {
  double n;
  double total_l;
  bool feasible;
};

struct MinRoundsResult {
  MinRoundsStatus status = MinRoundsStatus::kInfeasible;
  double n = 0.0;  // smallest round count found feasible (when feasible)
  double asymptotic_rate = 0.0;
  std::vector<BracketStep> history;
};

inline const char* min_rounds_status_name(MinRoundsStatus s) {
  switch (s) {
    case MinRoundsStatus::kFeasible: return "feasible";
    case MinRoundsStatus::kInfeasible: return "infeasible";
    case MinRoundsStatus::kInfeasibleAtBound: return "infeasible-at-bound";
  }
  return "?";
}

// Smallest n with a positive optimized key length: exponential bracketing on
// log10 n, then bisection on feasibility to the configured relative width.
// Feasibility must be monotone across the bracket; a violation at the
// endpoints is reported as an internal inconsistency.
inline MinRoundsResult min_rounds(AttackKind kind, double beta, double q,
                                  const SearchTargets& targets = {},
                                  const OptimizerConfig& cfg = {}) {
  MinRoundsResult out;
  out.asymptotic_rate =
      asymptotic_rate(beta, q, kind == AttackKind::kCollectiveH2 ? AttackKind::kCollectiveH2
                                                                 : AttackKind::kCollectiveAep);
  if (out.asymptotic_rate <= 0.0) {
    out.status = MinRoundsStatus::kInfeasible;
    return out;
  }

  auto probe = [&](double n) {
    double l;
    try {
      l = optimize_rate(kind, beta, q, n, targets, cfg).total_l;
    } catch (const InfeasibleBudgetError&) {
      l = -std::numeric_limits<double>::infinity();
    }
    out.history.push_back(BracketStep{n, l, l > 0.0});
    return l > 0.0;
  };

  double lo = 0.0, hi = 0.0;
  for (double lg = cfg.log10_n_min; lg <= cfg.log10_n_max + 1e-9; lg += 1.0) {
    double n = std::pow(10.0, lg);
    if (probe(n)) {
      hi = n;
      break;
    }
    lo = n;
  }
  if (hi == 0.0) {
    out.status = MinRoundsStatus::kInfeasibleAtBound;
    return out;
  }
  if (lo == 0.0) {
    // feasible at the very first probe: the crossing sits below the scan
    // floor, which is the finest answer the bracket can give
    out.status = MinRoundsStatus::kFeasible;
    out.n = hi;
    return out;
  }

  // bracket invariant: lo infeasible, hi feasible
  while (hi / lo > 1.0 + cfg.bisect_rel_width) {
    double mid = std::sqrt(lo * hi);
    if (probe(mid))
      hi = mid;
    else
      lo = mid;
  }
  // endpoint verification against the probe record
  bool lo_ok = false, hi_ok = false;
  for (const auto& step : out.history) {
    if (step.n == lo) lo_ok = !step.feasible;
    if (step.n == hi) hi_ok = step.feasible;
  }
  if (!lo_ok || !hi_ok)
    throw std::logic_error("min_rounds: feasibility not monotone across the bracket");

  out.status = MinRoundsStatus::kFeasible;
  out.n = hi;
  return out;
}

struct RegionCell {
  double q;
  double beta;
  double asymptotic_rate;
  MinRoundsStatus status;
  double min_rounds;  // meaningful when status == kFeasible
  std::vector<bool> feasible_at;
};

// Row-major (q outer, beta inner) scan of the feasibility region. Cells are
// independent; with n_threads > 1 they are evaluated in parallel and written
// by index, so the output order never depends on scheduling.
inline std::vector<RegionCell> region_scan(double beta_min, double beta_max, double q_min,
                                           double q_max, int beta_count, int q_count,
                                           AttackKind kind, const std::vector<double>& thresholds,
                                           const SearchTargets& targets = {},
                                           const OptimizerConfig& cfg = {}, int n_threads = 1) {
  if (beta_count < 2 || q_count < 2)
    throw std::domain_error("region_scan: grid must be at least 2x2");
  // validate the whole window up front so out-of-domain cells cannot throw
  // from inside a worker thread
  if (!(beta_min <= beta_max) || beta_min < 0.0 || beta_max > kBetaQuantumMax + 1e-12)
    throw std::domain_error("region_scan: beta range must lie inside [0, 2*sqrt(2)]");
  if (!(q_min <= q_max) || q_min < 0.0 || q_max > 0.5)
    throw std::domain_error("region_scan: qber range must lie inside [0, 1/2]");
  std::vector<RegionCell> cells(static_cast<size_t>(beta_count) * q_count);

  auto work = [&](size_t idx) {
    int qi = static_cast<int>(idx) / beta_count;
    int bi = static_cast<int>(idx) % beta_count;
    double q = q_min + (q_max - q_min) * qi / (q_count - 1);
    double beta = beta_min + (beta_max - beta_min) * bi / (beta_count - 1);
    RegionCell cell;
    cell.q = q;
    cell.beta = beta;
    cell.asymptotic_rate =
        asymptotic_rate(beta, q, kind == AttackKind::kCollectiveH2 ? AttackKind::kCollectiveH2
                                                                   : AttackKind::kCollectiveAep);
    if (cell.asymptotic_rate <= 0.0) {
      cell.status = MinRoundsStatus::kInfeasible;
      cell.min_rounds = 0.0;
    } else {
      MinRoundsResult mr = min_rounds(kind, beta, q, targets, cfg);
      cell.status = mr.status;
      cell.min_rounds = mr.n;
    }
    for (double thr : thresholds)
      cell.feasible_at.push_back(cell.status == MinRoundsStatus::kFeasible &&
                                 cell.min_rounds <= thr);
    cells[idx] = std::move(cell);
  };

  if (n_threads <= 1) {
    for (size_t i = 0; i < cells.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < cells.size() && !failed; i = next.fetch_add(1)) {
          try {
            work(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!failed.exchange(true)) error = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    if (failed) std::rethrow_exception(error);
  }
  return cells;
}

// Q at which the asymptotic depolarizing rate crosses zero along
// beta = 2 sqrt(2) (1 - 2Q), for the chosen entropy bound.
inline double depolarizing_qber_threshold(AttackKind kind) {
  double lo = 1e-6, hi = 0.25;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    double beta = 2.0 * kSqrt2 * (1.0 - 2.0 * mid);
    if (asymptotic_rate(beta, mid, kind) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace diqkd
