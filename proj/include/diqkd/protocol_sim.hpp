#pragma once

// Monte-Carlo simulation of the two protocol variants under an honest IID
// depolarizing implementation.
//
// Variant 1 runs a fixed number of blocks, each block ending at its first
// test round or after ceil(1/gamma) rounds; variant 2 runs a fixed number of
// rounds, each independently a test round with probability gamma. Outcomes
// are sampled from the exact two-qubit Born probabilities; sampling is the
// only stochastic element. All randomness comes from a seeded xoshiro256++
// generator with per-trial streams derived via splitmix64, so a report is
// reproducible from (seed, config) alone.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "diqkd/chsh_math.hpp"
#include "diqkd/finite_rates.hpp"

namespace diqkd {

inline constexpr const char* kRngId = "xoshiro256++/splitmix64";

namespace rng {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// per-trial stream seed: one splitmix64 step of master + (trial+1)*golden
inline uint64_t trial_seed(uint64_t master, uint64_t trial) {
  uint64_t s = master + (trial + 1) * 0x9E3779B97F4A7C15ULL;
  return splitmix64(s);
}

class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64(sm);
  }

  uint64_t next() {
    auto rotl = [](uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform double in [0,1) with 53 random bits
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::array<uint64_t, 4> state_{};
};

}  // namespace rng

struct BlochVector {
  double x, y, z;

  void validate() const {
    double norm = std::sqrt(x * x + y * y + z * z);
    if (std::abs(norm - 1.0) > 1e-9)
      detail::domain_fail("BlochVector: must be unit norm", norm);
  }
};

// Measurement directions for Alice (x in {0,1}) and Bob (y in {0,1,2}) plus
// the depolarizing parameter. The default realizes the CHSH-optimal strategy
// Alice {Z, X}, Bob {(Z+X)/sqrt2, (Z-X)/sqrt2, Z}, for which the induced
// violation is 2 sqrt(2) (1-nu) and the key-round error rate is nu/2.
struct DeviceModel {
  std::array<BlochVector, 2> alice;
  std::array<BlochVector, 3> bob;
  double nu = 0.0;

  static DeviceModel chsh_optimal(double nu) {
    if (!(nu >= 0.0 && nu <= 1.0)) detail::domain_fail("DeviceModel: nu must lie in [0,1]", nu);
    const double s = 1.0 / kSqrt2;
    DeviceModel m;
    m.alice = {BlochVector{0, 0, 1}, BlochVector{1, 0, 0}};
    m.bob = {BlochVector{s, 0, s}, BlochVector{-s, 0, s}, BlochVector{0, 0, 1}};
    m.nu = nu;
    return m;
  }

  void validate() const {
    for (const auto& v : alice) v.validate();
    for (const auto& v : bob) v.validate();
    if (!(nu >= 0.0 && nu <= 1.0)) detail::domain_fail("DeviceModel: nu must lie in [0,1]", nu);
  }
};

// joint outcome distribution over (a,b) in {0,1}^2, eigenvalue +1 -> bit 0.
// For the depolarized singlet the marginals are uniform and the correlator
// is (1-nu)(ax bx - ay by + az bz), so p(ab) = (1 + (-1)^(a+b) E)/4.
inline std::array<double, 4> outcome_distribution(const DeviceModel& model, int x, int y) {
  model.validate();
  if (x < 0 || x > 1) detail::domain_fail("outcome_distribution: x must be 0 or 1", x);
  if (y < 0 || y > 2) detail::domain_fail("outcome_distribution: y must be 0, 1 or 2", y);
  const BlochVector& a = model.alice[static_cast<size_t>(x)];
  const BlochVector& b = model.bob[static_cast<size_t>(y)];
  double corr = (1.0 - model.nu) * (a.x * b.x - a.y * b.y + a.z * b.z);
  double same = (1.0 + corr) / 4.0;  // p(00) = p(11)
  double diff = (1.0 - corr) / 4.0;  // p(01) = p(10)
  return {same, diff, diff, same};
}

struct SimConfig {
  int protocol_variant = 2;  // 1 = blocks, 2 = fixed rounds
  double gamma = 0.0;
  uint64_t n_rounds = 0;  // variant 2
  uint64_t m_blocks = 0;  // variant 1
  uint64_t seed = 0;      // mandatory; no environment entropy is consulted
  uint64_t trials = 1;

  void validate() const {
    if (protocol_variant != 1 && protocol_variant != 2)
      detail::domain_fail("SimConfig: protocol_variant must be 1 or 2", protocol_variant);
    if (!(gamma > 0.0 && gamma <= 1.0))
      detail::domain_fail("SimConfig: gamma must lie in (0,1]", gamma);
    if (protocol_variant == 2 && n_rounds == 0)
      detail::domain_fail("SimConfig: variant 2 needs n_rounds", 0);
    if (protocol_variant == 1 && m_blocks == 0)
      detail::domain_fail("SimConfig: variant 1 needs m_blocks", 0);
  }
};

struct AbortRule {
  double omega_exp;
  double delta_est;
};

struct SimReport {
  uint64_t rounds_executed = 0;
  uint64_t test_rounds = 0;
  uint64_t wins = 0;
  uint64_t losses = 0;
  uint64_t bot_count = 0;  // key rounds (variant 2) or test-free blocks (variant 1)
  uint64_t key_rounds = 0;
  uint64_t key_errors = 0;
  double empirical_omega = 0.0;
  double empirical_qber = 0.0;
  double abort_threshold = 0.0;
  bool aborted = false;
  std::string rng_id = kRngId;
  uint64_t seed = 0;
};

namespace detail {

struct RoundOutcome {
  bool test;
  bool win;    // test rounds
  bool error;  // key rounds
};

inline RoundOutcome simulate_round(const DeviceModel& model, double gamma, rng::Xoshiro256pp& g) {
  RoundOutcome r{};
  r.test = g.bernoulli(gamma);
  int x, y;
  if (r.test) {
    uint64_t bits = g.next();
    x = static_cast<int>(bits & 1);
    y = static_cast<int>((bits >> 1) & 1);
  } else {
    x = 0;
    y = 2;
  }
  auto p = outcome_distribution(model, x, y);
  double u = g.uniform();
  int ab = 0;
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) {
    acc += p[static_cast<size_t>(k)];
    if (u < acc) {
      ab = k;
      break;
    }
  }
  int a = ab >> 1, b = ab & 1;
  if (r.test)
    r.win = ((a ^ b) == (x & y));
  else
    r.error = (a != b);
  return r;
}

}  // namespace detail

// one protocol execution on a dedicated stream; identical (config, trial)
// gives an identical report
inline SimReport run_protocol_trial(const SimConfig& config, const DeviceModel& model,
                                    const AbortRule& rule, uint64_t trial) {
  config.validate();
  model.validate();
  rng::Xoshiro256pp gen(rng::trial_seed(config.seed, trial));
  SimReport rep;
  rep.seed = config.seed;

  if (config.protocol_variant == 2) {
    for (uint64_t i = 0; i < config.n_rounds; ++i) {
      auto r = detail::simulate_round(model, config.gamma, gen);
      ++rep.rounds_executed;
      if (r.test) {
        ++rep.test_rounds;
        r.win ? ++rep.wins : ++rep.losses;
      } else {
        ++rep.key_rounds;
        ++rep.bot_count;
        if (r.error) ++rep.key_errors;
      }
    }
    rep.abort_threshold = config.gamma * static_cast<double>(config.n_rounds) *
                          (rule.omega_exp - rule.delta_est);
  } else {
    long long s_max = block_structure(config.gamma, 1.0).s_max;
    for (uint64_t j = 0; j < config.m_blocks; ++j) {
      bool block_tested = false;
      for (long long i = 1; i <= s_max; ++i) {
        auto r = detail::simulate_round(model, config.gamma, gen);
        ++rep.rounds_executed;
        if (r.test) {
          // a test round always ends the block, so at most one per block
          if (block_tested)
            throw std::logic_error("run_protocol: second test round inside a block");
          block_tested = true;
          ++rep.test_rounds;
          r.win ? ++rep.wins : ++rep.losses;
          break;
        }
        ++rep.key_rounds;
        if (r.error) ++rep.key_errors;
      }
      if (!block_tested) ++rep.bot_count;
    }
    rep.abort_threshold = static_cast<double>(config.m_blocks) *
                          (rule.omega_exp - rule.delta_est) *
                          block_test_probability(config.gamma);
  }

  rep.empirical_omega =
      rep.test_rounds ? static_cast<double>(rep.wins) / static_cast<double>(rep.test_rounds) : 0.0;
  rep.empirical_qber =
      rep.key_rounds ? static_cast<double>(rep.key_errors) / static_cast<double>(rep.key_rounds)
                     : 0.0;
  rep.aborted = static_cast<double>(rep.wins) < rep.abort_threshold;
  return rep;
}

inline SimReport run_protocol(const SimConfig& config, const DeviceModel& model,
                              const AbortRule& rule) {
  return run_protocol_trial(config, model, rule, 0);
}

struct CompletenessEstimate {
  uint64_t trials = 0;
  uint64_t aborts = 0;
  double abort_frequency = 0.0;
  double binomial_sigma = 0.0;  // sqrt(f(1-f)/trials)
  std::vector<SimReport> trial_reports;  // aggregated in trial-index order
};

// honest abort frequency over independent seeded trials
inline CompletenessEstimate empirical_completeness(const SimConfig& config,
                                                   const DeviceModel& model, const AbortRule& rule,
                                                   uint64_t trials, bool keep_reports = false) {
  if (trials < 100) detail::domain_fail("empirical_completeness: trials >= 100", trials);
  CompletenessEstimate est;
  est.trials = trials;
  for (uint64_t t = 0; t < trials; ++t) {
    SimReport rep = run_protocol_trial(config, model, rule, t);
    if (rep.aborted) ++est.aborts;
    if (keep_reports) est.trial_reports.push_back(rep);
  }
  est.abort_frequency = static_cast<double>(est.aborts) / static_cast<double>(trials);
  est.binomial_sigma =
      std::sqrt(est.abort_frequency * (1.0 - est.abort_frequency) / static_cast<double>(trials));
  return est;
}

}  // namespace diqkd
