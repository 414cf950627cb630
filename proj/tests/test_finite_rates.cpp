#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "diqkd/finite_rates.hpp"

using namespace diqkd;
using Catch::Approx;

namespace {

SecurityBudget collective_budget() {
  SecurityBudget b;
  b.eps_smooth = 2.5e-6;
  b.eps_ec = 2.5e-6;
  b.eps_pa = 2.5e-6;
  b.eps_con = 2.5e-6;
  b.eps_ec_prime = 5e-3;
  return b;
}

SecurityBudget coherent_budget() {
  SecurityBudget b;
  b.eps_smooth = 2.5e-6;
  b.eps_ec = 2.5e-6;
  b.eps_pa = 2.5e-6;
  b.eps_ea = 2.5e-6;
  b.eps_ec_prime = 5e-3;
  b.eps_t = std::pow(5e-3 / 4.0, 2);
  return b;
}

ProtocolParams nv_params(double n, double gamma) {
  ProtocolParams p;
  p.n = n;
  p.gamma = gamma;
  p.omega_exp = (4.0 + 2.47) / 8.0;
  p.q = 0.051;
  p.delta_est = hoeffding_width(gamma, n, 5e-3);
  p.delta_con = hoeffding_width(gamma, n, 2.5e-6);
  return p;
}

}  // namespace

TEST_CASE("block structure") {
  BlockStructure b1 = block_structure(1.0, 1e6);
  CHECK(b1.s_max == 1);
  CHECK(b1.s_bar == 1.0);
  CHECK(b1.m == 1e6);

  BlockStructure b5 = block_structure(0.5, 1e6);
  CHECK(b5.s_max == 2);
  CHECK(b5.s_bar == Approx(1.5).epsilon(1e-15));

  BlockStructure b01 = block_structure(0.01, 1e6);
  CHECK(b01.s_max == 100);
  CHECK(b01.s_bar == Approx(63.39676587267705).epsilon(1e-12));
  CHECK(b01.s_bar >= 1.0);
  CHECK(b01.s_bar <= 100.0);
  CHECK(b01.m == Approx(1e6 / 63.39676587267705).epsilon(1e-12));
}

TEST_CASE("collective EC leakage term by term") {
  ProtocolParams p;
  p.n = 1e7;
  p.gamma = 0.05;
  p.omega_exp = (4.0 + 2.47) / 8.0;
  p.q = 0.05;
  p.delta_est = 1e-3;
  SecurityBudget b = collective_budget();
  b.eps_ec = 1e-6;
  b.eps_ec_prime = 1e-6;
  // components re-evaluated with an arbitrary-precision calculator
  CHECK(ec_leakage_collective(p, b) == Approx(3233262.9138303087).epsilon(1e-12));

  SECTION("doubling n doubles the leading term only") {
    const double lead = 3072810.6184132406;
    const double sq = 160389.50071136013;
    const double cst = 62.7947057079727;
    ProtocolParams p2 = p;
    p2.n = 2e7;
    CHECK(ec_leakage_collective(p2, b) ==
          Approx(2.0 * lead + std::sqrt(2.0) * sq + cst).epsilon(1e-12));
  }

  SECTION("zero QBER leaves only test-round and finite-size leakage") {
    ProtocolParams pz = p;
    pz.q = 0.0;
    double expected_lead = pz.n * pz.gamma * binary_entropy(pz.omega_exp);
    double sq = std::sqrt(pz.n) * 4.0 * std::log2(2.0 * kSqrt2 + 1.0) *
                std::sqrt(std::log2(8.0 / (b.eps_ec_prime * b.eps_ec_prime)));
    double cst = std::log2(8.0 / (b.eps_ec_prime * b.eps_ec_prime) +
                           2.0 / (2.0 - b.eps_ec_prime)) +
                 std::log2(1.0 / b.eps_ec);
    CHECK(ec_leakage_collective(pz, b) == Approx(expected_lead + sq + cst).epsilon(1e-12));
  }
}

TEST_CASE("coherent EC leakage term by term") {
  ProtocolParams p;
  p.n = 1e9;
  p.gamma = 0.05;
  p.omega_exp = (4.0 + 2.47) / 8.0;
  p.q = 0.051;
  p.delta_est = 1e-3;
  SecurityBudget b;
  b.eps_smooth = 2.5e-6;
  b.eps_ec = 1e-7;
  b.eps_ec_prime = 1e-3;
  b.eps_pa = 2.5e-6;
  b.eps_ea = 2.5e-6;
  b.eps_t = 1e-9;
  CHECK(ec_leakage_coherent(p, b) == Approx(313136717.992868).epsilon(1e-10));

  SECTION("leakage grows with the round-count tail") {
    SecurityBudget tighter = b;
    tighter.eps_t = 1e-12;
    CHECK(ec_leakage_coherent(p, tighter) > ec_leakage_coherent(p, b));
  }

  SECTION("gamma = 1 removes the round-count tail") {
    ProtocolParams pg = p;
    pg.gamma = 1.0;
    double lead = pg.n * binary_entropy(pg.omega_exp);
    double floor = b.eps_ec_prime - 2.0 * std::sqrt(b.eps_t);
    double nu_ec =
        4.0 * std::log2(2.0 * kSqrt2 + 1.0) * std::sqrt(2.0 * std::log2(8.0 / (floor * floor)));
    double cst = std::log2(8.0 / (b.eps_ec_prime * b.eps_ec_prime) +
                           2.0 / (2.0 - b.eps_ec_prime)) +
                 std::log2(1.0 / b.eps_ec);
    CHECK(ec_leakage_coherent(pg, b) ==
          Approx(lead + std::sqrt(pg.n) * nu_ec + cst).epsilon(1e-12));
  }

  SECTION("budget violating eps'_EC > 2 sqrt(eps_t) is rejected") {
    SecurityBudget bad = b;
    bad.eps_t = 1e-3;
    CHECK_THROWS_AS(ec_leakage_coherent(p, bad), InfeasibleBudgetError);
  }
}

TEST_CASE("tradeoff function g") {
  CHECK(g_tradeoff(0.75, 0.05) == 0.0);
  BlockStructure bs = block_structure(0.05, 1.0);
  CHECK(g_tradeoff(kOmegaQuantumMax, 0.05) == Approx(bs.s_bar).margin(1e-9));
  CHECK(g_tradeoff(0.8, 0.05) == Approx(4.440719999833323).epsilon(1e-12));
  // omega form of the entropy bound under the game-probability conversion
  CHECK(g_tradeoff(0.8, 0.05) ==
        Approx(bs.s_bar * von_neumann_bound(ChshViolation(2.4))).epsilon(1e-12));
  CHECK_THROWS_AS(g_tradeoff(0.7, 0.05), std::domain_error);
}

TEST_CASE("tangent lower-bounds g and touches at the tangency point") {
  for (int g_i = 0; g_i < 4; ++g_i) {
    double gamma = std::pow(10.0, -3.0 + g_i);
    if (gamma > 0.5) gamma = 0.5;
    for (int t_i = 1; t_i <= 20; ++t_i) {
      TradeoffTangent t{0.75 + (kOmegaQuantumMax - 0.75) * t_i / 21.5};
      CHECK(f_min_tangent(t.pt_ratio, t, gamma) ==
            Approx(g_tradeoff(t.pt_ratio, gamma)).margin(1e-9));
      for (int p_i = 0; p_i <= 200; ++p_i) {
        double r = 0.75 + (kOmegaQuantumMax - 0.75) * p_i / 200.0;
        REQUIRE(f_min_tangent(r, t, gamma) <= g_tradeoff(r, gamma) + 1e-9);
      }
    }
  }
}

TEST_CASE("tangent slope agrees with finite differences of g") {
  const double gamma = 0.05;
  const TradeoffTangent t{0.82};
  const double h = 1e-7;
  double slope_fd = (g_tradeoff(0.82 + h, gamma) - g_tradeoff(0.82 - h, gamma)) / (2.0 * h);
  double expected = g_tradeoff(0.82, gamma) + slope_fd * (0.84 - 0.82);
  CHECK(f_min_tangent(0.84, t, gamma) == Approx(expected).epsilon(1e-6));
}

TEST_CASE("g is convex") {
  const double gamma = 0.05;
  const double h = 1e-4;
  for (int i = 1; i < 400; ++i) {
    double r = 0.7501 + (kOmegaQuantumMax - 0.7502 - 2 * h) * i / 400.0;
    double second =
        g_tradeoff(r + h, gamma) - 2.0 * g_tradeoff(r, gamma) + g_tradeoff(r - h, gamma);
    REQUIRE(second >= -1e-9);
  }
}

TEST_CASE("nu_one reference value and structure") {
  CHECK(nu_one(0.85, 0.005, 0.05, 1e-6) == Approx(87.03105391395967).epsilon(1e-12));
  // degenerate smoothing keeps only the gradient factor
  double base = nu_one(0.85, 0.005, 0.05, 1.0 - 1e-15);
  CHECK(base == Approx(2.0 * (std::log2(7.0) + 4.0)).epsilon(1e-7));
  // coarser blocks (larger gamma) cannot increase the ceiled gradient
  CHECK(nu_one(0.85, 0.005, 0.5, 1e-6) <= nu_one(0.85, 0.005, 0.05, 1e-6));
  CHECK_THROWS_AS(nu_one(0.999, 0.002, 0.05, 1e-6), std::domain_error);
}

TEST_CASE("nu_tradeoff leading term") {
  const double eps_s = 1e-6;
  double smooth = std::sqrt(1.0 - 2.0 * std::log2(eps_s));
  TradeoffTangent t{0.8};

  double lead1 = nu_tradeoff(t, 1.0, eps_s) / (2.0 * smooth) -
                 std::ceil(detail::g_tradeoff_slope_unnormalized(0.8, 1.0));
  CHECK(lead1 == Approx(3.700439718141092).epsilon(1e-12));  // log2(13)

  double lead001 = nu_tradeoff(t, 0.01, eps_s) / (2.0 * smooth) -
                   std::ceil(detail::g_tradeoff_slope_unnormalized(0.8, 0.01));
  CHECK(lead001 == Approx(102.58496250072116).epsilon(1e-12));  // 100 + log2 6

  // gradient blow-up toward the right edge of the domain
  double nu_mid = nu_tradeoff(TradeoffTangent{0.78}, 0.05, eps_s);
  double nu_close = nu_tradeoff(TradeoffTangent{0.8535}, 0.05, eps_s);
  double nu_edge = nu_tradeoff(TradeoffTangent{kOmegaQuantumMax - 1e-9}, 0.05, eps_s);
  CHECK(nu_close > nu_mid);
  CHECK(nu_edge > 2.0 * nu_close);
}

TEST_CASE("collective AEP key length") {
  ProtocolParams p = nv_params(1e7, 0.05);
  SecurityBudget b = collective_budget();
  KeyLengthBreakdown r = key_length_collective_aep(p, b);

  CHECK(r.total_l ==
        r.entropy_term - r.ec_leakage - r.sqrt_n_corrections - r.constant_penalties);
  CHECK(r.soundness == Approx(2.0 * b.eps_ec + b.eps_smooth + b.eps_pa).epsilon(1e-15));
  CHECK(r.abort_threshold == Approx(b.eps_con + b.eps_ec).epsilon(1e-15));
  CHECK(r.feasible);
  CHECK(r.rate == Approx(r.total_l / p.n).epsilon(1e-15));

  SECTION("attested probability below the classical point is not an error") {
    ProtocolParams bad = p;
    bad.delta_est = 0.2;
    KeyLengthBreakdown rb = key_length_collective_aep(bad, b);
    CHECK_FALSE(rb.feasible);
    CHECK(rb.entropy_term == 0.0);
  }
}

TEST_CASE("collision-bound key length sits below the AEP entropy") {
  SecurityBudget b = collective_budget();
  for (double beta : {2.1, 2.3, 2.5, 2.7}) {
    ProtocolParams p;
    p.n = 1e8;
    p.gamma = 0.05;
    p.omega_exp = (4.0 + beta) / 8.0;
    p.q = 0.01;
    p.delta_est = 1e-3;
    p.delta_con = 1e-3;
    KeyLengthBreakdown aep = key_length_collective_aep(p, b);
    KeyLengthBreakdown h2 = key_length_collective_h2(p, b);
    CHECK(h2.entropy_term < aep.entropy_term);
    CHECK(h2.sqrt_n_corrections < aep.sqrt_n_corrections);
    CHECK(h2.soundness == Approx(2.0 * b.eps_ec + b.eps_pa).epsilon(1e-15));
    CHECK(h2.total_l == h2.entropy_term - h2.ec_leakage - h2.sqrt_n_corrections -
                            h2.constant_penalties);
  }
}

TEST_CASE("collision-bound entropy equals AEP entropy only at maximal violation") {
  SecurityBudget b = collective_budget();
  ProtocolParams p;
  p.n = 1e8;
  p.gamma = 0.05;
  p.omega_exp = kOmegaQuantumMax;
  p.q = 0.0;
  p.delta_est = 0.0;
  p.delta_con = 0.0;
  KeyLengthBreakdown aep = key_length_collective_aep(p, b);
  KeyLengthBreakdown h2 = key_length_collective_h2(p, b);
  CHECK(aep.entropy_term == Approx(p.n).margin(1e-3));
  CHECK(h2.entropy_term == Approx(p.n).margin(1e-3));
}

TEST_CASE("coherent key length") {
  ProtocolParams p = nv_params(1e8, 0.0542);
  p.delta_con = 0.0;
  SecurityBudget b = coherent_budget();
  KeyLengthBreakdown r = key_length_coherent(p, b);

  CHECK(r.total_l ==
        r.entropy_term - r.ec_leakage - r.sqrt_n_corrections - r.constant_penalties);
  CHECK(r.soundness == Approx(2.0 * b.eps_ec + b.eps_pa + b.eps_smooth).epsilon(1e-15));
  CHECK(r.abort_threshold == Approx(b.eps_ea + b.eps_ec).epsilon(1e-15));
  CHECK(r.chosen.pt_ratio > 0.75);
  CHECK(r.chosen.pt_ratio < kOmegaQuantumMax);

  SECTION("explicit tangent override is honored and never beats the optimum") {
    TradeoffTangent t{r.chosen.pt_ratio};
    KeyLengthBreakdown at_opt = key_length_coherent(p, b, t);
    CHECK(at_opt.total_l == Approx(r.total_l).margin(1e-6));
    KeyLengthBreakdown off = key_length_coherent(p, b, TradeoffTangent{0.78});
    CHECK(off.total_l <= r.total_l + 1e-9);
  }

  SECTION("abort-discounted smoothing is more conservative") {
    KeyLengthBreakdown disc = key_length_coherent(p, b, std::nullopt,
                                                  EatNuForm::kAbortDiscounted);
    CHECK(disc.total_l < r.total_l);
  }

  SECTION("privacy amplification and chain-rule terms are penalties") {
    CHECK(r.constant_penalties > 2.0 * std::log2(1.0 / (2.0 * b.eps_pa)));
  }

  SECTION("shrinking the smoothing parameter never increases the key") {
    SecurityBudget tighter = b;
    tighter.eps_smooth = b.eps_smooth / 100.0;
    KeyLengthBreakdown rt = key_length_coherent(p, tighter);
    CHECK(rt.total_l < r.total_l);
  }
}

TEST_CASE("full bounds against arbitrary-precision reference values") {
  // every term re-evaluated independently at 50-digit precision and frozen
  ProtocolParams p;
  p.n = 1e8;
  p.gamma = 0.05;
  p.omega_exp = (4.0 + 2.47) / 8.0;
  p.q = 0.051;
  p.delta_est = 2e-3;
  p.delta_con = 1.5e-3;
  SecurityBudget b;
  b.eps_smooth = b.eps_ec = b.eps_pa = b.eps_con = b.eps_ea = 2.5e-6;
  b.eps_ec_prime = 4.995e-3;

  KeyLengthBreakdown aep = key_length_collective_aep(p, b);
  CHECK(aep.entropy_term == Approx(39091152.713828618).epsilon(1e-12));
  CHECK(aep.total_l == Approx(7150601.2632343484).epsilon(1e-10));

  KeyLengthBreakdown h2 = key_length_collective_h2(p, b);
  CHECK(h2.entropy_term == Approx(22300852.655398053).epsilon(1e-12));
  CHECK(h2.total_l == Approx(-9160800.5157299818).epsilon(1e-10));

  ProtocolParams pc = p;
  pc.n = 2e8;
  pc.delta_con = 0.0;
  SecurityBudget bc = b;
  bc.eps_t = std::pow(b.eps_ec_prime / 4.0, 2);
  KeyLengthBreakdown coh = key_length_coherent(pc, bc, TradeoffTangent{0.80});
  CHECK(coh.entropy_term == Approx(60184729.534553098).epsilon(1e-10));
  CHECK(coh.ec_leakage == Approx(62320832.674671246).epsilon(1e-12));
  CHECK(coh.sqrt_n_corrections == Approx(1030579.9886340854).epsilon(1e-10));
  CHECK(coh.constant_penalties == Approx(93.102518633918815).epsilon(1e-12));
  CHECK(coh.total_l == Approx(-3166776.2312708675).epsilon(1e-8));
}

TEST_CASE("completeness bound") {
  ProtocolParams p;
  p.n = 1e8;
  p.gamma = 0.05;
  p.omega_exp = 0.85;
  p.q = 0.05;
  p.delta_est = 0.003;
  SecurityBudget b = collective_budget();
  b.eps_ec_prime = 4e-3;
  b.eps_ec = 1e-7;
  CHECK(completeness_bound(p, b) == Approx(0.0040002).epsilon(1e-12));

  ProtocolParams pz = p;
  pz.delta_est = 0.0;
  CHECK(completeness_bound(pz, b) >= 1.0);

  // halving the width quarters the exponent
  ProtocolParams ph = p;
  ph.delta_est = p.delta_est / 2.0;
  double tail = completeness_bound(ph, b) - (b.eps_ec_prime + 2.0 * b.eps_ec);
  CHECK(tail == Approx(std::pow(hoeffding_tail(p.gamma, p.n, p.delta_est), 0.25)).epsilon(1e-6));
}

TEST_CASE("security composition") {
  SecurityBudget b;
  b.eps_smooth = b.eps_ec = b.eps_pa = b.eps_ea = b.eps_con = 0.25e-5;
  b.eps_ec_prime = 1e-3;
  b.eps_t = 1e-12;
  CHECK(compose_security(b, AttackKind::kCoherent).soundness == Approx(1e-5).epsilon(1e-12));
  CHECK(compose_security(b, AttackKind::kCollectiveAep).soundness == Approx(1e-5).epsilon(1e-12));
  CHECK(compose_security(b, AttackKind::kCollectiveH2).soundness ==
        Approx(0.75e-5).epsilon(1e-12));
  CHECK(compose_security(b, AttackKind::kCoherent).abort_threshold ==
        Approx(b.eps_ea + b.eps_ec).epsilon(1e-15));
  CHECK(compose_security(b, AttackKind::kCollectiveAep).abort_threshold ==
        Approx(b.eps_con + b.eps_ec).epsilon(1e-15));

  SecurityBudget larger = b;
  larger.eps_pa *= 2;
  CHECK(compose_security(larger, AttackKind::kCoherent).soundness >
        compose_security(b, AttackKind::kCoherent).soundness);
}

TEST_CASE("breakdown identity on random configurations") {
  std::mt19937_64 gen(5150);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    ProtocolParams p;
    p.n = std::pow(10.0, 5.0 + 6.0 * u(gen));
    p.gamma = 0.01 + 0.95 * u(gen);
    p.omega_exp = 0.76 + 0.09 * u(gen);
    p.q = 0.001 + 0.1 * u(gen);
    p.delta_est = 1e-4 + 1e-2 * u(gen);
    p.delta_con = 1e-4 + 1e-2 * u(gen);
    SecurityBudget b;
    b.eps_smooth = std::pow(10.0, -9.0 + 4.0 * u(gen));
    b.eps_ec = std::pow(10.0, -9.0 + 4.0 * u(gen));
    b.eps_pa = std::pow(10.0, -9.0 + 4.0 * u(gen));
    b.eps_con = std::pow(10.0, -9.0 + 4.0 * u(gen));
    b.eps_ea = std::pow(10.0, -9.0 + 4.0 * u(gen));
    b.eps_ec_prime = std::pow(10.0, -5.0 + 3.0 * u(gen));
    b.eps_t = std::pow(b.eps_ec_prime / 4.0, 2);

    KeyLengthBreakdown a = key_length_collective_aep(p, b);
    REQUIRE(a.total_l ==
            a.entropy_term - a.ec_leakage - a.sqrt_n_corrections - a.constant_penalties);
    KeyLengthBreakdown h = key_length_collective_h2(p, b);
    REQUIRE(h.total_l ==
            h.entropy_term - h.ec_leakage - h.sqrt_n_corrections - h.constant_penalties);
    ProtocolParams pc = p;
    pc.delta_con = 0.0;
    KeyLengthBreakdown c = key_length_coherent(pc, b);
    REQUIRE(c.total_l ==
            c.entropy_term - c.ec_leakage - c.sqrt_n_corrections - c.constant_penalties);
    // no bound ever promises more than one bit per round, and never a NaN
    for (const KeyLengthBreakdown* r : {&a, &h, &c}) {
      REQUIRE(std::isfinite(r->total_l));
      REQUIRE(r->rate <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("asymptotic rate helper") {
  CHECK(asymptotic_rate(kBetaQuantumMax, 0.0, AttackKind::kCollectiveAep) ==
        Approx(1.0).margin(1e-12));
  CHECK(asymptotic_rate(2.47, 0.051, AttackKind::kCollectiveAep) ==
        Approx(0.13135095739119163).epsilon(1e-9));
  CHECK(asymptotic_rate(2.47, 0.051, AttackKind::kCoherent) ==
        asymptotic_rate(2.47, 0.051, AttackKind::kCollectiveAep));
  CHECK(asymptotic_rate(2.47, 0.051, AttackKind::kCollectiveH2) <
        asymptotic_rate(2.47, 0.051, AttackKind::kCollectiveAep));
}
