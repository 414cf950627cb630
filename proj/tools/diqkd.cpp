// Command-line front end: finite-size DIQKD key lengths and rates, minimum
// round counts, feasibility region scans, protocol simulation, the embedded
// experiment table, and the collision-entropy oracle check.
//
// Exit codes: 0 feasible/pass, 2 infeasible, 3 verification failure,
// 1 usage error.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "diqkd/bell_oracle.hpp"
#include "diqkd/report.hpp"

namespace {

using namespace diqkd;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitVerifyFail = 3;

struct PointSpec {
  std::optional<double> beta;
  std::optional<double> nu;
  std::optional<double> qber;
  bool depolarizing = false;

  // resolve to (beta, q); usage errors name the offending combination
  std::pair<double, double> resolve() const {
    if (nu) {
      NoisePoint p = depolarizing_point(*nu);
      return {p.beta, p.q};
    }
    if (depolarizing) {
      if (!qber) throw CLI::ValidationError("--depolarizing requires --qber");
      NoisePoint p = depolarizing_point_from_qber(*qber);
      return {p.beta, p.q};
    }
    if (!beta || !qber)
      throw CLI::ValidationError(
          "specify the working point as --beta B --qber Q, or --nu NU, or --depolarizing --qber Q");
    return {*beta, *qber};
  }
};

struct CommonOpts {
  std::string attack = "collective-aep";
  double eps_sound = 1e-5;
  double eps_complete = 1e-2;
  std::string format = "json";
  std::string out_path;
  bool timestamp = false;
  int threads = 1;
  std::string nu_form = "bare";
  // optimizer overrides
  std::optional<double> gamma, delta_est, delta_con, tangent;
  std::optional<double> eps_s, eps_ec, eps_ec_prime, eps_pa, eps_ea, eps_con, eps_t;
};

AttackKind parse_attack(const std::string& s) {
  if (s == "coherent") return AttackKind::kCoherent;
  if (s == "collective-aep") return AttackKind::kCollectiveAep;
  if (s == "collective-h2") return AttackKind::kCollectiveH2;
  throw CLI::ValidationError("--attack must be coherent, collective-aep or collective-h2");
}

OptimizerConfig make_config(const CommonOpts& o) {
  OptimizerConfig cfg;
  cfg.nu_form =
      (o.nu_form == "abort-discounted") ? EatNuForm::kAbortDiscounted : EatNuForm::kBare;
  cfg.fixed_gamma = o.gamma;
  cfg.fixed_delta_est = o.delta_est;
  cfg.fixed_delta_con = o.delta_con;
  cfg.fixed_pt_ratio = o.tangent;
  cfg.fixed_eps_smooth = o.eps_s;
  cfg.fixed_eps_ec = o.eps_ec;
  cfg.fixed_eps_ec_prime = o.eps_ec_prime;
  cfg.fixed_eps_pa = o.eps_pa;
  cfg.fixed_eps_ea = o.eps_ea;
  cfg.fixed_eps_con = o.eps_con;
  cfg.fixed_eps_t = o.eps_t;
  return cfg;
}

json overrides_json(const CommonOpts& o) {
  json j = json::object();
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = round_sig12(*v);
  };
  put("gamma", o.gamma);
  put("delta_est", o.delta_est);
  put("delta_con", o.delta_con);
  put("tangent", o.tangent);
  put("eps_s", o.eps_s);
  put("eps_ec", o.eps_ec);
  put("eps_ec_prime", o.eps_ec_prime);
  put("eps_pa", o.eps_pa);
  put("eps_ea", o.eps_ea);
  put("eps_con", o.eps_con);
  put("eps_t", o.eps_t);
  return j;
}

json config_json(const CommonOpts& o, const PointSpec& spec, std::optional<double> rounds) {
  auto [beta, q] = spec.resolve();
  json j;
  j["attack"] = o.attack;
  j["beta"] = round_sig12(beta);
  j["qber"] = round_sig12(q);
  if (spec.nu) j["nu"] = round_sig12(*spec.nu);
  j["depolarizing"] = spec.depolarizing || spec.nu.has_value();
  if (rounds) j["rounds"] = round_sig12(*rounds);
  j["eps_sound"] = round_sig12(o.eps_sound);
  j["eps_complete"] = round_sig12(o.eps_complete);
  j["overrides"] = overrides_json(o);
  j["format"] = o.format;
  return j;
}

std::string now_iso8601() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
  return buf;
}

int emit(const CommonOpts& o, const std::string& text) {
  if (o.out_path.empty()) {
    std::cout << text;
    return kExitOk;
  }
  std::ofstream f(o.out_path, std::ios::binary);
  if (!f) {
    std::cerr << "error: cannot write to " << o.out_path << "\n";
    return kExitUsage;
  }
  f << text;
  return kExitOk;
}

int emit_envelope(const CommonOpts& o, const json& config, const json& result) {
  json env = envelope(config, result, o.timestamp, o.timestamp ? now_iso8601() : "");
  return emit(o, env.dump(2) + "\n");
}

void add_common(CLI::App* cmd, CommonOpts& o, PointSpec* spec, bool with_point = true) {
  cmd->add_option("--attack", o.attack, "coherent | collective-aep | collective-h2")
      ->check(CLI::IsMember({"coherent", "collective-aep", "collective-h2"}));
  cmd->add_option("--eps-sound", o.eps_sound, "target soundness (default 1e-5)");
  cmd->add_option("--eps-complete", o.eps_complete, "target completeness (default 1e-2)");
  cmd->add_option("--format", o.format)->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--out", o.out_path, "write output to file instead of stdout");
  cmd->add_flag("--timestamp", o.timestamp, "attach a wall-clock timestamp to the envelope");
  cmd->add_option("--threads", o.threads)->check(CLI::PositiveNumber);

  if (with_point && spec) {
    auto* b = cmd->add_option("--beta", spec->beta, "CHSH value");
    auto* n = cmd->add_option("--nu", spec->nu, "depolarizing noise parameter");
    auto* q = cmd->add_option("--qber", spec->qber, "quantum bit error rate");
    auto* d = cmd->add_flag("--depolarizing", spec->depolarizing,
                            "derive beta from --qber via the depolarizing model");
    b->excludes(n)->excludes(d);
    n->excludes(q)->excludes(d);
  }

  auto opt = [&](const char* name, std::optional<double>& slot, const char* desc) {
    cmd->add_option(name, slot, desc);
  };
  opt("--gamma", o.gamma, "fix the test fraction instead of searching");
  opt("--delta-est", o.delta_est, "fix the estimation width");
  opt("--delta-con", o.delta_con, "fix the confidence width (collective)");
  opt("--tangent", o.tangent, "fix the tangency ratio (coherent)");
  opt("--eps-s", o.eps_s, "fix the smoothing parameter");
  opt("--eps-ec", o.eps_ec, "fix eps_EC");
  opt("--eps-ec-prime", o.eps_ec_prime, "fix eps'_EC");
  opt("--eps-pa", o.eps_pa, "fix eps_PA");
  opt("--eps-ea", o.eps_ea, "fix eps_EA (coherent)");
  opt("--eps-con", o.eps_con, "fix eps_con (collective)");
  opt("--eps-t", o.eps_t, "fix the round-count tail parameter (coherent)");
  cmd->add_option("--eat-nu-form", o.nu_form,
                  "second-order smoothing form for the accumulation bound (coherent)")
      ->check(CLI::IsMember({"bare", "abort-discounted"}));
}

int cmd_rate(const CommonOpts& o, const PointSpec& spec, double rounds) {
  auto [beta, q] = spec.resolve();
  SearchTargets targets{o.eps_sound, o.eps_complete};
  KeyLengthBreakdown r =
      optimize_rate(parse_attack(o.attack), beta, q, rounds, targets, make_config(o));
  int code = r.feasible ? kExitOk : kExitInfeasible;
  if (o.format == "csv") {
    int ec = emit(o, breakdown_csv(r));
    return ec != kExitOk ? ec : code;
  }
  int ec = emit_envelope(o, config_json(o, spec, rounds), to_json(r));
  return ec != kExitOk ? ec : code;
}

int cmd_min_rounds(const CommonOpts& o, const PointSpec& spec) {
  auto [beta, q] = spec.resolve();
  SearchTargets targets{o.eps_sound, o.eps_complete};
  MinRoundsResult r = min_rounds(parse_attack(o.attack), beta, q, targets, make_config(o));
  int code = (r.status == MinRoundsStatus::kFeasible) ? kExitOk : kExitInfeasible;
  int ec = emit_envelope(o, config_json(o, spec, std::nullopt), to_json(r));
  return ec != kExitOk ? ec : code;
}

int cmd_region(const CommonOpts& o, double beta_min, double beta_max, double q_min, double q_max,
               const std::string& grid, const std::vector<double>& thresholds) {
  int rows = 0, cols = 0;
  if (std::sscanf(grid.c_str(), "%dx%d", &rows, &cols) != 2 || rows < 2 || cols < 2)
    throw CLI::ValidationError("--grid must be RxC with R,C >= 2 (qber rows x beta columns)");
  auto cells = region_scan(beta_min, beta_max, q_min, q_max, cols, rows, parse_attack(o.attack),
                           thresholds, SearchTargets{o.eps_sound, o.eps_complete}, make_config(o),
                           o.threads);
  return emit(o, region_csv(cells, thresholds));
}

int cmd_verify_h2(const CommonOpts& o, int grid_points, bool inject) {
  double worst = 0.0;
  for (int i = 1; i <= grid_points; ++i) {
    double r = 1.0 / kSqrt2 + (1.0 - 1.0 / kSqrt2) * i / grid_points;
    BellDiagonalState st = construct_rho_star(r);
    double numeric = numeric_h2_oracle(st);
    double claimed = collision_bound(ChshViolation(2.0 * kSqrt2 * r));
    if (inject) claimed += 1e-6;
    worst = std::max(worst, std::abs(numeric - claimed));
  }
  bool pass = worst <= 1e-9;
  json cfg;
  cfg["grid_points"] = grid_points;
  cfg["perturbed"] = inject;
  json res;
  res["max_deviation"] = round_sig12(worst);
  res["tolerance"] = 1e-9;
  res["pass"] = pass;
  int ec = emit_envelope(o, cfg, res);
  if (ec != kExitOk) return ec;
  return pass ? kExitOk : kExitVerifyFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-size key rates for CHSH device-independent QKD"};
  app.require_subcommand(1);
  app.fallthrough(true);
  app.set_config("--config", "",
                 "INI file mirroring the flags under a [subcommand] section; flags win");

  // rate
  CommonOpts rate_opts;
  PointSpec rate_spec;
  double rate_rounds = 0.0;
  auto* rate_cmd = app.add_subcommand("rate", "optimized key-length breakdown at fixed n");
  add_common(rate_cmd, rate_opts, &rate_spec);
  rate_cmd->add_option("--rounds", rate_rounds, "expected number of rounds")->required();

  // min-rounds
  CommonOpts mr_opts;
  PointSpec mr_spec;
  auto* mr_cmd = app.add_subcommand("min-rounds", "smallest n with a positive key length");
  add_common(mr_cmd, mr_opts, &mr_spec);

  // region
  CommonOpts rg_opts;
  double rg_beta_min = 2.0, rg_beta_max = kBetaQuantumMax, rg_q_min = 0.0, rg_q_max = 0.1;
  std::string rg_grid = "10x10";
  std::vector<double> rg_thresholds;
  auto* rg_cmd = app.add_subcommand("region", "scan the (qber, beta) feasibility region");
  add_common(rg_cmd, rg_opts, nullptr, false);
  rg_cmd->add_option("--beta-min", rg_beta_min)->required();
  rg_cmd->add_option("--beta-max", rg_beta_max)->required();
  rg_cmd->add_option("--qber-min", rg_q_min)->required();
  rg_cmd->add_option("--qber-max", rg_q_max)->required();
  rg_cmd->add_option("--grid", rg_grid, "RxC grid (qber rows x beta columns)");
  rg_cmd->add_option("--thresholds", rg_thresholds, "round-count thresholds")->delimiter(',');

  // simulate
  CommonOpts sim_opts;
  int sim_protocol = 2;
  double sim_nu = 0.0, sim_gamma = 0.0, sim_omega = 0.0, sim_delta = 0.0;
  double sim_rounds = 0.0, sim_blocks = 0.0, sim_trials = 1.0;
  uint64_t sim_seed = 0;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo protocol execution");
  sim_cmd->add_option("--protocol", sim_protocol)->check(CLI::IsMember({1, 2}))->required();
  sim_cmd->add_option("--nu", sim_nu, "depolarizing noise")->required();
  sim_cmd->add_option("--gamma", sim_gamma, "test fraction")->required();
  auto* opt_rounds = sim_cmd->add_option("--rounds", sim_rounds, "rounds (protocol 2)");
  auto* opt_blocks = sim_cmd->add_option("--blocks", sim_blocks, "blocks (protocol 1)");
  opt_rounds->excludes(opt_blocks);
  sim_cmd->add_option("--seed", sim_seed, "PRNG seed (mandatory)")->required();
  sim_cmd->add_option("--trials", sim_trials);
  sim_cmd->add_option("--omega-exp", sim_omega, "abort-rule winning probability")->required();
  sim_cmd->add_option("--delta-est", sim_delta, "abort-rule width")->required();
  sim_cmd->add_option("--format", sim_opts.format)->check(CLI::IsMember({"json"}));
  sim_cmd->add_option("--out", sim_opts.out_path);
  sim_cmd->add_flag("--timestamp", sim_opts.timestamp);

  // experiments
  CommonOpts ex_opts;
  bool ex_pessimistic = false;
  auto* ex_cmd = app.add_subcommand("experiments", "evaluate the embedded experiment table");
  add_common(ex_cmd, ex_opts, nullptr, false);
  ex_cmd->add_flag("--pessimistic", ex_pessimistic, "also evaluate the 1-sigma worst corner");

  // verify-h2
  CommonOpts vh_opts;
  int vh_points = 50;
  bool vh_inject = false;
  auto* vh_cmd = app.add_subcommand("verify-h2", "check the collision-entropy oracle");
  vh_cmd->add_option("--grid-points", vh_points)->check(CLI::PositiveNumber);
  vh_cmd->add_option("--out", vh_opts.out_path);
  vh_cmd->add_flag("--timestamp", vh_opts.timestamp);
  vh_cmd->add_flag("--inject-perturbation", vh_inject)->group("");  // test hook

  try {
    app.parse(argc, argv);

    if (rate_cmd->parsed()) return cmd_rate(rate_opts, rate_spec, rate_rounds);
    if (mr_cmd->parsed()) return cmd_min_rounds(mr_opts, mr_spec);
    if (rg_cmd->parsed())
      return cmd_region(rg_opts, rg_beta_min, rg_beta_max, rg_q_min, rg_q_max, rg_grid,
                        rg_thresholds);
    if (sim_cmd->parsed()) {
      SimConfig cfg;
      cfg.protocol_variant = sim_protocol;
      cfg.gamma = sim_gamma;
      cfg.n_rounds = static_cast<uint64_t>(sim_rounds);
      cfg.m_blocks = static_cast<uint64_t>(sim_blocks);
      cfg.seed = sim_seed;
      cfg.trials = static_cast<uint64_t>(sim_trials);
      if (sim_protocol == 2 && cfg.n_rounds == 0)
        throw CLI::ValidationError("--protocol 2 requires --rounds");
      if (sim_protocol == 1 && cfg.m_blocks == 0)
        throw CLI::ValidationError("--protocol 1 requires --blocks");
      DeviceModel model = DeviceModel::chsh_optimal(sim_nu);
      AbortRule rule{sim_omega, sim_delta};
      json cfg_j;
      cfg_j["protocol"] = sim_protocol;
      cfg_j["nu"] = round_sig12(sim_nu);
      cfg_j["gamma"] = round_sig12(sim_gamma);
      if (sim_protocol == 2) cfg_j["rounds"] = cfg.n_rounds;
      else cfg_j["blocks"] = cfg.m_blocks;
      cfg_j["seed"] = cfg.seed;
      cfg_j["trials"] = cfg.trials;
      cfg_j["omega_exp"] = round_sig12(sim_omega);
      cfg_j["delta_est"] = round_sig12(sim_delta);
      cfg_j["rng"] = kRngId;
      json res;
      uint64_t n_trials = static_cast<uint64_t>(sim_trials);
      if (n_trials <= 1) {
        res = to_json(run_protocol(cfg, model, rule));
      } else {
        json arr = json::array();
        uint64_t aborts = 0;
        for (uint64_t t = 0; t < n_trials; ++t) {
          SimReport rep = run_protocol_trial(cfg, model, rule, t);
          if (rep.aborted) ++aborts;
          arr.push_back(to_json(rep));
        }
        res["trials"] = arr;
        res["abort_frequency"] =
            round_sig12(static_cast<double>(aborts) / static_cast<double>(n_trials));
      }
      return emit_envelope(sim_opts, cfg_j, res);
    }
    if (ex_cmd->parsed()) {
      SearchTargets targets{ex_opts.eps_sound, ex_opts.eps_complete};
      OptimizerConfig cfg = make_config(ex_opts);
      AttackKind kind = parse_attack(ex_opts.attack);
      json rows = json::array();
      for (const auto& rec : builtin_experiments()) {
        json row = to_json(evaluate_experiment(rec, kind, targets, cfg));
        if (ex_pessimistic)
          row["pessimistic"] = to_json(evaluate_experiment(rec, kind, targets, cfg,
                                                           ExperimentCorner::kPessimistic));
        rows.push_back(row);
      }
      json cfg_j;
      cfg_j["attack"] = ex_opts.attack;
      cfg_j["pessimistic"] = ex_pessimistic;
      cfg_j["eps_sound"] = round_sig12(ex_opts.eps_sound);
      cfg_j["eps_complete"] = round_sig12(ex_opts.eps_complete);
      if (ex_opts.format == "csv") return emit(ex_opts, experiments_csv());
      return emit_envelope(ex_opts, cfg_j, rows);
    }
    if (vh_cmd->parsed()) return cmd_verify_h2(vh_opts, vh_points, vh_inject);
    return kExitUsage;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
