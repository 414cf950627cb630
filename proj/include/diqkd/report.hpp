#pragma once

// Machine-readable output envelopes for the command-line tool. Every result
// is wrapped with the tool version and the full effective configuration so
// the payload can be reproduced from the envelope alone. Numbers are
// rounded to 12 significant digits in JSON and printed with 9 in CSV;
// repeated identical invocations emit byte-identical output (a wall-clock
// timestamp is attached only on request).

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <json.hpp>

#include "diqkd/experiments.hpp"
#include "diqkd/param_search.hpp"
#include "diqkd/protocol_sim.hpp"

namespace diqkd {

inline constexpr const char* kToolName = "diqkd";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

using json = nlohmann::json;

// round to 12 significant digits so serialized values are stable and free
// of noise digits
inline double round_sig12(double x) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.11e", x);
  return std::strtod(buf, nullptr);
}

inline std::string csv_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.8e", x);
  return buf;
}

inline json to_json(const SecurityBudget& b, AttackKind kind) {
  json j;
  if (kind != AttackKind::kCollectiveH2) j["eps_smooth"] = round_sig12(b.eps_smooth);
  j["eps_ec"] = round_sig12(b.eps_ec);
  j["eps_ec_prime"] = round_sig12(b.eps_ec_prime);
  j["eps_pa"] = round_sig12(b.eps_pa);
  if (kind == AttackKind::kCoherent) {
    j["eps_ea"] = round_sig12(b.eps_ea);
    j["eps_t"] = round_sig12(b.eps_t);
  } else {
    j["eps_con"] = round_sig12(b.eps_con);
  }
  return j;
}

inline json to_json(const KeyLengthBreakdown& r) {
  json j;
  j["attack"] = attack_name(r.chosen.attack);
  j["entropy_term"] = round_sig12(r.entropy_term);
  j["ec_leakage"] = round_sig12(r.ec_leakage);
  j["sqrt_n_corrections"] = round_sig12(r.sqrt_n_corrections);
  j["constant_penalties"] = round_sig12(r.constant_penalties);
  j["total_l"] = round_sig12(r.total_l);
  j["rate"] = round_sig12(r.rate);
  j["feasible"] = r.feasible;
  j["soundness"] = round_sig12(r.soundness);
  j["abort_threshold"] = round_sig12(r.abort_threshold);
  json c;
  c["n"] = round_sig12(r.chosen.n);
  c["gamma"] = round_sig12(r.chosen.gamma);
  c["omega_exp"] = round_sig12(r.chosen.omega_exp);
  c["qber"] = round_sig12(r.chosen.q);
  c["delta_est"] = round_sig12(r.chosen.delta_est);
  if (r.chosen.attack != AttackKind::kCoherent)
    c["delta_con"] = round_sig12(r.chosen.delta_con);
  if (r.chosen.attack == AttackKind::kCoherent)
    c["pt_ratio"] = round_sig12(r.chosen.pt_ratio);
  c["budget"] = to_json(r.chosen.budget, r.chosen.attack);
  j["chosen_params"] = c;
  return j;
}

inline json to_json(const MinRoundsResult& r) {
  json j;
  j["status"] = min_rounds_status_name(r.status);
  if (r.status == MinRoundsStatus::kFeasible) j["min_rounds"] = round_sig12(r.n);
  j["asymptotic_rate"] = round_sig12(r.asymptotic_rate);
  json hist = json::array();
  for (const auto& step : r.history) {
    json s;
    s["n"] = round_sig12(step.n);
    s["total_l"] = round_sig12(step.total_l);
    s["feasible"] = step.feasible;
    hist.push_back(s);
  }
  j["bracket_history"] = hist;
  return j;
}

inline json to_json(const SimReport& r) {
  json j;
  j["rounds_executed"] = r.rounds_executed;
  j["test_rounds"] = r.test_rounds;
  j["wins"] = r.wins;
  j["losses"] = r.losses;
  j["bot_count"] = r.bot_count;
  j["key_rounds"] = r.key_rounds;
  j["key_errors"] = r.key_errors;
  j["empirical_omega"] = round_sig12(r.empirical_omega);
  j["empirical_qber"] = round_sig12(r.empirical_qber);
  j["abort_threshold"] = round_sig12(r.abort_threshold);
  j["aborted"] = r.aborted;
  j["rng"] = r.rng_id;
  j["seed"] = r.seed;
  return j;
}

inline json to_json(const ExperimentVerdict& v) {
  json j;
  j["name"] = v.name;
  j["corner"] = v.corner == ExperimentCorner::kCentral ? "central" : "pessimistic";
  j["beta"] = round_sig12(v.beta_used);
  j["qber"] = round_sig12(v.q_used);
  j["asymptotic_rate"] = round_sig12(v.asymptotic_rate);
  j["feasible"] = v.feasible;
  j["min_rounds_status"] = min_rounds_status_name(v.min_rounds.status);
  if (v.min_rounds.status == MinRoundsStatus::kFeasible)
    j["min_rounds"] = round_sig12(v.min_rounds.n);
  return j;
}

inline json envelope(const json& config, const json& result, bool with_timestamp = false,
                     const std::string& timestamp = "") {
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["schema"] = kSchemaVersion;
  j["timestamp"] = with_timestamp ? json(timestamp) : json(nullptr);
  j["config"] = config;
  j["result"] = result;
  return j;
}

// CSV region output; one row per cell in row-major order, thresholds echoed
// in the column names
inline std::string region_csv(const std::vector<RegionCell>& cells,
                              const std::vector<double>& thresholds) {
  std::string out = "qber,beta,asymptotic_rate,min_rounds";
  for (double t : thresholds) {
    char buf[40];
    std::snprintf(buf, sizeof buf, ",feasible_at_%g", t);
    out += buf;
  }
  out += '\n';
  for (const auto& c : cells) {
    out += csv_number(c.q) + "," + csv_number(c.beta) + "," + csv_number(c.asymptotic_rate) + ",";
    out += (c.status == MinRoundsStatus::kFeasible) ? csv_number(c.min_rounds)
                                                    : min_rounds_status_name(c.status);
    for (bool f : c.feasible_at) out += f ? ",1" : ",0";
    out += '\n';
  }
  return out;
}

// flat CSV form of a breakdown (single data row)
inline std::string breakdown_csv(const KeyLengthBreakdown& r) {
  std::string out =
      "attack,n,gamma,delta_est,delta_con,pt_ratio,entropy_term,ec_leakage,"
      "sqrt_n_corrections,constant_penalties,total_l,rate,feasible\n";
  out += std::string(attack_name(r.chosen.attack)) + "," + csv_number(r.chosen.n) + "," +
         csv_number(r.chosen.gamma) + "," + csv_number(r.chosen.delta_est) + "," +
         csv_number(r.chosen.delta_con) + "," + csv_number(r.chosen.pt_ratio) + "," +
         csv_number(r.entropy_term) + "," + csv_number(r.ec_leakage) + "," +
         csv_number(r.sqrt_n_corrections) + "," + csv_number(r.constant_penalties) + "," +
         csv_number(r.total_l) + "," + csv_number(r.rate) + "," + (r.feasible ? "1" : "0") + "\n";
  return out;
}

}  // namespace diqkd
