// Copyright 2026 The nflfed Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "nflfed/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>

#include "nflfed/attacks.hpp"
#include "nflfed/bounds.hpp"
#include "nflfed/fedsim.hpp"
#include "nflfed/report.hpp"
#include "nflfed/two_atom.hpp"

namespace nflfed {
namespace cli {

using nlohmann::json;
using scenario_io::ConfigError;

namespace {

constexpr std::uint64_t kSampleTag = 0x5a3b;
constexpr std::uint64_t kAttackTag = 0xa77c;

double parse_double(const std::string& text, const std::string& field) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError(field, "'" + text + "' is not a number");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

mechanisms::MechanismConfig default_of(const std::string& kind, const mechanisms::MechanismConfig& base) {
  if (mechanisms::mechanism_name(base) == kind) return base;
  if (kind == "identity") return mechanisms::Identity{};
  if (kind == "randomization") return mechanisms::Randomization{1.0};
  if (kind == "paillier") return mechanisms::PaillierConfig{};
  if (kind == "secret_sharing") {
    mechanisms::SecretSharing s;
    s.b = {8.0};
    s.r = {8.0};
    return s;
  }
  if (kind == "compression") return mechanisms::Compression{{1.0}};
  throw ConfigError("sweep", "unknown mechanism '" + kind + "'");
}

void set_param(mechanisms::MechanismConfig& cfg, const std::string& param, double v) {
  bool ok = false;
  if (auto* r = std::get_if<mechanisms::Randomization>(&cfg)) {
    if (param == "sigma") r->sigma = v, ok = true;
  } else if (auto* c = std::get_if<mechanisms::Compression>(&cfg)) {
    if (param == "rho") c->rho = {v}, ok = true;
  } else if (auto* s = std::get_if<mechanisms::SecretSharing>(&cfg)) {
    if (param == "b" || param == "spread") s->b = {v}, ok = true;
    if (param == "r" || param == "spread") s->r = {v}, ok = true;
    if (param == "num_shares") s->num_shares = static_cast<int>(std::lround(v)), ok = true;
  } else if (auto* p = std::get_if<mechanisms::PaillierConfig>(&cfg)) {
    if (param == "prime_bits") p->prime_bits = static_cast<unsigned>(std::lround(v)), ok = true;
    if (param == "delta") p->delta = v, ok = true;
    if (param == "scale_bits") p->scale_bits = static_cast<int>(std::lround(v)), ok = true;
  }
  if (!ok) throw ConfigError("sweep", "parameter '" + param + "' does not apply to " + mechanisms::mechanism_name(cfg));
}

std::vector<mechanisms::MechanismConfig> build_grid(const Options& o, const mechanisms::MechanismConfig& base,
                                                    const std::vector<std::string>& fallback) {
  std::vector<mechanisms::MechanismConfig> grid;
  for (const auto& s : o.sweeps.empty() ? fallback : o.sweeps) {
    auto part = expand_sweep(s, base);
    grid.insert(grid.end(), part.begin(), part.end());
  }
  if (grid.empty()) grid.push_back(base);
  return grid;
}

scenario_io::ScenarioFile load(const Options& o) {
  if (o.scenario.empty()) throw ConfigError("scenario", "no scenario file given");
  auto sf = scenario_io::load_scenario(o.scenario);
  if (o.seed) sf.fl.master_seed = *o.seed;
  if (o.format != "json" && o.format != "csv" && o.format != "both")
    throw ConfigError("format", "expected json, csv or both");
  return sf;
}

bool want_json(const Options& o) { return o.format != "csv"; }
bool want_csv(const Options& o) { return o.format != "json"; }

std::string out_path(const Options& o, const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(o.out, ec);
  if (ec) throw ConfigError("out", "cannot create '" + o.out + "': " + ec.message());
  return (std::filesystem::path(o.out) / name).string();
}

std::size_t replicates_of(const Options& o, std::size_t dflt) {
  std::size_t r = o.replicates.value_or(dflt);
  if (r < 2) throw ConfigError("replicates", "need at least 2 replicates for a standard error");
  return r;
}

void write_manifest(const Options& o, const std::string& command, const scenario_io::ScenarioFile& sf,
                    const std::vector<std::string>& outputs, double seconds) {
  std::vector<std::string> all = outputs;
  std::string path = out_path(o, "manifest.json");
  all.push_back(path);
  json m{{"schema_version", report::kSchemaVersion},
         {"kind", "manifest"},
         {"command", command},
         {"scenario_path", o.scenario},
         {"master_seed", sf.fl.master_seed},
         {"tool_version", NFLFED_VERSION},
         {"wall_clock_seconds", report::num(seconds)},
         {"outputs", all},
         {"config_hash", sf.config_hash}};
  report::write_json(path, m);
}

json header(const std::string& kind, const scenario_io::ScenarioFile& sf) {
  return {{"schema_version", report::kSchemaVersion},
          {"kind", kind},
          {"config_hash", sf.config_hash},
          {"master_seed", sf.fl.master_seed}};
}

std::vector<std::string> emit(const Options& o, const std::string& stem, const json& j, const report::Table& t) {
  std::vector<std::string> files;
  if (want_json(o)) files.push_back(report::write_json(out_path(o, stem + ".json"), j));
  if (want_csv(o)) files.push_back(report::write_text(out_path(o, stem + ".csv"), t.to_csv()));
  return files;
}

void require_grid_mechanism(const mechanisms::MechanismConfig& cfg, const std::string& field) {
  if (std::holds_alternative<mechanisms::PaillierConfig>(cfg) || std::holds_alternative<mechanisms::SecretSharing>(cfg))
    throw ConfigError(field, mechanisms::mechanism_name(cfg) +
                                 " has no grid channel for the enumerable scenario; use identity, randomization or compression");
}

}  // namespace

std::vector<mechanisms::MechanismConfig> expand_sweep(const std::string& spec,
                                                      const mechanisms::MechanismConfig& base) {
  auto parts = split(spec, ':');
  auto cfg = default_of(parts[0], base);
  if (parts.size() == 1) return {cfg};
  auto eq = parts[1].find('=');
  if (eq == std::string::npos) throw ConfigError("sweep", "expected param=value in '" + spec + "'");
  std::string param = parts[1].substr(0, eq);
  double start = parse_double(parts[1].substr(eq + 1), "sweep");
  std::vector<mechanisms::MechanismConfig> out;
  if (parts.size() == 2) {
    set_param(cfg, param, start);
    out.push_back(cfg);
  } else if (parts.size() == 4) {
    double stop = parse_double(parts[2], "sweep");
    double cnt = parse_double(parts[3], "sweep");
    if (!(cnt >= 1.0) || cnt != std::floor(cnt)) throw ConfigError("sweep", "count must be a positive integer");
    auto n = static_cast<std::size_t>(cnt);
    for (std::size_t i = 0; i < n; ++i) {
      double v = n == 1 ? start : start + (stop - start) * static_cast<double>(i) / static_cast<double>(n - 1);
      auto c = cfg;
      set_param(c, param, v);
      out.push_back(c);
    }
  } else {
    throw ConfigError("sweep", "expected kind:param=start:stop:count, got '" + spec + "'");
  }
  for (const auto& c : out) {
    try {
      mechanisms::validate(c);
    } catch (const Error& e) {
      throw ConfigError("sweep", e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

json cmd_simulate(const Options& o) {
  auto t0 = std::chrono::steady_clock::now();
  auto sf = load(o);
  std::optional<std::size_t> reps;
  if (o.replicates) reps = replicates_of(o, 0);
  auto trace = fedsim::run(sf.fl);
  json tj = report::trace_json(trace, sf.canonical);
  auto files = emit(o, "trace", tj, report::trace_table(trace));
  json summary = header("simulate", sf);
  summary["final_utility"] = report::nums(trace.final_utility);
  summary["transport_bytes"] = trace.transport_bytes;
  summary["recorded_bits"] = trace.recorded_bits;
  if (reps) {
    auto prot = fedsim::run_replicates(sf.fl, *reps);
    auto base = fedsim::run_replicates(fedsim::unprotected_counterpart(sf.fl), *reps);
    json mj = header("measurements", sf);
    mj["replicates"] = *reps;
    mj["mechanism"] = scenario_io::mechanism_to_json(sf.fl.mechanism);
    mj["utility_loss"] = report::estimate_json(fedsim::measure_utility_loss(prot, base));
    mj["efficiency_reduction"] = report::estimate_json(fedsim::measure_efficiency_reduction(prot, base));
    files.push_back(report::write_json(out_path(o, "measurements.json"), mj));
    summary["measurements"] = mj;
  }
  write_manifest(o, "simulate", sf, files, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return summary;
}

json cmd_bounds(const Options& o) {
  auto t0 = std::chrono::steady_clock::now();
  auto sf = load(o);
  if (!sf.analysis.constants) throw ConfigError("analysis.constants", "required by the bounds command");
  const auto& bc = *sf.analysis.constants;
  auto grid = build_grid(o, sf.fl.mechanism, {});
  bounds::MechanismBoundInputs in;
  in.c1 = bc.c1;
  in.c2 = bounds::c2_from_xi(bc.xi);
  in.delta = bc.delta;
  in.xi_gamma = bc.xi_gamma;
  in.dims = bc.dims;
  in.sigma0 = bc.sigma0;
  auto constants = bounds::make_constants(bc.xi, bc.c1, bc.delta, bc.xi_gamma,
                                          bc.xi_gamma ? std::optional<double>(1.0) : std::nullopt, bc.gamma_ratio);
  json j = header("bounds", sf);
  j["constants"] = report::constants_json(constants);
  j["rows"] = json::array();
  report::Table t;
  t.header = {"mechanism", "label", "privacy_raw", "privacy_clamped", "privacy_conservative_raw",
              "privacy_conservative_clamped", "utility", "efficiency", "c1", "c2", "c_d", "c_x",
              "margin_privacy_efficiency", "margin_privacy_utility", "margin_full_nfl"};
  for (const auto& cfg : grid) {
    bounds::BoundValue priv, cons;
    double util = 0.0;
    std::optional<double> eff;
    try {
      priv = bounds::mechanism_privacy_bound(cfg, in, bounds::RandomizationVariant::kStated);
      cons = bounds::mechanism_privacy_bound(cfg, in, bounds::RandomizationVariant::kConservative);
      util = bounds::mechanism_utility_bound(cfg, in);
      eff = bounds::mechanism_efficiency_bound(cfg, in);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDeltaRequired) throw ConfigError("analysis.constants.delta", e.what());
      if (e.code() == ErrorCode::kXiGammaRequired) throw ConfigError("analysis.constants.xi_gamma", e.what());
      if (e.code() == ErrorCode::kInvalidConfig) throw ConfigError("analysis.constants.sigma0", e.what());
      throw;
    }
    auto checks = bounds::nfl_check(priv.clamped, util, eff.value_or(std::nan("")), constants);
    json row{{"mechanism", scenario_io::mechanism_to_json(cfg)},
             {"label", scenario_io::mechanism_label(cfg)},
             {"privacy", {{"raw", report::num(priv.raw)}, {"clamped", report::num(priv.clamped)}}},
             {"privacy_conservative", {{"raw", report::num(cons.raw)}, {"clamped", report::num(cons.clamped)}}},
             {"utility", report::num(util)},
             {"efficiency", eff ? report::num(*eff) : json("NA")},
             {"checks", report::checks_json(checks)}};
    j["rows"].push_back(row);
    t.rows.push_back({mechanisms::mechanism_name(cfg), scenario_io::mechanism_label(cfg), report::csv_num(priv.raw),
                      report::csv_num(priv.clamped), report::csv_num(cons.raw), report::csv_num(cons.clamped),
                      report::csv_num(util), report::csv_num(eff), report::csv_num(constants.c1),
                      report::csv_num(constants.c2), report::csv_num(constants.c_d), report::csv_num(constants.c_x),
                      report::csv_num(checks.privacy_efficiency.margin), report::csv_num(checks.privacy_utility.margin),
                      report::csv_num(checks.full_nfl.margin)});
  }
  auto files = emit(o, "bounds", j, t);
  write_manifest(o, "bounds", sf, files, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return j;
}

json cmd_attack(const Options& o) {
  auto t0 = std::chrono::steady_clock::now();
  auto sf = load(o);
  std::string kind = o.attack.value_or(sf.attack.kind);
  const auto& fl = sf.fl;
  bool vertical = fl.topology == fedsim::Topology::kVertical;
  if (kind == "direct_label") {
    if (!vertical) throw ConfigError("attack.kind", "direct_label needs a vfl scenario");
  } else if (kind == "norm_scoring") {
    if (!vertical || fl.classes != 2) throw ConfigError("attack.kind", "norm_scoring needs a binary vfl scenario");
    if (sf.attack.calibration_samples == 0 || sf.attack.calibration_samples >= fl.data.samples_per_client)
      throw ConfigError("attack.calibration_samples", "must be positive and below the sample count");
  } else if (kind == "dlg") {
    if (vertical) throw ConfigError("attack.kind", "dlg needs an hfl scenario");
    if (fl.local_steps != 1) throw ConfigError("local_steps", "dlg reads single-step updates; set local_steps to 1");
  } else {
    throw ConfigError("attack", "unknown attack '" + kind + "'");
  }

  auto trace = fedsim::run(fl);
  json j = header("attack", sf);
  j["attack"] = kind;
  j["mechanism"] = scenario_io::mechanism_to_json(fl.mechanism);
  j["rounds"] = json::array();
  report::Table t;
  t.header = {"round", "client", "samples", "success_rate", "unprotected_success_rate", "epsilon_p_estimate"};

  if (vertical) {
    const auto& labels = trace.labels;
    for (const auto& r : trace.rounds) {
      std::vector<int> pred_p(labels.size()), pred_o(labels.size());
      std::size_t first = 0;
      if (kind == "direct_label") {
        auto infer = [](const Vec& g) {
          try {
            return static_cast<int>(attacks::direct_label_inference(g));
          } catch (const Error&) {
            return -1;
          }
        };
        for (std::size_t i = 0; i < labels.size(); ++i) {
          pred_p[i] = infer(r.grad_protected[i]);
          pred_o[i] = infer(r.grad_original[i]);
        }
      } else {
        first = sf.attack.calibration_samples;
        std::vector<int> calib(labels.size(), -1);
        for (std::size_t i = 0; i < first; ++i) calib[i] = labels[i];
        try {
          pred_p = attacks::norm_scoring_attack(r.grad_protected, calib).predictions;
          pred_o = attacks::norm_scoring_attack(r.grad_original, calib).predictions;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::kDegenerateCalibration)
            throw ConfigError("attack.calibration_samples", e.what());
          throw;
        }
      }
      std::vector<int> truth(labels.begin() + static_cast<long>(first), labels.end());
      std::vector<int> guess(pred_p.begin() + static_cast<long>(first), pred_p.end());
      double hit = 0.0, hit_o = 0.0;
      for (std::size_t i = first; i < labels.size(); ++i) {
        hit += pred_p[i] == labels[i];
        hit_o += pred_o[i] == labels[i];
      }
      double n = static_cast<double>(labels.size() - first);
      double eps = attacks::confusion_leakage(truth, guess, fl.classes);
      j["rounds"].push_back({{"round", r.round}, {"client", 1}, {"samples", labels.size() - first},
                             {"success_rate", report::num(hit / n)},
                             {"unprotected_success_rate", report::num(hit_o / n)},
                             {"epsilon_p_estimate", report::num(eps)}});
      t.rows.push_back({std::to_string(r.round), "1", std::to_string(labels.size() - first), report::csv_num(hit / n),
                        report::csv_num(hit_o / n), report::csv_num(eps)});
    }
  } else {
    auto data = fedsim::synth_data(fl);
    models::ToyModel base = fl.model == models::ModelKind::kLinearRegression
                                ? models::ToyModel::linear_regression(Vec(fl.dim, 0.0))
                                : models::ToyModel::softmax_linear(fl.dim, fl.classes, {});
    bool single = fl.data.samples_per_client == 1;
    Vec prev(base.num_params(), 0.0);
    for (const auto& r : trace.rounds) {
      for (std::size_t k = 0; k < r.clients.size(); ++k) {
        Vec observed(prev.size());
        for (std::size_t i = 0; i < prev.size(); ++i) observed[i] = (prev[i] - r.clients[k].protected_[i]) / fl.lr;
        models::ToyModel m = base;
        m.theta = prev;
        Rng rng(derive_seed(fl.master_seed, {kAttackTag, r.round, k}));
        std::normal_distribution<double> z(0.0, 1.0);
        attacks::Candidate init;
        for (std::size_t i = 0; i < fl.dim; ++i) init.x.push_back(z(rng));
        attacks::DlgResult best;
        best.residual = std::numeric_limits<double>::infinity();
        std::size_t tries = m.kind == models::ModelKind::kLinearRegression ? 1 : fl.classes;
        for (std::size_t c = 0; c < tries; ++c) {
          init.target = static_cast<double>(c);
          auto res = attacks::dlg_gradient_match(observed, m, init, sf.attack.dlg);
          if (res.residual < best.residual) best = res;
        }
        json row{{"round", r.round}, {"client", k}, {"samples", fl.data.samples_per_client},
                 {"residual", report::num(best.residual)}, {"epsilon_p_estimate", nullptr}};
        std::optional<double> rate;
        if (single) {
          const double* x = data.train[k].row(0);
          double dot = 0.0, a = 0.0, b = 0.0;
          for (std::size_t i = 0; i < fl.dim; ++i) {
            dot += x[i] * best.estimate.x[i];
            a += x[i] * x[i];
            b += best.estimate.x[i] * best.estimate.x[i];
          }
          double cosine = a > 0 && b > 0 ? dot / std::sqrt(a * b) : 0.0;
          bool label_ok = m.kind == models::ModelKind::kLinearRegression ||
                          static_cast<int>(best.estimate.target) == data.train[k].labels[0];
          rate = (cosine >= 0.99 && label_ok) ? 1.0 : 0.0;
          row["feature_cosine"] = report::num(cosine);
        }
        row["success_rate"] = report::num(rate);
        j["rounds"].push_back(row);
        t.rows.push_back({std::to_string(r.round), std::to_string(k), std::to_string(fl.data.samples_per_client),
                          report::csv_num(rate), "NA", "NA"});
      }
      prev = r.global_model;
    }
  }
  auto files = emit(o, "attack", j, t);
  write_manifest(o, "attack", sf, files, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return j;
}

json cmd_verify_nfl(const Options& o) {
  auto t0 = std::chrono::steady_clock::now();
  auto sf = load(o);
  std::size_t reps = replicates_of(o, sf.analysis.replicates);
  auto grid = build_grid(o, sf.fl.mechanism, {});
  for (const auto& c : grid) require_grid_mechanism(c, o.sweeps.empty() ? "mechanism" : "sweep");
  auto scen = two_atom::make_scenario(sf.analysis.two_atom);
  const std::size_t draws = std::max<std::size_t>(sf.analysis.draws_per_replicate, 1);

  json j = header("verify_nfl", sf);
  j["replicates"] = reps;
  j["rows"] = json::array();
  report::Table t;
  t.header = {"label", "epsilon_p", "epsilon_u", "epsilon_u_sampled", "epsilon_u_se", "epsilon_e",
              "epsilon_e_sampled", "epsilon_e_se", "c1", "xi", "delta", "xi_cap", "gamma_cap", "c_d", "c_x",
              "privacy_efficiency", "privacy_utility", "full_nfl", "margin_full_nfl"};
  bool flagged = false;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    Vec p_prot = scen.protect(grid[g]);
    auto rep = bounds::evaluate(scen.enumerable(p_prot));
    // Seeded sampling estimates of the expectations, paired draws per replicate.
    std::discrete_distribution<std::size_t> from_prot(p_prot.begin(), p_prot.end());
    std::discrete_distribution<std::size_t> from_orig(scen.p_orig.begin(), scen.p_orig.end());
    Vec eu(reps), ee(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      Rng rng(derive_seed(sf.fl.master_seed, {kSampleTag, g, r}));
      double su = 0.0, se = 0.0;
      for (std::size_t d = 0; d < draws; ++d) {
        std::size_t a = from_orig(rng), b = from_prot(rng);
        su += scen.utility[a] - scen.utility[b];
        se += scen.cost[b] - scen.cost[a];
      }
      eu[r] = su / static_cast<double>(draws);
      ee[r] = se / static_cast<double>(draws);
    }
    auto mean_se = [&](const Vec& v) {
      double m = 0.0, s = 0.0;
      for (double x : v) m += x / static_cast<double>(v.size());
      for (double x : v) s += (x - m) * (x - m);
      return std::pair<double, double>{m, std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
    };
    auto [mu, su] = mean_se(eu);
    auto [me, se] = mean_se(ee);
    const auto& ch = rep.checks;
    for (const auto* b : {&ch.privacy_efficiency, &ch.privacy_utility, &ch.full_nfl})
      flagged |= b->status == bounds::CheckStatus::kViolated;
    json row{{"mechanism", scenario_io::mechanism_to_json(grid[g])},
             {"label", scenario_io::mechanism_label(grid[g])},
             {"epsilon_p", {{"value", report::num(rep.epsilon_p)}, {"std_error", 0.0}}},
             {"epsilon_u", {{"value", report::num(rep.epsilon_u)}, {"sampled", report::num(mu)}, {"std_error", report::num(su)}}},
             {"epsilon_e", {{"value", report::num(rep.epsilon_e)}, {"sampled", report::num(me)}, {"std_error", report::num(se)}}},
             {"tv", report::num(rep.tv_per_client.front())},
             {"tv_fed", report::num(rep.tv_fed)},
             {"constants", report::constants_json(rep.constants)},
             {"delta_reason", rep.delta_reason},
             {"xi_gamma_reason", rep.xi_gamma_reason},
             {"checks", report::checks_json(ch)}};
    j["rows"].push_back(row);
    const auto& c = rep.constants;
    t.rows.push_back({scenario_io::mechanism_label(grid[g]), report::csv_num(rep.epsilon_p), report::csv_num(rep.epsilon_u),
                      report::csv_num(mu), report::csv_num(su), report::csv_num(rep.epsilon_e), report::csv_num(me),
                      report::csv_num(se), report::csv_num(c.c1), report::csv_num(c.xi), report::csv_num(c.delta),
                      report::csv_num(c.xi_cap), report::csv_num(c.gamma_cap), report::csv_num(c.c_d),
                      report::csv_num(c.c_x), bounds::check_status_name(ch.privacy_efficiency.status),
                      bounds::check_status_name(ch.privacy_utility.status), bounds::check_status_name(ch.full_nfl.status),
                      report::csv_num(ch.full_nfl.margin)});
  }
  j["flagged"] = flagged;
  auto files = emit(o, "verify_nfl", j, t);
  write_manifest(o, "verify-nfl", sf, files, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return j;
}

json cmd_optimize(const Options& o) {
  auto t0 = std::chrono::steady_clock::now();
  auto sf = load(o);
  auto grid = build_grid(o, sf.fl.mechanism, {"randomization:sigma=0.1:2.0:20"});
  for (const auto& c : grid) require_grid_mechanism(c, "sweep");
  auto scen = two_atom::make_scenario(sf.analysis.two_atom);
  auto oc = sf.analysis.optimize;
  double eta_u = o.eta_u.value_or(oc.eta_u), eta_e = o.eta_e.value_or(oc.eta_e), chi = o.chi.value_or(oc.chi);
  std::optional<double> phi = o.phi ? o.phi : oc.phi;
  auto res = bounds::protector_optimize(
      grid, [&](const mechanisms::MechanismConfig& c) { return scen.metrics(c); }, eta_u, eta_e, chi, phi);
  json j = header("optimize", sf);
  j["eta_u"] = report::num(eta_u);
  j["eta_e"] = report::num(eta_e);
  j["chi"] = report::num(chi);
  j["phi"] = report::num(phi);
  j["best_index"] = res.best;
  j["best"] = {{"mechanism", scenario_io::mechanism_to_json(res.config)},
               {"label", scenario_io::mechanism_label(res.config)},
               {"objective", report::num(res.objective)}};
  j["rows"] = json::array();
  report::Table t;
  t.header = {"index", "label", "epsilon_p", "epsilon_u", "epsilon_e", "objective", "feasible"};
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& r = res.rows[i];
    j["rows"].push_back({{"label", scenario_io::mechanism_label(grid[i])},
                         {"epsilon_p", report::num(r.metrics.epsilon_p)},
                         {"epsilon_u", report::num(r.metrics.epsilon_u)},
                         {"epsilon_e", report::num(r.metrics.epsilon_e)},
                         {"objective", report::num(r.objective)},
                         {"feasible", r.feasible}});
    t.rows.push_back({std::to_string(i), scenario_io::mechanism_label(grid[i]), report::csv_num(r.metrics.epsilon_p),
                      report::csv_num(r.metrics.epsilon_u), report::csv_num(r.metrics.epsilon_e),
                      report::csv_num(r.objective), r.feasible ? "true" : "false"});
  }
  auto files = emit(o, "optimize", j, t);
  write_manifest(o, "optimize", sf, files, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return j;
}

int dispatch(const std::string& command, const Options& opts) {
  try {
    json j;
    if (command == "simulate") j = cmd_simulate(opts);
    else if (command == "bounds") j = cmd_bounds(opts);
    else if (command == "attack") j = cmd_attack(opts);
    else if (command == "verify-nfl") j = cmd_verify_nfl(opts);
    else if (command == "optimize") j = cmd_optimize(opts);
    else throw ConfigError("command", "unknown command '" + command + "'");
    if (j.contains("flagged") && j["flagged"].get<bool>())
      std::cerr << "warning: at least one inequality is violated; see the report\n";
    std::cout << "wrote " << command << " outputs to " << opts.out << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Privacy, utility and efficiency trade-off toolkit for federated learning"};
  app.set_version_flag("--version", NFLFED_VERSION);
  app.require_subcommand(1);
  Options opts;
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  std::string attack;
  double eta_u = 0, eta_e = 0, chi = 0, phi = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--scenario", opts.scenario, "Scenario JSON file")->required();
    sub->add_option("--out", opts.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Master seed override");
    sub->add_option("--format", opts.format, "json, csv or both")->capture_default_str();
  };
  auto* sim = app.add_subcommand("simulate", "Run the federation and write the round trace");
  common(sim);
  sim->add_option("--replicates", reps, "Also measure utility loss and efficiency reduction over N replicates");
  auto* bnd = app.add_subcommand("bounds", "Closed-form mechanism bounds over a parameter sweep");
  common(bnd);
  bnd->add_option("--sweep", opts.sweeps, "kind[:param=start:stop:count], repeatable");
  auto* atk = app.add_subcommand("attack", "Run an inference attack on a simulated trace");
  common(atk);
  atk->add_option("--attack", attack, "direct_label, norm_scoring or dlg");
  auto* ver = app.add_subcommand("verify-nfl", "Check the trade-off inequalities on the enumerable scenario");
  common(ver);
  ver->add_option("--replicates", reps, "Sampling replicates for standard errors");
  ver->add_option("--sweep", opts.sweeps, "kind[:param=start:stop:count], repeatable");
  auto* opt = app.add_subcommand("optimize", "Pick the cheapest mechanism meeting the privacy cap");
  common(opt);
  opt->add_option("--sweep", opts.sweeps, "kind[:param=start:stop:count], repeatable");
  opt->add_option("--eta-u", eta_u, "Utility-loss weight");
  opt->add_option("--eta-e", eta_e, "Efficiency-reduction weight");
  opt->add_option("--chi", chi, "Privacy leakage cap");
  opt->add_option("--phi", phi, "Efficiency reduction cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->get_option_no_throw("--replicates") && sub->count("--replicates")) opts.replicates = reps;
  if (sub->get_option_no_throw("--attack") && sub->count("--attack")) opts.attack = attack;
  if (sub == opt) {
    if (opt->count("--eta-u")) opts.eta_u = eta_u;
    if (opt->count("--eta-e")) opts.eta_e = eta_e;
    if (opt->count("--chi")) opts.chi = chi;
    if (opt->count("--phi")) opts.phi = phi;
  }
  return dispatch(sub->get_name(), opts);
}

}  // namespace cli
}  // namespace nflfed
