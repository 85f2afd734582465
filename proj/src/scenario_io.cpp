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

#include "nflfed/scenario_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "nflfed/fedsim.hpp"

namespace nflfed {
namespace scenario_io {

using nlohmann::json;

namespace {

std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

// Typed access to one JSON object; rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "scenario" : path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& raw(const std::string& key) {
    if (!has(key)) throw ConfigError(join(path_, key), "missing required field");
    return j_.at(key);
  }
  std::string field(const std::string& key) const { return join(path_, key); }

  double number(const std::string& key, std::optional<double> dflt = std::nullopt) {
    if (!has(key)) {
      if (dflt) return *dflt;
      throw ConfigError(field(key), "missing required field");
    }
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    return v.get<double>();
  }
  std::optional<double> maybe_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key);
  }
  std::uint64_t count(const std::string& key, std::optional<std::uint64_t> dflt = std::nullopt) {
    if (!has(key)) {
      if (dflt) return *dflt;
      throw ConfigError(field(key), "missing required field");
    }
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
      throw ConfigError(field(key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  std::string text(const std::string& key, std::optional<std::string> dflt = std::nullopt) {
    if (!has(key)) {
      if (dflt) return *dflt;
      throw ConfigError(field(key), "missing required field");
    }
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }
  // A number broadcasts to a one-element vector.
  Vec vec(const std::string& key, std::optional<Vec> dflt = std::nullopt) {
    if (!has(key)) {
      if (dflt) return *dflt;
      throw ConfigError(field(key), "missing required field");
    }
    const json& v = j_.at(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array() || v.empty()) throw ConfigError(field(key), "expected a number or a nonempty array");
    Vec out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(field(key), "array entries must be numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto wrap(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(field, e.what());
  }
}

}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

mechanisms::MechanismConfig parse_mechanism(const json& j, const std::string& path) {
  Fields f(j, path);
  std::string kind = f.text("kind");
  mechanisms::MechanismConfig cfg;
  if (kind == "identity") {
    cfg = mechanisms::Identity{};
  } else if (kind == "randomization") {
    cfg = mechanisms::Randomization{f.number("sigma")};
  } else if (kind == "paillier") {
    mechanisms::PaillierConfig p;
    p.p = f.text("p", "");
    p.q = f.text("q", "");
    p.g = f.text("g", "");
    p.prime_bits = static_cast<unsigned>(f.count("prime_bits", 256));
    p.delta = f.number("delta", 0.5);
    p.scale_bits = static_cast<int>(f.count("scale_bits", 16));
    if (p.p.empty() != p.q.empty()) throw ConfigError(f.field(p.p.empty() ? "p" : "q"), "p and q must be given together");
    cfg = p;
  } else if (kind == "secret_sharing") {
    mechanisms::SecretSharing s;
    s.num_shares = static_cast<int>(f.count("num_shares", 2));
    s.b = f.vec("b");
    s.r = f.vec("r");
    s.delta = f.number("delta", 0.5);
    s.scale_bits = static_cast<int>(f.count("scale_bits", 16));
    cfg = s;
  } else if (kind == "compression") {
    cfg = mechanisms::Compression{f.vec("rho")};
  } else {
    throw ConfigError(f.field("kind"), "unknown mechanism '" + kind + "'");
  }
  f.finish();
  wrap(path, [&] {
    mechanisms::validate(cfg);
    return 0;
  });
  return cfg;
}

json mechanism_to_json(const mechanisms::MechanismConfig& cfg) {
  json j;
  j["kind"] = mechanisms::mechanism_name(cfg);
  if (auto* r = std::get_if<mechanisms::Randomization>(&cfg)) {
    j["sigma"] = r->sigma;
  } else if (auto* p = std::get_if<mechanisms::PaillierConfig>(&cfg)) {
    if (!p->p.empty()) {
      j["p"] = p->p;
      j["q"] = p->q;
    }
    if (!p->g.empty()) j["g"] = p->g;
    j["prime_bits"] = p->prime_bits;
    j["delta"] = p->delta;
    j["scale_bits"] = p->scale_bits;
  } else if (auto* s = std::get_if<mechanisms::SecretSharing>(&cfg)) {
    j["num_shares"] = s->num_shares;
    j["b"] = s->b;
    j["r"] = s->r;
    j["delta"] = s->delta;
    j["scale_bits"] = s->scale_bits;
  } else if (auto* c = std::get_if<mechanisms::Compression>(&cfg)) {
    j["rho"] = c->rho;
  }
  return j;
}

std::string mechanism_label(const mechanisms::MechanismConfig& cfg) {
  json j = mechanism_to_json(cfg);
  std::string out = j["kind"].get<std::string>();
  std::string args;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "kind") continue;
    if (!args.empty()) args += ",";
    std::string v = it.value().dump();
    if (it.value().is_string()) v = it.value().get<std::string>();
    args += it.key() + "=" + v;
  }
  return args.empty() ? out : out + "(" + args + ")";
}

ScenarioFile parse_scenario(const json& j) {
  ScenarioFile sf;
  Fields top(j, "");
  std::string version = top.text("schema_version", "1");
  if (version != "1") throw ConfigError("schema_version", "unsupported version '" + version + "'");
  sf.name = top.text("name", "scenario");
  auto& fl = sf.fl;

  std::string topo = top.text("topology");
  if (topo == "hfl") fl.topology = fedsim::Topology::kHorizontal;
  else if (topo == "vfl") fl.topology = fedsim::Topology::kVertical;
  else throw ConfigError("topology", "expected 'hfl' or 'vfl'");
  fl.clients = top.count("clients", fl.topology == fedsim::Topology::kVertical ? 2 : 1);

  {
    Fields m(top.raw("model"), "model");
    std::string kind = m.text("kind");
    if (kind == "linear_regression") fl.model = models::ModelKind::kLinearRegression;
    else if (kind == "softmax_linear") fl.model = models::ModelKind::kSoftmaxLinear;
    else throw ConfigError("model.kind", "expected 'linear_regression' or 'softmax_linear'");
    fl.dim = m.count("dim");
    fl.classes = m.count("classes", 2);
    m.finish();
  }
  if (top.has("data")) {
    Fields d(top.raw("data"), "data");
    fl.data.samples_per_client = d.count("samples_per_client", fl.data.samples_per_client);
    fl.data.holdout_per_client = d.count("holdout_per_client", fl.data.holdout_per_client);
    fl.data.noise = d.number("noise", fl.data.noise);
    fl.data.label_skew = d.number("label_skew", fl.data.label_skew);
    fl.data.positive_rate = d.number("positive_rate", -1.0);
    fl.data.feature_split = d.count("feature_split", 0);
    fl.data.seed = d.count("seed", 0);
    d.finish();
  }
  fl.mechanism = parse_mechanism(top.raw("mechanism"), "mechanism");
  fl.rounds = top.count("rounds", 1);
  fl.local_steps = top.count("local_steps", 1);
  fl.lr = top.number("lr", 0.1);
  fl.master_seed = top.count("master_seed", 0);
  if (top.has("codec")) {
    Fields c(top.raw("codec"), "codec");
    std::string kind = c.text("kind", "float64");
    if (kind == "float64") fl.codec = fedsim::Codec::kFloat64;
    else if (kind == "fixed") fl.codec = fedsim::Codec::kFixed;
    else throw ConfigError("codec.kind", "expected 'float64' or 'fixed'");
    fl.codec_scale_bits = static_cast<int>(c.count("scale_bits", 16));
    c.finish();
  }
  std::string variant = top.text("vfl_variant", "plain");
  if (variant == "plain") fl.vfl_variant = fedsim::VflVariant::kPlain;
  else if (variant == "split") fl.vfl_variant = fedsim::VflVariant::kSplit;
  else throw ConfigError("vfl_variant", "expected 'plain' or 'split'");

  if (top.has("attack")) {
    Fields a(top.raw("attack"), "attack");
    sf.attack.kind = a.text("kind", sf.attack.kind);
    sf.attack.calibration_samples = a.count("calibration_samples", sf.attack.calibration_samples);
    sf.attack.dlg.steps = a.count("steps", sf.attack.dlg.steps);
    sf.attack.dlg.lr = a.number("lr", sf.attack.dlg.lr);
    a.finish();
  }
  if (sf.attack.kind != "direct_label" && sf.attack.kind != "norm_scoring" && sf.attack.kind != "dlg")
    throw ConfigError("attack.kind", "unknown attack '" + sf.attack.kind + "'");

  if (top.has("analysis")) {
    Fields a(top.raw("analysis"), "analysis");
    auto& an = sf.analysis;
    an.replicates = a.count("replicates", an.replicates);
    an.draws_per_replicate = a.count("draws_per_replicate", an.draws_per_replicate);
    if (a.has("two_atom")) {
      Fields t(a.raw("two_atom"), "analysis.two_atom");
      auto& p = an.two_atom;
      p.prior_first = t.number("prior_first", p.prior_first);
      p.center_second = t.number("center_second", p.center_second);
      p.kernel_width = t.number("kernel_width", p.kernel_width);
      p.half_range = t.number("half_range", p.half_range);
      p.step = t.number("step", p.step);
      t.finish();
      wrap("analysis.two_atom", [&] {
        two_atom::make_scenario(p);
        return 0;
      });
    }
    if (a.has("constants")) {
      Fields c(a.raw("constants"), "analysis.constants");
      BoundConstants bc;
      bc.c1 = c.number("c1");
      bc.xi = c.number("xi");
      bc.delta = c.maybe_number("delta");
      bc.xi_gamma = c.maybe_number("xi_gamma");
      bc.gamma_ratio = c.number("gamma_ratio", 1.0);
      bc.dims = c.count("dims", 1);
      bc.sigma0 = c.vec("sigma0", Vec{});
      c.finish();
      if (bc.xi < 0.0) throw ConfigError("analysis.constants.xi", "must be nonnegative");
      if (bc.dims == 0) throw ConfigError("analysis.constants.dims", "must be positive");
      if (bc.delta && !(*bc.delta > 0.0)) throw ConfigError("analysis.constants.delta", "must be positive");
      an.constants = bc;
    }
    if (a.has("optimize")) {
      Fields o(a.raw("optimize"), "analysis.optimize");
      an.optimize.eta_u = o.number("eta_u", an.optimize.eta_u);
      an.optimize.eta_e = o.number("eta_e", an.optimize.eta_e);
      an.optimize.chi = o.number("chi", an.optimize.chi);
      an.optimize.phi = o.maybe_number("phi");
      o.finish();
    }
    a.finish();
  }
  top.finish();
  wrap("scenario", [&] {
    fl.validate();
    return 0;
  });
  sf.canonical = j;
  std::string dump = j.dump();
  sf.config_hash = hex64(fedsim::fnv1a(reinterpret_cast<const std::uint8_t*>(dump.data()), dump.size()));
  return sf;
}

ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scenario", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw ConfigError("scenario", std::string("malformed JSON: ") + e.what());
  }
  return parse_scenario(j);
}

}  // namespace scenario_io
}  // namespace nflfed
