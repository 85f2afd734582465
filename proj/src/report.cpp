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

#include "nflfed/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "nflfed/scenario_io.hpp"

namespace nflfed {
namespace report {

using nlohmann::json;

namespace {
std::string sig12(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}
}  // namespace

json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  double r = 0.0;
  std::string s = sig12(x);
  std::from_chars(s.data(), s.data() + s.size(), r);
  return r == 0.0 ? 0.0 : r;  // no negative zero in reports
}

json num(const std::optional<double>& x) { return x ? num(*x) : json(nullptr); }

json nums(const Vec& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::string csv_num(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return sig12(x == 0.0 ? 0.0 : x);
}

std::string csv_num(const std::optional<double>& x) { return x ? csv_num(*x) : "NA"; }

std::string Table::to_csv() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      bool quote = cells[i].find_first_of(",\"\n") != std::string::npos;
      if (!quote) {
        out += cells[i];
        continue;
      }
      out += '"';
      for (char c : cells[i]) {
        if (c == '"') out += '"';
        out += c;
      }
      out += '"';
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

json trace_json(const fedsim::RoundTrace& t, const json& scenario) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "trace";
  j["scenario"] = scenario;
  j["topology"] = t.scenario.topology == fedsim::Topology::kHorizontal ? "hfl" : "vfl";
  j["mechanism"] = scenario_io::mechanism_to_json(t.scenario.mechanism);
  j["replicate"] = t.scenario.replicate;
  json rounds = json::array();
  for (const auto& r : t.rounds) {
    json jr;
    jr["round"] = r.round;
    jr["global_model"] = nums(r.global_model);
    jr["plaintext_aggregate"] = nums(r.plaintext_aggregate);
    json clients = json::array();
    for (std::size_t k = 0; k < r.clients.size(); ++k) {
      const auto& c = r.clients[k];
      json jc;
      jc["client"] = k;
      jc["original"] = nums(c.original);
      jc["protected"] = nums(c.protected_);
      jc["upload_bits"] = c.upload_bits;
      jc["train_loss"] = num(c.train_loss);
      jc["utility"] = num(c.utility);
      clients.push_back(jc);
    }
    jr["clients"] = clients;
    json msgs = json::array();
    for (const auto& m : r.messages)
      msgs.push_back({{"from", m.from}, {"to", m.to}, {"kind", m.kind}, {"bytes", m.bytes},
                      {"bits", m.bits}, {"digest", scenario_io::hex64(m.digest)}});
    jr["messages"] = msgs;
    rounds.push_back(jr);
  }
  j["rounds"] = rounds;
  j["final_utility"] = nums(t.final_utility);
  j["transport_bytes"] = t.transport_bytes;
  j["recorded_bits"] = t.recorded_bits;
  return j;
}

Table trace_table(const fedsim::RoundTrace& t) {
  Table tab;
  tab.header = {"round", "client", "upload_bits", "train_loss", "utility"};
  for (const auto& r : t.rounds)
    for (std::size_t k = 0; k < r.clients.size(); ++k)
      tab.rows.push_back({std::to_string(r.round), std::to_string(k), std::to_string(r.clients[k].upload_bits),
                          csv_num(r.clients[k].train_loss), csv_num(r.clients[k].utility)});
  return tab;
}

json constants_json(const bounds::NflConstants& c) {
  return {{"xi", num(c.xi)},           {"c1", num(c.c1)},
          {"c2", num(c.c2)},           {"delta", num(c.delta)},
          {"xi_cap", num(c.xi_cap)},   {"gamma_cap", num(c.gamma_cap)},
          {"gamma_ratio", num(c.gamma_ratio)}, {"c_d", num(c.c_d)},
          {"c_x", num(c.c_x)}};
}

json checks_json(const bounds::NflChecks& c) {
  json a = json::array();
  for (const auto* b : {&c.privacy_efficiency, &c.privacy_utility, &c.full_nfl})
    a.push_back({{"name", b->name},
                 {"status", bounds::check_status_name(b->status)},
                 {"lhs", num(b->lhs)},
                 {"rhs", num(b->rhs)},
                 {"margin", num(b->margin)}});
  return a;
}

json estimate_json(const fedsim::Estimate& e) {
  return {{"per_client", nums(e.per_client)}, {"system", num(e.system)}, {"std_error", num(e.std_error)}};
}

std::string write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidConfig, "out: cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kInvalidConfig, "out: failed writing '" + path + "'");
  return path;
}

std::string write_json(const std::string& path, const json& j) { return write_text(path, j.dump(2) + "\n"); }

}  // namespace report
}  // namespace nflfed
