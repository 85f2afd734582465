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

#ifndef NFLFED_SCENARIO_IO_HPP_
#define NFLFED_SCENARIO_IO_HPP_

#include <json.hpp>

#include <optional>
#include <string>

#include "nflfed/attacks.hpp"
#include "nflfed/fedsim.hpp"
#include "nflfed/two_atom.hpp"

namespace nflfed {
namespace scenario_io {

// Raised for malformed scenario files; the message starts with the field path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(ErrorCode::kInvalidConfig, field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct AttackConfig {
  std::string kind = "direct_label";  // direct_label | norm_scoring | dlg
  std::size_t calibration_samples = 20;
  attacks::DlgOptions dlg;
};

struct BoundConstants {
  double c1 = 0.0;
  double xi = 0.0;
  std::optional<double> delta;
  std::optional<double> xi_gamma;
  double gamma_ratio = 1.0;
  std::size_t dims = 1;
  Vec sigma0;
};

struct OptimizeConfig {
  double eta_u = 1.0;
  double eta_e = 1.0;
  double chi = 0.3;
  std::optional<double> phi;
};

struct AnalysisConfig {
  two_atom::Params two_atom;
  std::optional<BoundConstants> constants;
  OptimizeConfig optimize;
  std::size_t replicates = 20;
  std::size_t draws_per_replicate = 1000;
};

struct ScenarioFile {
  std::string name;
  fedsim::FLScenario fl;
  AttackConfig attack;
  AnalysisConfig analysis;
  nlohmann::json canonical;  // as parsed, keys sorted
  std::string config_hash;   // 16 hex digits, FNV-1a of the canonical dump
};

mechanisms::MechanismConfig parse_mechanism(const nlohmann::json& j, const std::string& field = "mechanism");
nlohmann::json mechanism_to_json(const mechanisms::MechanismConfig& cfg);
// Short human-readable form such as "randomization(sigma=0.5)".
std::string mechanism_label(const mechanisms::MechanismConfig& cfg);

ScenarioFile parse_scenario(const nlohmann::json& j);
ScenarioFile load_scenario(const std::string& path);

std::string hex64(std::uint64_t v);

}  // namespace scenario_io
}  // namespace nflfed

#endif  // NFLFED_SCENARIO_IO_HPP_
