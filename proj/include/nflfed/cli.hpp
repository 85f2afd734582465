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

#ifndef NFLFED_CLI_HPP_
#define NFLFED_CLI_HPP_

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nflfed/mechanisms.hpp"
#include "nflfed/scenario_io.hpp"

namespace nflfed {
namespace cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct Options {
  std::string scenario;
  std::string out = "nflfed_out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::string format = "both";  // json | csv | both
  std::vector<std::string> sweeps;
  std::optional<std::string> attack;
  std::optional<double> eta_u, eta_e, chi, phi;
};

// "kind", "kind:param=value" or "kind:param=start:stop:count".
std::vector<mechanisms::MechanismConfig> expand_sweep(const std::string& spec,
                                                      const mechanisms::MechanismConfig& base);

// Each command returns the main report; files go to opts.out.
nlohmann::json cmd_simulate(const Options& opts);
nlohmann::json cmd_bounds(const Options& opts);
nlohmann::json cmd_attack(const Options& opts);
nlohmann::json cmd_verify_nfl(const Options& opts);
nlohmann::json cmd_optimize(const Options& opts);

// Runs one command and maps failures to exit codes, printing the message.
int dispatch(const std::string& command, const Options& opts);
int main_entry(int argc, char** argv);

}  // namespace cli
}  // namespace nflfed

#endif  // NFLFED_CLI_HPP_
