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

#ifndef NFLFED_REPORT_HPP_
#define NFLFED_REPORT_HPP_

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "nflfed/bounds.hpp"
#include "nflfed/fedsim.hpp"

namespace nflfed {
namespace report {

inline constexpr const char* kSchemaVersion = "1";

// Rounds to 12 significant digits; non-finite values become null.
nlohmann::json num(double x);
nlohmann::json num(const std::optional<double>& x);
nlohmann::json nums(const Vec& v);
// Locale-independent 12-significant-digit text; "NA" for missing values.
std::string csv_num(double x);
std::string csv_num(const std::optional<double>& x);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string to_csv() const;
};

nlohmann::json trace_json(const fedsim::RoundTrace& t, const nlohmann::json& scenario);
Table trace_table(const fedsim::RoundTrace& t);

nlohmann::json constants_json(const bounds::NflConstants& c);
nlohmann::json checks_json(const bounds::NflChecks& c);
nlohmann::json estimate_json(const fedsim::Estimate& e);

// Writes the text and returns the path.
std::string write_text(const std::string& path, const std::string& text);
std::string write_json(const std::string& path, const nlohmann::json& j);

}  // namespace report
}  // namespace nflfed

#endif  // NFLFED_REPORT_HPP_
