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

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {
struct Run {
  int code = -1;
  std::string err;
};

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("nflfed_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run cli(const std::string& args, const fs::path& dir) {
  fs::path err = dir / "stderr.txt";
  std::string cmd = std::string("\"") + NFLFED_CLI_PATH + "\" " + args + " 2>\"" + err.string() + "\" >/dev/null";
  int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

std::string example(const std::string& name) { return std::string(NFLFED_SOURCE_DIR) + "/scenarios/" + name; }

json example_json(const std::string& name) { return json::parse(slurp(example(name))); }

fs::path write_scenario(const fs::path& dir, const json& j) {
  fs::path p = dir / "scenario.json";
  std::ofstream(p) << j.dump(2);
  return p;
}
}  // namespace

TEST_CASE("missing mechanism is a config error naming the field") {
  auto dir = scratch("missing");
  json j = example_json("example_hfl.json");
  j.erase("mechanism");
  auto r = cli("simulate --scenario " + write_scenario(dir, j).string() + " --out " + (dir / "out").string(), dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("mechanism") != std::string::npos);
}

TEST_CASE("unknown fields and attacks are rejected") {
  auto dir = scratch("unknown");
  json j = example_json("example_hfl.json");
  j["mystery"] = 1;
  CHECK(cli("simulate --scenario " + write_scenario(dir, j).string() + " --out " + (dir / "o").string(), dir).code == 2);
  auto r = cli("attack --scenario " + example("example_hfl.json") + " --attack telepathy --out " + (dir / "o").string(), dir);
  CHECK(r.code == 2);
  CHECK(cli("frobnicate", dir).code == 2);
}

TEST_CASE("simulate is byte-reproducible") {
  auto dir = scratch("repro");
  for (const char* sub : {"a", "b"})
    REQUIRE(cli("simulate --scenario " + example("example_hfl.json") + " --out " + (dir / sub).string(), dir).code == 0);
  std::string a = slurp(dir / "a" / "trace.json");
  CHECK(!a.empty());
  CHECK(a == slurp(dir / "b" / "trace.json"));
  CHECK(slurp(dir / "a" / "trace.csv") == slurp(dir / "b" / "trace.csv"));
  auto manifest = json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest["command"] == "simulate");
}

TEST_CASE("bounds over a compression sweep") {
  auto dir = scratch("bounds");
  auto r = cli("bounds --scenario " + example("example_hfl.json") + " --sweep compression:rho=0.1:1.0:10 --out " +
                   dir.string(),
               dir);
  REQUIRE(r.code == 0);
  auto j = json::parse(slurp(dir / "bounds.json"));
  REQUIRE(j["rows"].size() == 10);
  double prev = -1.0;
  for (const auto& row : j["rows"]) {
    double p = row["privacy"]["raw"].get<double>();
    CHECK(p >= prev);
    prev = p;
  }
  auto ss = cli("bounds --scenario " + example("example_hfl.json") + " --sweep secret_sharing --out " + dir.string(), dir);
  REQUIRE(ss.code == 0);
  auto k = json::parse(slurp(dir / "bounds.json"));
  CHECK(k["rows"][0]["efficiency"] == "NA");
  CHECK(slurp(dir / "bounds.csv").find("NA") != std::string::npos);
}

TEST_CASE("verify-nfl and optimize on the reference scenario") {
  auto dir = scratch("verify");
  auto r = cli("verify-nfl --scenario " + example("example_hfl.json") + " --sweep randomization:sigma=0.5:1.5:3 --replicates 3 --out " +
                   dir.string(),
               dir);
  REQUIRE(r.code == 0);
  auto j = json::parse(slurp(dir / "verify_nfl.json"));
  CHECK(j["rows"].size() == 3);
  CHECK(j["flagged"] == false);
  auto o = cli("optimize --scenario " + example("example_hfl.json") + " --out " + dir.string(), dir);
  REQUIRE(o.code == 0);
  auto oj = json::parse(slurp(dir / "optimize.json"));
  CHECK(oj["rows"].size() == 20);
  auto bad = cli("optimize --scenario " + example("example_hfl.json") + " --chi 0 --out " + dir.string(), dir);
  CHECK(bad.code == 3);
}

TEST_CASE("seed flag fixes the numbers") {
  auto dir = scratch("seed");
  std::string base = "simulate --scenario " + example("example_hfl.json") + " --format json --out ";
  for (const char* sub : {"a", "b"}) REQUIRE(cli(base + (dir / sub).string() + " --seed 99", dir).code == 0);
  REQUIRE(cli(base + (dir / "c").string() + " --seed 100", dir).code == 0);
  auto a = json::parse(slurp(dir / "a" / "trace.json"));
  auto c = json::parse(slurp(dir / "c" / "trace.json"));
  CHECK(slurp(dir / "a" / "trace.json") == slurp(dir / "b" / "trace.json"));
  CHECK(a["final_utility"] != c["final_utility"]);
}
