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

#include <cmath>

#include "nflfed/fedsim.hpp"

using namespace nflfed;
using namespace nflfed::fedsim;

namespace {
template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidSpec;
}

FLScenario hfl(mechanisms::MechanismConfig mech, std::size_t clients = 3) {
  FLScenario s;
  s.clients = clients;
  s.dim = 5;
  s.rounds = 3;
  s.local_steps = 2;
  s.master_seed = 11;
  s.mechanism = std::move(mech);
  return s;
}

mechanisms::PaillierConfig small_paillier() {
  mechanisms::PaillierConfig p;
  p.prime_bits = 128;
  return p;
}

mechanisms::SecretSharing shares() {
  mechanisms::SecretSharing s;
  s.b = {2.0};
  s.r = {2.0};
  s.num_shares = 3;
  return s;
}
}  // namespace

TEST_CASE("varint round trip") {
  for (std::uint64_t v : {0ull, 1ull, 127ull, 128ull, 300ull, 1ull << 40, ~0ull}) {
    std::vector<std::uint8_t> b;
    put_varint(b, v);
    std::size_t pos = 0;
    CHECK(get_varint(b, pos) == v);
    CHECK(pos == b.size());
  }
  std::vector<std::uint8_t> truncated{0x80};
  std::size_t pos = 0;
  CHECK_THROWS(get_varint(truncated, pos));
}

TEST_CASE("same seed gives the same trace") {
  auto s = hfl(mechanisms::Randomization{0.1});
  auto a = run(s), b = run(s);
  REQUIRE(a.rounds.size() == b.rounds.size());
  for (std::size_t r = 0; r < a.rounds.size(); ++r) {
    CHECK(a.rounds[r].global_model == b.rounds[r].global_model);
    REQUIRE(a.rounds[r].messages.size() == b.rounds[r].messages.size());
    for (std::size_t i = 0; i < a.rounds[r].messages.size(); ++i)
      CHECK(a.rounds[r].messages[i].digest == b.rounds[r].messages[i].digest);
  }
  s.replicate = 1;
  CHECK(run(s).rounds[0].global_model != a.rounds[0].global_model);
}

TEST_CASE("single identity client matches plain gradient descent") {
  auto s = hfl(mechanisms::Identity{}, 1);
  auto data = synth_data(s);
  auto model = models::ToyModel::linear_regression(Vec(s.dim, 0.0));
  for (std::size_t r = 0; r < s.rounds * s.local_steps; ++r) {
    Vec g = model.mean_gradient(data.train[0]);
    for (std::size_t i = 0; i < s.dim; ++i) model.theta[i] -= s.lr * g[i];
  }
  auto t = run(s);
  CHECK(t.rounds.back().global_model == model.theta);
  CHECK(t.final_utility[0] == -model.mean_loss(data.holdout[0]));
}

TEST_CASE("identity aggregate is the element-wise mean") {
  auto t = run(hfl(mechanisms::Identity{}, 4));
  for (const auto& rr : t.rounds)
    for (std::size_t i = 0; i < rr.global_model.size(); ++i) {
      double mean = 0.0;
      for (const auto& c : rr.clients) mean += c.original[i];
      CHECK(rr.global_model[i] == doctest::Approx(mean / 4.0).epsilon(1e-14));
    }
}

TEST_CASE("lossless mechanisms keep utility exactly") {
  for (mechanisms::MechanismConfig m : {mechanisms::MechanismConfig(shares()), mechanisms::MechanismConfig(small_paillier())}) {
    auto s = hfl(m, 4);
    auto prot = run_replicates(s, 3);
    auto base = run_replicates(unprotected_counterpart(s), 3);
    auto loss = measure_utility_loss(prot, base);
    CHECK(loss.system == 0.0);
    for (double v : loss.per_client) CHECK(v == 0.0);
    // Fixed-point aggregate stays within one quantum per client of the float mean.
    for (const auto& rr : prot[0].rounds)
      for (std::size_t i = 0; i < rr.global_model.size(); ++i)
        CHECK(std::fabs(rr.global_model[i] - rr.plaintext_aggregate[i]) <= 4.0 * std::ldexp(1.0, -16));
  }
}

TEST_CASE("recorded bits equal transport bytes") {
  for (mechanisms::MechanismConfig m :
       {mechanisms::MechanismConfig(mechanisms::Identity{}), mechanisms::MechanismConfig(mechanisms::Compression{{0.4}}),
        mechanisms::MechanismConfig(shares()), mechanisms::MechanismConfig(small_paillier())}) {
    auto t = run(hfl(m));
    CHECK(t.recorded_bits == 8 * t.transport_bytes);
  }
}

TEST_CASE("paillier efficiency reduction follows the ciphertext width") {
  mechanisms::PaillierConfig p;
  auto s = hfl(p, 2);
  s.rounds = 1;
  auto prot = run_replicates(s, 2);
  auto base = run_replicates(unprotected_counterpart(s), 2);
  auto e = measure_efficiency_reduction(prot, base);
  const double m = static_cast<double>(s.dim);
  double width = static_cast<double>(prot[0].rounds[0].clients[0].upload_bits) / (8.0 * m);
  CHECK((width == 127.0 || width == 128.0));
  CHECK(e.system == doctest::Approx(m * (8.0 * width - 64.0)));
}

TEST_CASE("compression bits match the sparse wire size") {
  auto s = hfl(mechanisms::Compression{{0.5}}, 4);
  s.rounds = 10;
  auto prot = run_replicates(s, 20);
  auto base = run_replicates(unprotected_counterpart(s), 20);
  auto e = measure_efficiency_reduction(prot, base);
  // Dense float64: 64 bits per scalar. Sparse: one count byte plus 9 bytes per kept scalar.
  const double m = static_cast<double>(s.dim);
  double expected = 8.0 + 72.0 * 0.5 * m - 64.0 * m;
  CHECK(std::fabs(e.system - expected) <= 4.0 * e.std_error + 1e-9);
  auto full = hfl(mechanisms::Compression{{1.0}});
  auto ident = hfl(mechanisms::Identity{});
  CHECK(run(full).rounds.back().global_model == run(ident).rounds.back().global_model);
}

TEST_CASE("zero label skew gives balanced classes") {
  FLScenario s;
  s.model = models::ModelKind::kSoftmaxLinear;
  s.classes = 4;
  s.dim = 3;
  s.data.samples_per_client = 4000;
  auto d = synth_data(s).train[0];
  std::vector<double> counts(4, 0.0);
  for (int y : d.labels) counts[static_cast<std::size_t>(y)] += 1.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  CHECK(chi2 < 16.27);  // df 3, p = 0.001
  s.data.label_skew = 1.0;
  s.clients = 3;
  auto skewed = synth_data(s);
  for (int y : skewed.train[2].labels) CHECK(y == 2);
}

TEST_CASE("vertical split and join round trip") {
  FLScenario s;
  s.model = models::ModelKind::kSoftmaxLinear;
  s.dim = 5;
  auto d = synth_data(s).train[0];
  auto v = split_features(d, 2);
  CHECK(v.feature_side.dim == 2);
  CHECK(v.label_side.dim == 3);
  auto j = join_features(v);
  CHECK(j.features == d.features);
  CHECK(j.labels == d.labels);
  CHECK(code_of([&] { split_features(d, 5); }) == ErrorCode::kInvalidSpec);
}

TEST_CASE("vertical runs and rejects encryption mechanisms") {
  FLScenario s;
  s.topology = Topology::kVertical;
  s.clients = 2;
  s.model = models::ModelKind::kSoftmaxLinear;
  s.classes = 3;
  s.dim = 6;
  s.rounds = 2;
  auto t = run(s);
  CHECK(t.rounds.size() == 2);
  CHECK(t.labels.size() == s.data.samples_per_client);
  CHECK(t.rounds[0].grad_original.size() == s.data.samples_per_client);
  s.vfl_variant = VflVariant::kSplit;
  CHECK(run(s).rounds.size() == 2);
  s.mechanism = small_paillier();
  CHECK(code_of([&] { run(s); }) == ErrorCode::kMechanismIncompatible);
  s.mechanism = shares();
  CHECK(code_of([&] { run(s); }) == ErrorCode::kMechanismIncompatible);
}

TEST_CASE("measurement needs two replicates") {
  auto s = hfl(mechanisms::Identity{});
  auto one = run_replicates(s, 1);
  CHECK(code_of([&] { measure_utility_loss(one, one); }) == ErrorCode::kReplicateCountTooSmall);
}
