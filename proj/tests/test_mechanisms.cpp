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

#include "nflfed/mechanisms.hpp"
#include "nflfed/paillier.hpp"

using namespace nflfed;
using namespace nflfed::mechanisms;

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
}  // namespace

// Hand-checkable key: n = 35, g = 36, lambda = 12. Expected ciphertexts were
// computed with Python integers.
TEST_CASE("paillier on a tiny key") {
  auto kp = paillier_keygen(5, 7);
  CHECK(kp.pub.n == 35);
  CHECK(kp.pub.g == 36);
  CHECK(kp.lambda == 12);
  CHECK(kp.mu == 3);
  BigInt c1 = paillier_encrypt_with(kp.pub, 4, 3);
  CHECK(c1 == 1062);
  CHECK(paillier_decrypt(kp, c1) == 4);
  BigInt c2 = paillier_encrypt_with(kp.pub, 30, 2);
  BigInt sum = paillier_add(kp.pub, c1, c2);
  CHECK(sum == 916);
  CHECK(paillier_decrypt(kp, sum) == 34);
}

TEST_CASE("paillier rejects bad inputs") {
  CHECK(code_of([] { paillier_keygen(4, 7); }) == ErrorCode::kInvalidPrimes);
  CHECK(code_of([] { paillier_keygen(7, 7); }) == ErrorCode::kInvalidPrimes);
  CHECK(code_of([] { paillier_keygen(5, 7, BigInt(35)); }) == ErrorCode::kGeneratorOrderInvalid);
  auto kp = paillier_keygen(5, 7);
  CHECK(code_of([&] { paillier_encrypt(kp.pub, 35, 1); }) == ErrorCode::kPlaintextOutOfRange);
  CHECK(code_of([&] { paillier_encrypt(kp.pub, -1, 1); }) == ErrorCode::kPlaintextOutOfRange);
  CHECK(code_of([&] { paillier_decrypt(kp, 0); }) == ErrorCode::kCiphertextInvalid);
  CHECK(code_of([&] { fixed_point_encode(2.0, 4, kp.pub.n); }) == ErrorCode::kMagnitudeOverflow);
}

TEST_CASE("paillier homomorphism with generated keys") {
  auto kp = paillier_generate(64, 3);
  gmp_randclass rng(gmp_randinit_mt);
  rng.seed(17);
  for (int i = 0; i < 100; ++i) {
    BigInt a = rng.get_z_range(kp.pub.n), b = rng.get_z_range(kp.pub.n);
    BigInt ca = paillier_encrypt(kp.pub, a, 2 * i), cb = paillier_encrypt(kp.pub, b, 2 * i + 1);
    CHECK(paillier_decrypt(kp, ca) == a);
    BigInt want = (a + b) % kp.pub.n;
    CHECK(paillier_decrypt(kp, paillier_add(kp.pub, ca, cb)) == want);
  }
  // Same seed, same ciphertext.
  CHECK(paillier_encrypt(kp.pub, 5, 9) == paillier_encrypt(kp.pub, 5, 9));
  CHECK(paillier_encrypt(kp.pub, 5, 9) != paillier_encrypt(kp.pub, 5, 10));
  int distinct = 0;
  for (std::uint64_t t = 0; t < 1000; ++t)
    distinct += paillier_encrypt(kp.pub, 5, 2 * t) != paillier_encrypt(kp.pub, 5, 2 * t + 1) ? 1 : 0;
  CHECK(distinct >= 999);
}

TEST_CASE("fixed point and byte codecs") {
  auto kp = paillier_generate(32, 1);
  for (double x : {0.0, 1.25, -3.5, 1000.0 / 3.0, -1e-6}) {
    BigInt h = fixed_point_encode(x, 16, kp.pub.n);
    CHECK(std::fabs(fixed_point_decode(h, 16, kp.pub.n) - x) <= std::ldexp(1.0, -17));
    CHECK(fix64_decode(fix64_encode(x, 16), 16) == fixed_point_decode(h, 16, kp.pub.n));
  }
  BigInt v("123456789012345678901234567890");
  auto bytes = to_bytes(v, 20);
  CHECK(bytes.size() == 20);
  CHECK(from_bytes(bytes.data(), 20) == v);
  CHECK(code_of([&] { to_bytes(v, 4); }) == ErrorCode::kMagnitudeOverflow);
  CHECK(code_of([] { fix64_encode(1e30, 16); }) == ErrorCode::kMagnitudeOverflow);
  CHECK(kp.pub.ciphertext_bytes() == (mpz_sizeinbase(kp.pub.n_squared.get_mpz_t(), 2) + 7) / 8);
}

TEST_CASE("secret shares reconstruct exactly") {
  SecretSharing cfg;
  cfg.num_shares = 3;
  cfg.b = {4.0};
  cfg.r = {6.0};
  Vec w{0.5, -1.25, 3.0, 1.0 / 3.0};
  auto shared = secret_share(ModelInfo::plain(w), cfg, 21);
  const auto& sh = std::get<Shares>(shared.encoding);
  REQUIRE(sh.values.size() == 3);
  auto fixed = reconstruct_fixed(sh);
  for (std::size_t j = 0; j < w.size(); ++j) {
    CHECK(fixed[j] == fix64_encode(w[j], 16));
    for (int s = 0; s < 2; ++s) {
      double v = fix64_decode(sh.values[static_cast<std::size_t>(s)][j], 16);
      CHECK(v >= -4.0 - 1e-4);
      CHECK(v <= 6.0 + 1e-4);
    }
  }
  auto back = reconstruct(sh);
  for (std::size_t j = 0; j < w.size(); ++j) CHECK(std::fabs(back[j] - w[j]) <= std::ldexp(1.0, -17));
}

TEST_CASE("randomization and compression") {
  Vec w(20000, 1.0);
  CHECK(randomize(ModelInfo::plain(w), 0.0, 1).values == w);
  auto noisy = randomize(ModelInfo::plain(w), 2.0, 1);
  double m = 0.0, v = 0.0;
  for (double x : noisy.values) m += x / 20000.0;
  for (double x : noisy.values) v += (x - m) * (x - m) / 19999.0;
  CHECK(std::fabs(m - 1.0) < 4.0 * 2.0 / std::sqrt(20000.0));
  CHECK(v == doctest::Approx(4.0).epsilon(0.05));
  auto mask = draw_mask({0.3}, 20000, 4);
  double kept = 0.0;
  for (auto b : mask) kept += b;
  // binomial 4-sigma band
  CHECK(std::fabs(kept - 6000.0) < 4.0 * std::sqrt(20000.0 * 0.3 * 0.7));
  CHECK(compress(ModelInfo::plain(w), {1.0}, 3).values == w);
  Vec ramp(50);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i) + 0.5;
  auto once = apply_mask(ModelInfo::plain(ramp), draw_mask({0.5}, 50, 8));
  CHECK(apply_mask(once, draw_mask({0.5}, 50, 8)).values == once.values);
  CHECK(compress(ModelInfo::plain(ramp), {0.5}, 8).values == compress(ModelInfo::plain(ramp), {0.5}, 8).values);
  auto c = compress(ModelInfo::plain(w), {0.0}, 3);
  for (double x : c.values) CHECK(x == 0.0);
}

TEST_CASE("mechanism validation") {
  CHECK(code_of([] { validate(Compression{{1.5}}); }) == ErrorCode::kProbabilityOutOfRange);
  CHECK(code_of([] { validate(Randomization{-1.0}); }) == ErrorCode::kNonpositiveSigma);
  SecretSharing s;
  CHECK(code_of([&] { validate(s); }) == ErrorCode::kInvalidConfig);
  s.b = {0.1};
  s.r = {1.0};
  CHECK(code_of([&] { validate(s); }) == ErrorCode::kInvalidConfig);
  CHECK(mechanism_name(Identity{}) == "identity");
  CHECK(mechanism_name(s) == "secret_sharing");
}

TEST_CASE("protected distributions") {
  using divergence::ModelInfoDistribution;
  using divergence::UniformBox;
  auto g = protected_distribution(ModelInfoDistribution::gaussian({0.0}, {1.0}), Randomization{2.0});
  REQUIRE(g.as<divergence::DiagonalGaussian>());
  CHECK(g.as<divergence::DiagonalGaussian>()->variance[0] == doctest::Approx(5.0));
  auto src = ModelInfoDistribution::gaussian({0.5, -1.0}, {1.0, 3.0});
  CHECK(protected_distribution(src, Randomization{0.0}) == src);
  SecretSharing s;
  s.b = {3.0};
  s.r = {2.0};
  auto box = ModelInfoDistribution::box({-0.5}, {0.5});
  auto sb = protected_distribution(box, s);
  REQUIRE(sb.as<UniformBox>());
  CHECK(sb.as<UniformBox>()->lower[0] == doctest::Approx(-3.0));
  CHECK(sb.as<UniformBox>()->upper[0] == doctest::Approx(2.0));
  PaillierConfig p;
  p.p = "5";
  p.q = "7";
  auto pb = protected_distribution(box, p);
  REQUIRE(pb.as<UniformBox>());
  CHECK(pb.as<UniformBox>()->upper[0] == doctest::Approx(1224.0));
  CHECK(code_of([&] { protected_distribution(ModelInfoDistribution::gaussian({0.0}, {1.0}), p); }) ==
        ErrorCode::kUnsupportedPair);
}

TEST_CASE("grid channels") {
  divergence::QuadratureSpec q{{-2.0}, {2.0}, {8}, true};
  auto id = channel_on_grid(Identity{}, q);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) CHECK(id.rows[i][j] == (i == j ? 1.0 : 0.0));
  auto rz = channel_on_grid(Randomization{1.0}, q);
  for (const auto& row : rz.rows) {
    double s = 0.0;
    for (double x : row) s += x;
    CHECK(s == doctest::Approx(1.0));
  }
  auto pushed = DiscreteChannel::constant(3, 1).push({0.2, 0.3, 0.5});
  CHECK(pushed == Vec{0.0, 1.0, 0.0});
}
