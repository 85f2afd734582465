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

#include "nflfed/paillier.hpp"

#include <cmath>

#include "nflfed/common.hpp"

namespace nflfed {
namespace mechanisms {

namespace {

BigInt lcm(const BigInt& a, const BigInt& b) {
  BigInt r;
  mpz_lcm(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return r;
}

BigInt gcd(const BigInt& a, const BigInt& b) {
  BigInt r;
  mpz_gcd(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return r;
}

BigInt powm(const BigInt& base, const BigInt& exp, const BigInt& mod) {
  BigInt r;
  mpz_powm(r.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return r;
}

// L(x) = (x - 1) / n
BigInt ell(const BigInt& x, const BigInt& n) {
  BigInt r = x - 1;
  mpz_divexact(r.get_mpz_t(), r.get_mpz_t(), n.get_mpz_t());
  return r;
}

bool is_prime(const BigInt& v) { return v > 1 && mpz_probab_prime_p(v.get_mpz_t(), 30) > 0; }

}  // namespace

std::size_t PaillierPublicKey::ciphertext_bytes() const {
  return (mpz_sizeinbase(n_squared.get_mpz_t(), 2) + 7) / 8;
}

PaillierKeypair paillier_keygen(const BigInt& p, const BigInt& q, const std::optional<BigInt>& g) {
  if (!is_prime(p) || !is_prime(q)) throw Error(ErrorCode::kInvalidPrimes, "p and q must be prime");
  if (p == q) throw Error(ErrorCode::kInvalidPrimes, "p and q must differ");
  BigInt n = p * q;
  if (gcd(n, (p - 1) * (q - 1)) != 1)
    throw Error(ErrorCode::kInvalidPrimes, "gcd(pq, (p-1)(q-1)) must be 1");
  PaillierKeypair kp;
  kp.pub.n = n;
  kp.pub.n_squared = n * n;
  kp.pub.g = g ? *g : n + 1;
  if (kp.pub.g <= 0 || kp.pub.g >= kp.pub.n_squared || gcd(kp.pub.g, kp.pub.n_squared) != 1)
    throw Error(ErrorCode::kGeneratorOrderInvalid, "g must lie in Z*_{n^2}");
  kp.lambda = lcm(p - 1, q - 1);
  BigInt u = ell(powm(kp.pub.g, kp.lambda, kp.pub.n_squared), n);
  if (mpz_invert(kp.mu.get_mpz_t(), u.get_mpz_t(), n.get_mpz_t()) == 0)
    throw Error(ErrorCode::kGeneratorOrderInvalid, "L(g^lambda mod n^2) is not invertible mod n");
  return kp;
}

PaillierKeypair paillier_generate(unsigned prime_bits, std::uint64_t seed) {
  if (prime_bits < 4) throw Error(ErrorCode::kInvalidConfig, "prime_bits must be at least 4");
  gmp_randclass rng(gmp_randinit_mt);
  rng.seed(static_cast<unsigned long>(seed));
  auto draw = [&]() {
    BigInt c = rng.get_z_bits(prime_bits);
    mpz_setbit(c.get_mpz_t(), prime_bits - 1);
    BigInt p;
    mpz_nextprime(p.get_mpz_t(), c.get_mpz_t());
    return p;
  };
  for (;;) {
    BigInt p = draw(), q = draw();
    if (p == q) continue;
    BigInt n = p * q;
    if (gcd(n, (p - 1) * (q - 1)) != 1) continue;
    return paillier_keygen(p, q);
  }
}

BigInt paillier_encrypt_with(const PaillierPublicKey& pub, const BigInt& h, const BigInt& r) {
  if (h < 0 || h >= pub.n) throw Error(ErrorCode::kPlaintextOutOfRange, "plaintext must lie in [0, n)");
  if (r <= 0 || r >= pub.n || gcd(r, pub.n) != 1)
    throw Error(ErrorCode::kInvalidConfig, "r must lie in Z*_n");
  BigInt gh;
  if (pub.g == pub.n + 1) {
    // (1 + n)^h = 1 + h n (mod n^2)
    gh = (1 + h * pub.n) % pub.n_squared;
  } else {
    gh = powm(pub.g, h, pub.n_squared);
  }
  return (gh * powm(r, pub.n, pub.n_squared)) % pub.n_squared;
}

BigInt paillier_encrypt(const PaillierPublicKey& pub, const BigInt& h, std::uint64_t seed) {
  gmp_randclass rng(gmp_randinit_mt);
  rng.seed(static_cast<unsigned long>(seed));
  BigInt r;
  do {
    r = rng.get_z_range(pub.n);
  } while (r == 0 || gcd(r, pub.n) != 1);
  return paillier_encrypt_with(pub, h, r);
}

BigInt paillier_decrypt(const PaillierKeypair& kp, const BigInt& c) {
  const auto& pub = kp.pub;
  if (c <= 0 || c >= pub.n_squared || gcd(c, pub.n_squared) != 1)
    throw Error(ErrorCode::kCiphertextInvalid, "ciphertext must lie in Z*_{n^2}");
  return (ell(powm(c, kp.lambda, pub.n_squared), pub.n) * kp.mu) % pub.n;
}

BigInt paillier_add(const PaillierPublicKey& pub, const BigInt& a, const BigInt& b) {
  return (a * b) % pub.n_squared;
}

BigInt fixed_point_encode(double x, int scale_bits, const BigInt& n) {
  if (!std::isfinite(x)) throw Error(ErrorCode::kMagnitudeOverflow, "non-finite value");
  double scaled = std::nearbyint(std::ldexp(std::fabs(x), scale_bits));
  BigInt v;
  mpz_set_d(v.get_mpz_t(), scaled);
  if (2 * v >= n) throw Error(ErrorCode::kMagnitudeOverflow, "value too large for modulus");
  if (x < 0 && v != 0) v = n - v;
  return v;
}

double fixed_point_decode(const BigInt& v, int scale_bits, const BigInt& n) {
  BigInt r = v % n;
  if (r < 0) r += n;
  bool neg = 2 * r > n;
  if (neg) r = n - r;
  double mag = std::ldexp(mpz_get_d(r.get_mpz_t()), -scale_bits);
  return neg ? -mag : mag;
}

std::vector<std::uint8_t> to_bytes(const BigInt& v, std::size_t width) {
  std::vector<std::uint8_t> out(width, 0);
  std::size_t count = 0;
  std::vector<std::uint8_t> raw((mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8 + 1);
  mpz_export(raw.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
  if (count > width) throw Error(ErrorCode::kMagnitudeOverflow, "integer wider than field");
  std::copy(raw.begin(), raw.begin() + static_cast<long>(count), out.end() - static_cast<long>(count));
  return out;
}

BigInt from_bytes(const std::uint8_t* data, std::size_t width) {
  BigInt v;
  mpz_import(v.get_mpz_t(), width, 1, 1, 1, 0, data);
  return v;
}

}  // namespace mechanisms
}  // namespace nflfed
