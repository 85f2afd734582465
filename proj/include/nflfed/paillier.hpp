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

#ifndef NFLFED_PAILLIER_HPP_
#define NFLFED_PAILLIER_HPP_

#include <gmpxx.h>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace nflfed {
namespace mechanisms {

using BigInt = mpz_class;

struct PaillierPublicKey {
  BigInt n;
  BigInt g;
  BigInt n_squared;
  // Serialized ciphertext width, ceil(bits(n^2) / 8).
  std::size_t ciphertext_bytes() const;
};

struct PaillierKeypair {
  PaillierPublicKey pub;
  BigInt lambda;
  BigInt mu;
};

// g defaults to n + 1. Not hardened: no CRT, no constant-time arithmetic.
PaillierKeypair paillier_keygen(const BigInt& p, const BigInt& q,
                                const std::optional<BigInt>& g = std::nullopt);
// Draws two distinct primes of `prime_bits` bits from the seed.
PaillierKeypair paillier_generate(unsigned prime_bits, std::uint64_t seed);

// r is drawn uniformly from Z*_n using a generator seeded with `seed`.
BigInt paillier_encrypt(const PaillierPublicKey& pub, const BigInt& h, std::uint64_t seed);
BigInt paillier_encrypt_with(const PaillierPublicKey& pub, const BigInt& h, const BigInt& r);
BigInt paillier_decrypt(const PaillierKeypair& kp, const BigInt& c);
// Ciphertext of the plaintext sum.
BigInt paillier_add(const PaillierPublicKey& pub, const BigInt& a, const BigInt& b);

// Reals <-> Z_n; negatives wrap to n - |v|.
BigInt fixed_point_encode(double x, int scale_bits, const BigInt& n);
double fixed_point_decode(const BigInt& v, int scale_bits, const BigInt& n);

// Big-endian, zero-padded to `width` bytes.
std::vector<std::uint8_t> to_bytes(const BigInt& v, std::size_t width);
BigInt from_bytes(const std::uint8_t* data, std::size_t width);

}  // namespace mechanisms
}  // namespace nflfed

#endif  // NFLFED_PAILLIER_HPP_
