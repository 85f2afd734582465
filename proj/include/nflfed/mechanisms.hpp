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

#ifndef NFLFED_MECHANISMS_HPP_
#define NFLFED_MECHANISMS_HPP_

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "nflfed/common.hpp"
#include "nflfed/divergence.hpp"
#include "nflfed/paillier.hpp"

namespace nflfed {
namespace mechanisms {

struct Identity {};

struct Randomization {
  double sigma = 0.0;
};

struct PaillierConfig {
  // Decimal primes; when both are empty a key of `prime_bits` primes is drawn
  // from the run seed.
  std::string p;
  std::string q;
  std::string g;  // empty selects n + 1
  unsigned prime_bits = 256;
  double delta = 0.5;  // plaintext relaxation half-width, analysis only
  int scale_bits = 16;
};

struct SecretSharing {
  int num_shares = 2;
  Vec b;  // per-dimension lower spread, broadcast when of length 1
  Vec r;  // per-dimension upper spread
  double delta = 0.5;
  int scale_bits = 16;
};

struct Compression {
  Vec rho;  // keep probabilities, broadcast when of length 1
};

using MechanismConfig =
    std::variant<Identity, Randomization, PaillierConfig, SecretSharing, Compression>;

std::string mechanism_name(const MechanismConfig& cfg);
// Checks parameter invariants; throws kInvalidConfig and friends.
void validate(const MechanismConfig& cfg);
// Per-dimension value of a broadcastable parameter.
double dim_param(const Vec& v, std::size_t i);

struct Plain {};
struct Cipher {
  std::vector<BigInt> values;
};
struct Shares {
  // shares[s][j]: fixed-point share s of coordinate j; sums wrap mod 2^64.
  std::vector<std::vector<std::int64_t>> values;
  int scale_bits = 16;
};

struct ModelInfo {
  Vec values;
  std::variant<Plain, Cipher, Shares> encoding = Plain{};

  static ModelInfo plain(Vec v) { return ModelInfo{std::move(v), Plain{}}; }
  bool is_plain() const { return std::holds_alternative<Plain>(encoding); }
};

ModelInfo randomize(const ModelInfo& w, double sigma, std::uint64_t seed);

// Two's-complement fixed point in 64 bits.
std::int64_t fix64_encode(double x, int scale_bits);
double fix64_decode(std::int64_t v, int scale_bits);

ModelInfo secret_share(const ModelInfo& w, const SecretSharing& cfg, std::uint64_t seed);
// Exact reconstruction of the fixed-point sum of all shares.
std::vector<std::int64_t> reconstruct_fixed(const Shares& s);
Vec reconstruct(const Shares& s);

std::vector<std::uint8_t> draw_mask(const Vec& rho, std::size_t dim, std::uint64_t seed);
ModelInfo apply_mask(const ModelInfo& w, const std::vector<std::uint8_t>& mask);
ModelInfo compress(const ModelInfo& w, const Vec& rho, std::uint64_t seed);

// Symbolic distribution of the protected information.
divergence::ModelInfoDistribution protected_distribution(
    const divergence::ModelInfoDistribution& p_orig, const MechanismConfig& cfg);

// Row-stochastic transition matrix between discrete model-info points.
struct DiscreteChannel {
  std::vector<Vec> rows;  // rows[i][j] = P(out = j | in = i)

  std::size_t size() const { return rows.size(); }
  Vec push(const Vec& pmf) const;
  static DiscreteChannel identity(std::size_t n);
  // Every input mapped to output `target`.
  static DiscreteChannel constant(std::size_t n, std::size_t target);
};

// Channel induced by the mechanism on the grid cell centers, tails folded
// into the edge cells.
DiscreteChannel channel_on_grid(const MechanismConfig& cfg, const divergence::QuadratureSpec& quad);

}  // namespace mechanisms
}  // namespace nflfed

#endif  // NFLFED_MECHANISMS_HPP_
