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

#include "nflfed/mechanisms.hpp"

#include <cfloat>
#include <cmath>
#include <limits>

namespace nflfed {
namespace mechanisms {

using divergence::ModelInfoDistribution;

std::string mechanism_name(const MechanismConfig& cfg) {
  struct V {
    std::string operator()(const Identity&) const { return "identity"; }
    std::string operator()(const Randomization&) const { return "randomization"; }
    std::string operator()(const PaillierConfig&) const { return "paillier"; }
    std::string operator()(const SecretSharing&) const { return "secret_sharing"; }
    std::string operator()(const Compression&) const { return "compression"; }
  };
  return std::visit(V{}, cfg);
}

double dim_param(const Vec& v, std::size_t i) {
  if (v.empty()) throw Error(ErrorCode::kInvalidConfig, "empty per-dimension parameter");
  return v.size() == 1 ? v[0] : v.at(i);
}

void validate(const MechanismConfig& cfg) {
  if (auto* r = std::get_if<Randomization>(&cfg)) {
    if (!(r->sigma >= 0.0) || !std::isfinite(r->sigma))
      throw Error(ErrorCode::kNonpositiveSigma, "sigma must be nonnegative");
  } else if (auto* s = std::get_if<SecretSharing>(&cfg)) {
    if (s->num_shares < 2) throw Error(ErrorCode::kInvalidConfig, "num_shares must be at least 2");
    if (s->b.empty() || s->r.empty()) throw Error(ErrorCode::kInvalidConfig, "share ranges b and r are required");
    for (double x : s->b)
      if (!(x > s->delta)) throw Error(ErrorCode::kInvalidConfig, "share range b must exceed delta");
    for (double x : s->r)
      if (!(x > s->delta)) throw Error(ErrorCode::kInvalidConfig, "share range r must exceed delta");
    if (s->scale_bits < 0 || s->scale_bits > 40) throw Error(ErrorCode::kInvalidConfig, "scale_bits out of range");
  } else if (auto* c = std::get_if<Compression>(&cfg)) {
    if (c->rho.empty()) throw Error(ErrorCode::kInvalidConfig, "compression needs rho");
    for (double x : c->rho)
      if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::kProbabilityOutOfRange, "rho must lie in [0, 1]");
  } else if (auto* p = std::get_if<PaillierConfig>(&cfg)) {
    if (p->p.empty() != p->q.empty()) throw Error(ErrorCode::kInvalidConfig, "give both p and q or neither");
    if (!(p->delta > 0.0)) throw Error(ErrorCode::kInvalidConfig, "delta must be positive");
    if (p->scale_bits < 0 || p->scale_bits > 40) throw Error(ErrorCode::kInvalidConfig, "scale_bits out of range");
    if (!p->p.empty()) {
      std::optional<BigInt> g;
      if (!p->g.empty()) g = BigInt(p->g);
      paillier_keygen(BigInt(p->p), BigInt(p->q), g);
    } else if (p->prime_bits < 16) {
      throw Error(ErrorCode::kInvalidConfig, "prime_bits must be at least 16");
    }
  }
}

ModelInfo randomize(const ModelInfo& w, double sigma, std::uint64_t seed) {
  if (!w.is_plain()) throw Error(ErrorCode::kInvalidConfig, "randomize needs plain model info");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error(ErrorCode::kNonpositiveSigma, "sigma must be nonnegative");
  ModelInfo out = w;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : out.values) v += noise(rng);
  return out;
}

std::int64_t fix64_encode(double x, int scale_bits) {
  double s = std::nearbyint(std::ldexp(x, scale_bits));
  if (!std::isfinite(s) || std::fabs(s) >= 0x1p62)
    throw Error(ErrorCode::kMagnitudeOverflow, "value too large for 64-bit fixed point");
  return static_cast<std::int64_t>(s);
}

double fix64_decode(std::int64_t v, int scale_bits) {
  return std::ldexp(static_cast<double>(v), -scale_bits);
}

ModelInfo secret_share(const ModelInfo& w, const SecretSharing& cfg, std::uint64_t seed) {
  validate(cfg);
  if (!w.is_plain()) throw Error(ErrorCode::kInvalidConfig, "secret_share needs plain model info");
  std::size_t m = w.values.size();
  Rng rng(seed);
  Shares sh;
  sh.scale_bits = cfg.scale_bits;
  sh.values.assign(static_cast<std::size_t>(cfg.num_shares), std::vector<std::int64_t>(m));
  for (std::size_t j = 0; j < m; ++j) {
    std::uint64_t acc = 0;
    double lo = -dim_param(cfg.b, j), hi = dim_param(cfg.r, j);
    std::uniform_real_distribution<double> u(lo, hi);
    for (int s = 0; s + 1 < cfg.num_shares; ++s) {
      std::int64_t v = fix64_encode(u(rng), cfg.scale_bits);
      sh.values[static_cast<std::size_t>(s)][j] = v;
      acc += static_cast<std::uint64_t>(v);
    }
    std::uint64_t secret = static_cast<std::uint64_t>(fix64_encode(w.values[j], cfg.scale_bits));
    sh.values.back()[j] = static_cast<std::int64_t>(secret - acc);
  }
  return ModelInfo{w.values, std::move(sh)};
}

std::vector<std::int64_t> reconstruct_fixed(const Shares& s) {
  if (s.values.empty()) throw Error(ErrorCode::kEmptyInput, "no shares");
  std::vector<std::uint64_t> acc(s.values.front().size(), 0);
  for (const auto& share : s.values)
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += static_cast<std::uint64_t>(share.at(j));
  return {acc.begin(), acc.end()};
}

Vec reconstruct(const Shares& s) {
  auto fixed = reconstruct_fixed(s);
  Vec out(fixed.size());
  for (std::size_t j = 0; j < fixed.size(); ++j) out[j] = fix64_decode(fixed[j], s.scale_bits);
  return out;
}

std::vector<std::uint8_t> draw_mask(const Vec& rho, std::size_t dim, std::uint64_t seed) {
  validate(Compression{rho});
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> mask(dim);
  for (std::size_t i = 0; i < dim; ++i) mask[i] = u(rng) < dim_param(rho, i) ? 1 : 0;
  return mask;
}

ModelInfo apply_mask(const ModelInfo& w, const std::vector<std::uint8_t>& mask) {
  if (mask.size() != w.values.size()) throw Error(ErrorCode::kDimensionMismatch, "mask length differs");
  ModelInfo out = w;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (!mask[i]) out.values[i] = 0.0;
  return out;
}

ModelInfo compress(const ModelInfo& w, const Vec& rho, std::uint64_t seed) {
  if (!w.is_plain()) throw Error(ErrorCode::kInvalidConfig, "compress needs plain model info");
  return apply_mask(w, draw_mask(rho, w.values.size(), seed));
}

namespace {

double paillier_n_squared(const PaillierConfig& cfg) {
  if (!cfg.p.empty()) {
    BigInt n = BigInt(cfg.p) * BigInt(cfg.q);
    BigInt n2 = n * n;
    if (mpz_sizeinbase(n2.get_mpz_t(), 2) > 1023) return DBL_MAX;
    return mpz_get_d(n2.get_mpz_t());
  }
  // Drawn key: n has exactly 2 * prime_bits or 2 * prime_bits - 1 bits.
  double e = 4.0 * cfg.prime_bits - 2.0;
  return e > 1023 ? DBL_MAX : std::ldexp(1.0, static_cast<int>(e));
}

ModelInfoDistribution compression_of_atoms(const ModelInfoDistribution& p, const Vec& rho) {
  auto [pts, ws] = p.atoms();
  std::size_t m = p.dim();
  if (m > 20) throw Error(ErrorCode::kUnsupportedPair, "compression enumeration limited to 20 dims");
  std::vector<divergence::Point> atoms;
  Vec weights;
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    double w = 1.0;
    for (std::size_t i = 0; i < m; ++i) w *= (mask >> i & 1) ? dim_param(rho, i) : 1.0 - dim_param(rho, i);
    if (w == 0.0) continue;
    for (std::size_t a = 0; a < pts.size(); ++a) {
      divergence::Point x = pts[a];
      for (std::size_t i = 0; i < m; ++i)
        if (!(mask >> i & 1)) x[i] = 0.0;
      atoms.push_back(std::move(x));
      weights.push_back(w * ws[a]);
    }
  }
  auto merged = ModelInfoDistribution::discrete(atoms, weights).atoms();
  return ModelInfoDistribution::discrete(merged.first, merged.second);
}

}  // namespace

ModelInfoDistribution protected_distribution(const ModelInfoDistribution& p,
                                             const MechanismConfig& cfg) {
  validate(cfg);
  using divergence::DiagonalGaussian;
  using divergence::UniformBox;
  if (std::holds_alternative<Identity>(cfg)) return p;
  if (auto* r = std::get_if<Randomization>(&cfg)) {
    if (r->sigma == 0.0) return p;
    double v = r->sigma * r->sigma;
    if (auto* g = p.as<DiagonalGaussian>()) {
      Vec var = g->variance;
      for (double& x : var) x += v;
      return ModelInfoDistribution::gaussian(g->mean, var);
    }
    if (p.is_atomic()) {
      auto [pts, ws] = p.atoms();
      std::vector<ModelInfoDistribution> comps;
      for (const auto& x : pts) comps.push_back(ModelInfoDistribution::gaussian(x, Vec(p.dim(), v)));
      if (comps.size() == 1) return comps.front();
      return ModelInfoDistribution::mixture(std::move(comps), ws);
    }
    throw Error(ErrorCode::kUnsupportedPair, "randomization needs a gaussian or atomic input");
  }
  if (auto* pc = std::get_if<PaillierConfig>(&cfg)) {
    if (!p.as<UniformBox>()) throw Error(ErrorCode::kUnsupportedPair, "paillier needs a uniform box input");
    double top = paillier_n_squared(*pc) - 1.0;
    return ModelInfoDistribution::box(Vec(p.dim(), 0.0), Vec(p.dim(), top));
  }
  if (auto* s = std::get_if<SecretSharing>(&cfg)) {
    auto* b = p.as<UniformBox>();
    if (!b) throw Error(ErrorCode::kUnsupportedPair, "secret sharing needs a uniform box input");
    Vec lo(p.dim()), hi(p.dim());
    for (std::size_t j = 0; j < p.dim(); ++j) {
      double centre = 0.5 * (b->lower[j] + b->upper[j]);
      lo[j] = centre - dim_param(s->b, j);
      hi[j] = centre + dim_param(s->r, j);
    }
    return ModelInfoDistribution::box(lo, hi);
  }
  const auto& c = std::get<Compression>(cfg);
  if (p.is_atomic()) return compression_of_atoms(p, c.rho);
  auto* b = p.as<UniformBox>();
  if (!b) throw Error(ErrorCode::kUnsupportedPair, "compression needs a uniform box or atomic input");
  std::size_t m = p.dim();
  if (m > 16) throw Error(ErrorCode::kUnsupportedPair, "compression enumeration limited to 16 dims");
  std::vector<ModelInfoDistribution> comps;
  Vec weights;
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    double w = 1.0;
    std::vector<std::uint8_t> collapsed(m);
    for (std::size_t i = 0; i < m; ++i) {
      bool kept = mask >> i & 1;
      w *= kept ? dim_param(c.rho, i) : 1.0 - dim_param(c.rho, i);
      collapsed[i] = kept ? 0 : 1;
    }
    if (w == 0.0) continue;
    comps.push_back(ModelInfoDistribution::collapsed_box(b->lower, b->upper, collapsed, Vec(m, 0.0)));
    weights.push_back(w);
  }
  if (comps.size() == 1) return comps.front();
  return ModelInfoDistribution::mixture(std::move(comps), weights);
}

Vec DiscreteChannel::push(const Vec& pmf) const {
  if (pmf.size() != rows.size()) throw Error(ErrorCode::kDimensionMismatch, "pmf does not match channel");
  Vec out(rows.empty() ? 0 : rows.front().size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (pmf[i] == 0.0) continue;
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += pmf[i] * rows[i][j];
  }
  return out;
}

DiscreteChannel DiscreteChannel::identity(std::size_t n) {
  DiscreteChannel c;
  c.rows.assign(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) c.rows[i][i] = 1.0;
  return c;
}

DiscreteChannel DiscreteChannel::constant(std::size_t n, std::size_t target) {
  if (target >= n) throw Error(ErrorCode::kInvalidConfig, "constant target out of range");
  DiscreteChannel c;
  c.rows.assign(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) c.rows[i][target] = 1.0;
  return c;
}

DiscreteChannel channel_on_grid(const MechanismConfig& cfg, const divergence::QuadratureSpec& quad) {
  validate(cfg);
  divergence::QuadratureSpec q = quad;
  q.clamp_tails = true;
  auto centers = q.centers();
  DiscreteChannel c;
  c.rows.reserve(centers.size());
  for (const auto& x : centers) {
    auto out = protected_distribution(ModelInfoDistribution::point_mass(x), cfg);
    c.rows.push_back(divergence::cell_masses(out, q).mass);
  }
  return c;
}

}  // namespace mechanisms
}  // namespace nflfed
