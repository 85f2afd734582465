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

#include "nflfed/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>

namespace nflfed {
namespace fedsim {

using mechanisms::BigInt;
using models::Dataset;
using models::ToyModel;

namespace {
constexpr std::uint64_t kDataTag = 0xda7a;
constexpr std::uint64_t kMechTag = 0x3ec4;
constexpr std::uint64_t kKeyTag = 0x6e79;

std::string client_name(std::size_t k) { return "client" + std::to_string(k); }

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
std::uint64_t get_u64(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw Error(ErrorCode::kInvalidSpec, "truncated payload");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[pos + static_cast<std::size_t>(i)]) << (8 * i);
  pos += 8;
  return v;
}
std::uint64_t double_bits(double x) {
  std::uint64_t u;
  std::memcpy(&u, &x, 8);
  return u;
}
double bits_double(std::uint64_t u) {
  double x;
  std::memcpy(&x, &u, 8);
  return x;
}

// Plain payload codec. A scalar takes 8 bytes either way.
struct PlainCodec {
  Codec codec;
  int scale_bits;

  std::uint64_t word(double x) const {
    return codec == Codec::kFloat64 ? double_bits(x)
                                    : static_cast<std::uint64_t>(mechanisms::fix64_encode(x, scale_bits));
  }
  double value(std::uint64_t u) const {
    return codec == Codec::kFloat64 ? bits_double(u)
                                    : mechanisms::fix64_decode(static_cast<std::int64_t>(u), scale_bits);
  }
  std::vector<std::uint8_t> dense(const Vec& v) const {
    std::vector<std::uint8_t> out;
    out.reserve(8 * v.size());
    for (double x : v) put_u64(out, word(x));
    return out;
  }
  // Count, then (index, value) pairs for the kept coordinates.
  std::vector<std::uint8_t> sparse(const Vec& v, const std::vector<std::uint8_t>& mask) const {
    std::vector<std::uint8_t> out;
    std::uint64_t kept = static_cast<std::uint64_t>(std::count(mask.begin(), mask.end(), 1));
    put_varint(out, kept);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!mask[i]) continue;
      put_varint(out, i);
      put_u64(out, word(v[i]));
    }
    return out;
  }
  // Raw words, zero where a sparse payload omits the coordinate.
  std::vector<std::uint64_t> words(const std::vector<std::uint8_t>& p, std::size_t m, bool is_sparse) const {
    std::vector<std::uint64_t> out(m, word(0.0));
    std::size_t pos = 0;
    if (!is_sparse) {
      for (std::size_t i = 0; i < m; ++i) out[i] = get_u64(p, pos);
    } else {
      std::uint64_t kept = get_varint(p, pos);
      for (std::uint64_t c = 0; c < kept; ++c) {
        std::uint64_t idx = get_varint(p, pos);
        if (idx >= m) throw Error(ErrorCode::kInvalidSpec, "sparse index out of range");
        out[idx] = get_u64(p, pos);
      }
    }
    if (pos != p.size()) throw Error(ErrorCode::kInvalidSpec, "trailing payload bytes");
    return out;
  }
  Vec decode(const std::vector<std::uint8_t>& p, std::size_t m, bool is_sparse) const {
    auto w = words(p, m, is_sparse);
    Vec out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = value(w[i]);
    return out;
  }
};

void check_finite(const Vec& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw Error(ErrorCode::kNonFiniteLoss, what);
}

ToyModel base_model(const FLScenario& s, std::size_t dim) {
  if (s.model == models::ModelKind::kLinearRegression) return ToyModel::linear_regression(Vec(dim, 0.0));
  return ToyModel::softmax_linear(dim, s.classes, {});
}

double data_target(const ToyModel& m, const Dataset& d, std::size_t i) {
  return m.kind == models::ModelKind::kLinearRegression ? d.targets[i] : static_cast<double>(d.labels[i]);
}
}  // namespace

void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint64_t get_varint(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  std::uint64_t v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    if (pos >= in.size()) throw Error(ErrorCode::kInvalidSpec, "truncated varint");
    std::uint8_t b = in[pos++];
    v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
    if (!(b & 0x80)) return v;
  }
  throw Error(ErrorCode::kInvalidSpec, "varint too long");
}

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

Message Transport::send(std::size_t round, const std::string& from, const std::string& to,
                        const std::string& kind, std::vector<std::uint8_t> payload) {
  Message m{round, from, to, kind, payload.size(), 8ULL * payload.size(),
            fnv1a(payload.data(), payload.size())};
  bytes_written_ += payload.size();
  auto it = std::find_if(edges_.begin(), edges_.end(),
                         [&](const Edge& e) { return e.from == from && e.to == to; });
  if (it == edges_.end()) {
    edges_.push_back(Edge{from, to, {}});
    it = edges_.end() - 1;
  }
  it->queue.push_back(std::move(payload));
  return m;
}

std::vector<std::uint8_t> Transport::receive(const std::string& from, const std::string& to) {
  auto it = std::find_if(edges_.begin(), edges_.end(),
                         [&](const Edge& e) { return e.from == from && e.to == to; });
  if (it == edges_.end() || it->queue.empty()) throw Error(ErrorCode::kInvalidSpec, "no message on edge " + from + "->" + to);
  auto p = std::move(it->queue.front());
  it->queue.erase(it->queue.begin());
  return p;
}

void FLScenario::validate() const {
  mechanisms::validate(mechanism);
  if (rounds == 0) throw Error(ErrorCode::kInvalidConfig, "rounds: must be positive");
  if (local_steps == 0) throw Error(ErrorCode::kInvalidConfig, "local_steps: must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::kInvalidConfig, "lr: must be positive");
  if (dim == 0) throw Error(ErrorCode::kInvalidConfig, "model.dim: must be positive");
  if (model == models::ModelKind::kSoftmaxLinear && classes < 2)
    throw Error(ErrorCode::kInvalidConfig, "model.classes: need at least 2");
  if (data.samples_per_client == 0 || data.holdout_per_client == 0)
    throw Error(ErrorCode::kInvalidSpec, "data: sample counts must be positive");
  if (!(data.label_skew >= 0.0 && data.label_skew <= 1.0))
    throw Error(ErrorCode::kInvalidSpec, "data.label_skew: must lie in [0, 1]");
  if (!(data.noise >= 0.0)) throw Error(ErrorCode::kInvalidSpec, "data.noise: must be nonnegative");
  if (data.positive_rate >= 0.0 && (data.positive_rate > 1.0 || classes != 2))
    throw Error(ErrorCode::kInvalidSpec, "data.positive_rate: needs two classes and a value in [0, 1]");
  if (codec_scale_bits < 0 || codec_scale_bits > 40)
    throw Error(ErrorCode::kInvalidConfig, "codec_scale_bits: must lie in [0, 40]");
  if (topology == Topology::kHorizontal) {
    if (clients == 0) throw Error(ErrorCode::kInvalidConfig, "clients: need at least one");
  } else {
    if (clients != 2) throw Error(ErrorCode::kInvalidConfig, "clients: vertical federation has exactly 2");
    if (model != models::ModelKind::kSoftmaxLinear)
      throw Error(ErrorCode::kInvalidConfig, "model.kind: vertical federation needs softmax_linear");
    std::size_t split = data.feature_split == 0 ? dim / 2 : data.feature_split;
    if (split == 0 || split >= dim)
      throw Error(ErrorCode::kInvalidSpec, "data.feature_split: both sides need a feature");
    if (std::holds_alternative<mechanisms::PaillierConfig>(mechanism) ||
        std::holds_alternative<mechanisms::SecretSharing>(mechanism))
      throw Error(ErrorCode::kMechanismIncompatible,
                  "mechanism: " + mechanisms::mechanism_name(mechanism) + " cannot protect the vertical gradient message");
  }
}

FLScenario unprotected_counterpart(const FLScenario& s) {
  FLScenario u = s;
  u.mechanism = mechanisms::Identity{};
  if (auto* p = std::get_if<mechanisms::PaillierConfig>(&s.mechanism)) {
    u.codec = Codec::kFixed;
    u.codec_scale_bits = p->scale_bits;
  } else if (auto* ss = std::get_if<mechanisms::SecretSharing>(&s.mechanism)) {
    u.codec = Codec::kFixed;
    u.codec_scale_bits = ss->scale_bits;
  }
  return u;
}

// ---------------------------------------------------------------------------
// Synthetic data

Dataset synth_dataset(const FLScenario& s, std::size_t samples, std::size_t client, std::uint64_t seed) {
  std::uint64_t data_seed = derive_seed(s.master_seed, {kDataTag, s.data.seed});
  Rng truth(derive_seed(data_seed, {0}));
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset d;
  d.dim = s.dim;
  Rng rng(seed);
  if (s.model == models::ModelKind::kLinearRegression) {
    Vec theta(s.dim);
    for (double& t : theta) t = z(truth);
    for (std::size_t i = 0; i < samples; ++i) {
      double y = 0.0;
      for (std::size_t j = 0; j < s.dim; ++j) {
        double x = z(rng);
        d.features.push_back(x);
        y += theta[j] * x;
      }
      d.targets.push_back(y + s.data.noise * z(rng));
    }
    return d;
  }
  std::vector<Vec> centers(s.classes, Vec(s.dim));
  for (auto& c : centers)
    for (double& v : c) v = 2.0 * z(truth);
  Vec mix(s.classes, 1.0 / static_cast<double>(s.classes));
  if (s.data.positive_rate >= 0.0) mix = {1.0 - s.data.positive_rate, s.data.positive_rate};
  for (double& m : mix) m *= 1.0 - s.data.label_skew;
  mix[client % s.classes] += s.data.label_skew;
  std::discrete_distribution<int> pick(mix.begin(), mix.end());
  for (std::size_t i = 0; i < samples; ++i) {
    int y = pick(rng);
    d.labels.push_back(y);
    for (std::size_t j = 0; j < s.dim; ++j)
      d.features.push_back(centers[static_cast<std::size_t>(y)][j] + (1.0 + s.data.noise) * z(rng));
  }
  return d;
}

FederatedData synth_data(const FLScenario& s) {
  std::uint64_t data_seed = derive_seed(s.master_seed, {kDataTag, s.data.seed});
  FederatedData fd;
  std::size_t parts = s.topology == Topology::kHorizontal ? s.clients : 1;
  for (std::size_t k = 0; k < parts; ++k) {
    fd.train.push_back(synth_dataset(s, s.data.samples_per_client, k, derive_seed(data_seed, {1, k})));
    fd.holdout.push_back(synth_dataset(s, s.data.holdout_per_client, k, derive_seed(data_seed, {2, k})));
  }
  return fd;
}

VerticalSplit split_features(const Dataset& d, std::size_t cols) {
  if (cols == 0 || cols >= d.dim) throw Error(ErrorCode::kInvalidSpec, "split must leave features on both sides");
  VerticalSplit v;
  v.feature_side.dim = cols;
  v.label_side.dim = d.dim - cols;
  v.label_side.targets = d.targets;
  v.label_side.labels = d.labels;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double* r = d.row(i);
    v.feature_side.features.insert(v.feature_side.features.end(), r, r + cols);
    v.label_side.features.insert(v.label_side.features.end(), r + cols, r + d.dim);
  }
  return v;
}

Dataset join_features(const VerticalSplit& v) {
  Dataset d;
  d.dim = v.feature_side.dim + v.label_side.dim;
  d.targets = v.label_side.targets;
  d.labels = v.label_side.labels;
  for (std::size_t i = 0; i < v.label_side.size(); ++i) {
    const double* a = v.feature_side.row(i);
    const double* b = v.label_side.row(i);
    d.features.insert(d.features.end(), a, a + v.feature_side.dim);
    d.features.insert(d.features.end(), b, b + v.label_side.dim);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Horizontal protocol

RoundTrace run_hfl(const FLScenario& s) {
  if (s.topology != Topology::kHorizontal) throw Error(ErrorCode::kInvalidConfig, "topology: expected hfl");
  s.validate();
  FederatedData data = synth_data(s);
  ToyModel model = base_model(s, s.dim);
  const std::size_t m = model.num_params(), K = s.clients;
  const std::uint64_t mech_seed = derive_seed(s.master_seed, {kMechTag, s.replicate});
  const PlainCodec plain{s.codec, s.codec_scale_bits};

  std::optional<mechanisms::PaillierKeypair> key;
  if (auto* p = std::get_if<mechanisms::PaillierConfig>(&s.mechanism)) {
    if (!p->p.empty()) {
      std::optional<BigInt> g;
      if (!p->g.empty()) g = BigInt(p->g);
      key = mechanisms::paillier_keygen(BigInt(p->p), BigInt(p->q), g);
    } else {
      key = mechanisms::paillier_generate(p->prime_bits, derive_seed(s.master_seed, {kKeyTag}));
    }
  }

  RoundTrace trace;
  trace.scenario = s;
  Transport net;
  Vec global(m, 0.0);
  for (std::size_t r = 0; r < s.rounds; ++r) {
    RoundRecord rec;
    rec.round = r;
    rec.clients.resize(K);
    rec.plaintext_aggregate.assign(m, 0.0);
    std::vector<Vec> local(K);
    for (std::size_t k = 0; k < K; ++k) {
      ToyModel mk = model;
      mk.theta = global;
      for (std::size_t step = 0; step < s.local_steps; ++step) {
        Vec g = mk.mean_gradient(data.train[k]);
        check_finite(g, "local gradient is not finite");
        for (std::size_t i = 0; i < m; ++i) mk.theta[i] -= s.lr * g[i];
      }
      check_finite(mk.theta, "local model is not finite");
      rec.clients[k].train_loss = mk.mean_loss(data.train[k]);
      if (!std::isfinite(rec.clients[k].train_loss)) throw Error(ErrorCode::kNonFiniteLoss, "training loss is not finite");
      local[k] = mk.theta;
      rec.clients[k].original = mk.theta;
      for (std::size_t i = 0; i < m; ++i) rec.plaintext_aggregate[i] += mk.theta[i];
    }
    for (double& v : rec.plaintext_aggregate) v /= static_cast<double>(K);

    // Uploads.
    for (std::size_t k = 0; k < K; ++k) {
      const std::uint64_t seed = derive_seed(mech_seed, {r, k});
      auto w = mechanisms::ModelInfo::plain(local[k]);
      auto& cr = rec.clients[k];
      auto upload = [&](const std::string& to, const std::string& kind, std::vector<std::uint8_t> p) {
        Message msg = net.send(r, client_name(k), to, kind, std::move(p));
        cr.upload_bits += msg.bits;
        rec.messages.push_back(msg);
      };
      std::visit(
          [&](const auto& cfg) {
            using T = std::decay_t<decltype(cfg)>;
            if constexpr (std::is_same_v<T, mechanisms::Identity>) {
              cr.protected_ = plain.decode(plain.dense(w.values), m, false);
              upload("server", "update", plain.dense(w.values));
            } else if constexpr (std::is_same_v<T, mechanisms::Randomization>) {
              auto noisy = mechanisms::randomize(w, cfg.sigma, seed);
              cr.protected_ = plain.decode(plain.dense(noisy.values), m, false);
              upload("server", "update", plain.dense(noisy.values));
            } else if constexpr (std::is_same_v<T, mechanisms::Compression>) {
              auto mask = mechanisms::draw_mask(cfg.rho, m, seed);
              auto kept = mechanisms::apply_mask(w, mask);
              auto payload = plain.sparse(kept.values, mask);
              cr.protected_ = plain.decode(payload, m, true);
              upload("server", "update", std::move(payload));
            } else if constexpr (std::is_same_v<T, mechanisms::SecretSharing>) {
              auto shared = mechanisms::secret_share(w, cfg, seed);
              const auto& sh = std::get<mechanisms::Shares>(shared.encoding);
              cr.protected_ = mechanisms::reconstruct(sh);
              for (std::size_t a = 0; a < sh.values.size(); ++a) {
                std::vector<std::uint8_t> p;
                for (std::int64_t v : sh.values[a]) put_u64(p, static_cast<std::uint64_t>(v));
                upload("aggregator" + std::to_string(a), "share", std::move(p));
              }
            } else {
              const auto& pub = key->pub;
              std::size_t width = pub.ciphertext_bytes();
              std::vector<std::uint8_t> p;
              cr.protected_.resize(m);
              for (std::size_t i = 0; i < m; ++i) {
                BigInt h = mechanisms::fixed_point_encode(local[k][i], cfg.scale_bits, pub.n);
                cr.protected_[i] = mechanisms::fixed_point_decode(h, cfg.scale_bits, pub.n);
                BigInt c = mechanisms::paillier_encrypt(pub, h, derive_seed(seed, {i}));
                auto bytes = mechanisms::to_bytes(c, width);
                p.insert(p.end(), bytes.begin(), bytes.end());
              }
              upload("server", "ciphertext", std::move(p));
            }
          },
          s.mechanism);
    }

    // Aggregation and broadcast.
    Vec next(m, 0.0);
    if (auto* ss = std::get_if<mechanisms::SecretSharing>(&s.mechanism)) {
      std::vector<std::uint64_t> total(m, 0);
      for (std::size_t a = 0; a < static_cast<std::size_t>(ss->num_shares); ++a) {
        std::string agg = "aggregator" + std::to_string(a);
        std::vector<std::uint64_t> partial(m, 0);
        for (std::size_t k = 0; k < K; ++k) {
          auto p = net.receive(client_name(k), agg);
          std::size_t pos = 0;
          for (std::size_t i = 0; i < m; ++i) partial[i] += get_u64(p, pos);
        }
        std::vector<std::uint8_t> out;
        for (auto v : partial) put_u64(out, v);
        rec.messages.push_back(net.send(r, agg, "server", "partial_sum", std::move(out)));
        auto back = net.receive(agg, "server");
        std::size_t pos = 0;
        for (std::size_t i = 0; i < m; ++i) total[i] += get_u64(back, pos);
      }
      for (std::size_t i = 0; i < m; ++i)
        next[i] = mechanisms::fix64_decode(static_cast<std::int64_t>(total[i]), ss->scale_bits) / static_cast<double>(K);
    } else if (auto* pc = std::get_if<mechanisms::PaillierConfig>(&s.mechanism)) {
      const auto& pub = key->pub;
      std::size_t width = pub.ciphertext_bytes();
      std::vector<BigInt> acc(m, BigInt(1));
      for (std::size_t k = 0; k < K; ++k) {
        auto p = net.receive(client_name(k), "server");
        for (std::size_t i = 0; i < m; ++i)
          acc[i] = mechanisms::paillier_add(pub, acc[i], mechanisms::from_bytes(p.data() + i * width, width));
      }
      std::vector<std::uint8_t> out;
      for (const auto& c : acc) {
        auto b = mechanisms::to_bytes(c, width);
        out.insert(out.end(), b.begin(), b.end());
      }
      // Every client holds the private key and decrypts the same aggregate.
      for (std::size_t k = 0; k < K; ++k) {
        rec.messages.push_back(net.send(r, "server", client_name(k), "encrypted_sum", out));
        auto p = net.receive("server", client_name(k));
        for (std::size_t i = 0; i < m; ++i) {
          BigInt h = mechanisms::paillier_decrypt(*key, mechanisms::from_bytes(p.data() + i * width, width));
          double v = mechanisms::fixed_point_decode(h, pc->scale_bits, pub.n) / static_cast<double>(K);
          if (k == 0) next[i] = v;
          else if (v != next[i]) throw Error(ErrorCode::kCiphertextInvalid, "clients decrypted different aggregates");
        }
      }
    } else {
      bool sparse = std::holds_alternative<mechanisms::Compression>(s.mechanism);
      if (s.codec == Codec::kFixed) {
        std::vector<std::uint64_t> total(m, 0);
        for (std::size_t k = 0; k < K; ++k) {
          auto w = plain.words(net.receive(client_name(k), "server"), m, sparse);
          for (std::size_t i = 0; i < m; ++i) total[i] += w[i];
        }
        for (std::size_t i = 0; i < m; ++i)
          next[i] = mechanisms::fix64_decode(static_cast<std::int64_t>(total[i]), s.codec_scale_bits) / static_cast<double>(K);
      } else {
        for (std::size_t k = 0; k < K; ++k) {
          Vec v = plain.decode(net.receive(client_name(k), "server"), m, sparse);
          for (std::size_t i = 0; i < m; ++i) next[i] += v[i];
        }
        for (double& v : next) v /= static_cast<double>(K);
      }
    }
    check_finite(next, "aggregate is not finite");
    if (!std::holds_alternative<mechanisms::PaillierConfig>(s.mechanism)) {
      std::vector<std::uint8_t> payload;
      for (double v : next) put_u64(payload, double_bits(v));
      for (std::size_t k = 0; k < K; ++k) {
        rec.messages.push_back(net.send(r, "server", client_name(k), "global", payload));
        net.receive("server", client_name(k));
      }
    }
    global = next;
    rec.global_model = global;
    ToyModel mg = model;
    mg.theta = global;
    for (std::size_t k = 0; k < K; ++k) rec.clients[k].utility = -mg.mean_loss(data.holdout[k]);
    trace.rounds.push_back(std::move(rec));
  }
  for (const auto& c : trace.rounds.back().clients) trace.final_utility.push_back(c.utility);
  trace.transport_bytes = net.bytes_written();
  for (const auto& rr : trace.rounds)
    for (const auto& msg : rr.messages) trace.recorded_bits += msg.bits;
  return trace;
}

// ---------------------------------------------------------------------------
// Vertical protocol

namespace {
// logits = top * (u1 + u2) in the split variant, u1 + u2 otherwise.
struct VerticalModel {
  std::size_t classes = 0, left = 0, right = 0;
  Vec left_w, right_w, top;  // row-major classes x cols
  bool split = false;

  Vec partial(const Vec& w, const double* x, std::size_t cols) const {
    Vec u(classes, 0.0);
    for (std::size_t c = 0; c < classes; ++c)
      for (std::size_t j = 0; j < cols; ++j) u[c] += w[c * cols + j] * x[j];
    return u;
  }
  Vec head(const Vec& sum) const {
    if (!split) return sum;
    Vec z(classes, 0.0);
    for (std::size_t a = 0; a < classes; ++a)
      for (std::size_t b = 0; b < classes; ++b) z[a] += top[a * classes + b] * sum[b];
    return z;
  }
  // Gradient with respect to the summed bottom output.
  Vec back(const Vec& g) const {
    if (!split) return g;
    Vec out(classes, 0.0);
    for (std::size_t a = 0; a < classes; ++a)
      for (std::size_t b = 0; b < classes; ++b) out[b] += top[a * classes + b] * g[a];
    return out;
  }
  double loss(const Dataset& left_d, const Dataset& right_d) const {
    double total = 0.0;
    for (std::size_t i = 0; i < left_d.size(); ++i) {
      Vec u = partial(left_w, left_d.row(i), left), v = partial(right_w, right_d.row(i), right);
      for (std::size_t c = 0; c < classes; ++c) u[c] += v[c];
      Vec z = head(u);
      double mx = *std::max_element(z.begin(), z.end()), sum = 0.0;
      for (double x : z) sum += std::exp(x - mx);
      total += mx + std::log(sum) - z[static_cast<std::size_t>(right_d.labels[i])];
    }
    return total / static_cast<double>(left_d.size());
  }
  Vec flat() const {
    Vec out = left_w;
    out.insert(out.end(), right_w.begin(), right_w.end());
    out.insert(out.end(), top.begin(), top.end());
    return out;
  }
};
}  // namespace

RoundTrace run_vfl(const FLScenario& s) {
  if (s.topology != Topology::kVertical) throw Error(ErrorCode::kInvalidConfig, "topology: expected vfl");
  s.validate();
  FederatedData data = synth_data(s);
  std::size_t cols = s.data.feature_split == 0 ? s.dim / 2 : s.data.feature_split;
  VerticalSplit train = split_features(data.train[0], cols);
  VerticalSplit hold = split_features(data.holdout[0], cols);
  const std::size_t n = train.label_side.size(), C = s.classes;
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::uint64_t mech_seed = derive_seed(s.master_seed, {kMechTag, s.replicate});
  const PlainCodec plain{s.codec, s.codec_scale_bits};

  VerticalModel vm;
  vm.classes = C;
  vm.left = cols;
  vm.right = s.dim - cols;
  vm.left_w.assign(C * vm.left, 0.0);
  vm.right_w.assign(C * vm.right, 0.0);
  vm.split = s.vfl_variant == VflVariant::kSplit;
  if (vm.split) {
    vm.top.assign(C * C, 0.0);
    for (std::size_t c = 0; c < C; ++c) vm.top[c * C + c] = 1.0;
  }

  RoundTrace trace;
  trace.scenario = s;
  trace.labels = train.label_side.labels;
  Transport net;
  for (std::size_t r = 0; r < s.rounds; ++r) {
    RoundRecord rec;
    rec.round = r;
    rec.clients.resize(2);
    // Feature side sends its partial logits.
    Vec u1;
    for (std::size_t i = 0; i < n; ++i) {
      Vec u = vm.partial(vm.left_w, train.feature_side.row(i), vm.left);
      u1.insert(u1.end(), u.begin(), u.end());
    }
    Message act = net.send(r, "client0", "client1", "activations", plain.dense(u1));
    rec.clients[0].upload_bits = act.bits;
    rec.messages.push_back(act);
    Vec u1_seen = plain.decode(net.receive("client0", "client1"), n * C, false);

    // Label side computes the loss and per-sample gradients.
    Vec g_bottom(n * C), g_top(n * C), sums(n * C);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Vec u2 = vm.partial(vm.right_w, train.label_side.row(i), vm.right);
      Vec sum(C);
      for (std::size_t c = 0; c < C; ++c) sum[c] = u1_seen[i * C + c] + u2[c];
      Vec p = models::softmax(vm.head(sum));
      auto y = static_cast<std::size_t>(train.label_side.labels[i]);
      loss -= std::log(std::max(p[y], 1e-300));
      p[y] -= 1.0;
      Vec gb = vm.back(p);
      for (std::size_t c = 0; c < C; ++c) {
        g_top[i * C + c] = p[c];
        g_bottom[i * C + c] = gb[c];
        sums[i * C + c] = sum[c];
      }
    }
    loss *= inv_n;
    if (!std::isfinite(loss)) throw Error(ErrorCode::kNonFiniteLoss, "training loss is not finite");
    rec.clients[1].train_loss = loss;

    auto w = mechanisms::ModelInfo::plain(g_bottom);
    const std::uint64_t seed = derive_seed(mech_seed, {r, 1});
    std::vector<std::uint8_t> payload;
    bool sparse = false;
    if (auto* rz = std::get_if<mechanisms::Randomization>(&s.mechanism)) {
      payload = plain.dense(mechanisms::randomize(w, rz->sigma, seed).values);
    } else if (auto* cp = std::get_if<mechanisms::Compression>(&s.mechanism)) {
      auto mask = mechanisms::draw_mask(cp->rho, w.values.size(), seed);
      payload = plain.sparse(mechanisms::apply_mask(w, mask).values, mask);
      sparse = true;
    } else {
      payload = plain.dense(w.values);
    }
    Message gm = net.send(r, "client1", "client0", "gradient", std::move(payload));
    rec.clients[1].upload_bits = gm.bits;
    rec.messages.push_back(gm);
    Vec g_seen = plain.decode(net.receive("client1", "client0"), n * C, sparse);
    check_finite(g_seen, "protected gradient is not finite");
    for (std::size_t i = 0; i < n; ++i) {
      rec.grad_original.emplace_back(g_bottom.begin() + static_cast<long>(i * C), g_bottom.begin() + static_cast<long>((i + 1) * C));
      rec.grad_protected.emplace_back(g_seen.begin() + static_cast<long>(i * C), g_seen.begin() + static_cast<long>((i + 1) * C));
    }

    // Updates with batch-mean gradients.
    for (std::size_t i = 0; i < n; ++i) {
      const double* xl = train.feature_side.row(i);
      const double* xr = train.label_side.row(i);
      for (std::size_t c = 0; c < C; ++c) {
        double a = s.lr * inv_n * g_seen[i * C + c], b = s.lr * inv_n * g_bottom[i * C + c];
        for (std::size_t j = 0; j < vm.left; ++j) vm.left_w[c * vm.left + j] -= a * xl[j];
        for (std::size_t j = 0; j < vm.right; ++j) vm.right_w[c * vm.right + j] -= b * xr[j];
        if (vm.split)
          for (std::size_t d = 0; d < C; ++d) vm.top[c * C + d] -= s.lr * inv_n * g_top[i * C + c] * sums[i * C + d];
      }
    }
    rec.global_model = vm.flat();
    check_finite(rec.global_model, "model is not finite");
    double u = -vm.loss(hold.feature_side, hold.label_side);
    rec.clients[0].utility = rec.clients[1].utility = u;
    trace.rounds.push_back(std::move(rec));
  }
  for (const auto& c : trace.rounds.back().clients) trace.final_utility.push_back(c.utility);
  trace.transport_bytes = net.bytes_written();
  for (const auto& rr : trace.rounds)
    for (const auto& msg : rr.messages) trace.recorded_bits += msg.bits;
  return trace;
}

RoundTrace run(const FLScenario& s) {
  return s.topology == Topology::kHorizontal ? run_hfl(s) : run_vfl(s);
}

std::vector<RoundTrace> run_replicates(const FLScenario& s, std::size_t replicates) {
  std::vector<RoundTrace> out;
  for (std::size_t r = 0; r < replicates; ++r) {
    FLScenario sr = s;
    sr.replicate = r;
    out.push_back(run(sr));
  }
  return out;
}

namespace {
Estimate summarize(const std::vector<Vec>& per_rep) {
  Estimate e;
  std::size_t R = per_rep.size(), K = per_rep.front().size();
  e.per_client.assign(K, 0.0);
  Vec sys(R, 0.0);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t k = 0; k < K; ++k) {
      e.per_client[k] += per_rep[r][k] / static_cast<double>(R);
      sys[r] += per_rep[r][k] / static_cast<double>(K);
    }
    e.system += sys[r] / static_cast<double>(R);
  }
  if (R >= 2) {
    double ss = 0.0;
    for (double v : sys) ss += (v - e.system) * (v - e.system);
    e.std_error = std::sqrt(ss / static_cast<double>(R - 1) / static_cast<double>(R));
  }
  return e;
}

void check_pairs(const std::vector<RoundTrace>& a, const std::vector<RoundTrace>& b) {
  if (a.empty() || a.size() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "replicate sets must be paired");
  for (std::size_t r = 0; r < a.size(); ++r)
    if (a[r].final_utility.size() != b[r].final_utility.size() || a[r].rounds.size() != b[r].rounds.size())
      throw Error(ErrorCode::kDimensionMismatch, "paired traces differ in shape");
}
}  // namespace

Estimate measure_utility_loss(const std::vector<RoundTrace>& prot, const std::vector<RoundTrace>& unprot) {
  if (prot.size() < 2) throw Error(ErrorCode::kReplicateCountTooSmall, "need at least 2 replicates");
  check_pairs(prot, unprot);
  std::vector<Vec> gaps;
  for (std::size_t r = 0; r < prot.size(); ++r) {
    Vec g(prot[r].final_utility.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = unprot[r].final_utility[k] - prot[r].final_utility[k];
    gaps.push_back(g);
  }
  return summarize(gaps);
}

Estimate measure_efficiency_reduction(const std::vector<RoundTrace>& prot, const std::vector<RoundTrace>& unprot) {
  check_pairs(prot, unprot);
  std::vector<Vec> diffs;
  for (std::size_t r = 0; r < prot.size(); ++r) {
    std::size_t K = prot[r].rounds.front().clients.size();
    Vec d(K, 0.0);
    for (std::size_t t = 0; t < prot[r].rounds.size(); ++t)
      for (std::size_t k = 0; k < K; ++k)
        d[k] += (static_cast<double>(prot[r].rounds[t].clients[k].upload_bits) -
                 static_cast<double>(unprot[r].rounds[t].clients[k].upload_bits)) /
                static_cast<double>(prot[r].rounds.size());
    diffs.push_back(d);
  }
  return summarize(diffs);
}

}  // namespace fedsim
}  // namespace nflfed
