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

#ifndef NFLFED_FEDSIM_HPP_
#define NFLFED_FEDSIM_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nflfed/mechanisms.hpp"
#include "nflfed/models.hpp"

namespace nflfed {
namespace fedsim {

enum class Topology { kHorizontal, kVertical };
enum class Codec { kFloat64, kFixed };      // wire format of plain payloads
enum class VflVariant { kPlain, kSplit };   // kSplit adds a top model on the label side

struct DataSpec {
  std::size_t samples_per_client = 100;
  std::size_t holdout_per_client = 100;
  double noise = 0.1;
  // 0 gives every client a uniform class mix; 1 gives client k only class k mod classes.
  double label_skew = 0.0;
  // Class-1 probability for binary tasks; ignored otherwise when negative.
  double positive_rate = -1.0;
  std::size_t feature_split = 0;  // vertical: features held by the feature-side client
  std::uint64_t seed = 0;
};

struct FLScenario {
  Topology topology = Topology::kHorizontal;
  std::size_t clients = 1;
  models::ModelKind model = models::ModelKind::kLinearRegression;
  std::size_t dim = 4;
  std::size_t classes = 2;
  DataSpec data;
  mechanisms::MechanismConfig mechanism = mechanisms::Identity{};
  std::size_t rounds = 1;
  std::size_t local_steps = 1;
  double lr = 0.1;
  std::uint64_t master_seed = 0;
  std::size_t replicate = 0;
  Codec codec = Codec::kFloat64;
  int codec_scale_bits = 16;
  VflVariant vfl_variant = VflVariant::kPlain;

  void validate() const;
};

// Same scenario with protection switched off; fixed-point mechanisms keep
// their encoding so the comparison isolates the protection itself.
FLScenario unprotected_counterpart(const FLScenario& s);

struct FederatedData {
  std::vector<models::Dataset> train;    // one per client (horizontal) or one shared (vertical)
  std::vector<models::Dataset> holdout;  // same layout
};

models::Dataset synth_dataset(const FLScenario& s, std::size_t samples, std::size_t client,
                              std::uint64_t seed);
FederatedData synth_data(const FLScenario& s);

struct VerticalSplit {
  models::Dataset feature_side;  // first `feature_split` columns
  models::Dataset label_side;    // remaining columns with labels/targets
};
VerticalSplit split_features(const models::Dataset& d, std::size_t feature_cols);
models::Dataset join_features(const VerticalSplit& v);

struct Message {
  std::size_t round = 0;
  std::string from;
  std::string to;
  std::string kind;
  std::size_t bytes = 0;
  std::uint64_t bits = 0;
  std::uint64_t digest = 0;  // FNV-1a of the payload bytes
};

// In-process transport; one byte queue per directed edge.
class Transport {
 public:
  Message send(std::size_t round, const std::string& from, const std::string& to,
               const std::string& kind, std::vector<std::uint8_t> payload);
  std::vector<std::uint8_t> receive(const std::string& from, const std::string& to);
  std::uint64_t bytes_written() const { return bytes_written_; }

 private:
  struct Edge {
    std::string from, to;
    std::vector<std::vector<std::uint8_t>> queue;
  };
  std::vector<Edge> edges_;
  std::uint64_t bytes_written_ = 0;
};

struct ClientRound {
  Vec original;   // model information before protection
  Vec protected_; // decoded values as the receiver sees them (plaintext view)
  std::uint64_t upload_bits = 0;
  double train_loss = 0.0;
  double utility = 0.0;  // negative held-out loss after the round
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<ClientRound> clients;
  Vec global_model;       // horizontal: aggregate; vertical: both blocks concatenated
  Vec plaintext_aggregate;  // horizontal: float mean of unprotected updates
  std::vector<Message> messages;
  // Vertical only: per-sample logit gradients before and after protection.
  std::vector<Vec> grad_original;
  std::vector<Vec> grad_protected;
};

struct RoundTrace {
  FLScenario scenario;
  std::vector<RoundRecord> rounds;
  std::vector<int> labels;  // vertical: training labels in sample order
  Vec final_utility;        // per client
  std::uint64_t transport_bytes = 0;
  std::uint64_t recorded_bits = 0;
};

RoundTrace run_hfl(const FLScenario& s);
RoundTrace run_vfl(const FLScenario& s);
RoundTrace run(const FLScenario& s);
// Replicates share the data seed and draw fresh mechanism randomness.
std::vector<RoundTrace> run_replicates(const FLScenario& s, std::size_t replicates);

struct Estimate {
  Vec per_client;
  double system = 0.0;
  double std_error = 0.0;
};

// Mean of U(unprotected) - U(protected) at the final round over paired replicates.
Estimate measure_utility_loss(const std::vector<RoundTrace>& prot,
                              const std::vector<RoundTrace>& unprot);
// Mean per-round upload-bit difference per client.
Estimate measure_efficiency_reduction(const std::vector<RoundTrace>& prot,
                                      const std::vector<RoundTrace>& unprot);

// Wire helpers shared with tests.
void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v);
std::uint64_t get_varint(const std::vector<std::uint8_t>& in, std::size_t& pos);
std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n);

}  // namespace fedsim
}  // namespace nflfed

#endif  // NFLFED_FEDSIM_HPP_
