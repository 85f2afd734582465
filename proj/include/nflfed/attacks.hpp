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

#ifndef NFLFED_ATTACKS_HPP_
#define NFLFED_ATTACKS_HPP_

#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "nflfed/divergence.hpp"
#include "nflfed/mechanisms.hpp"
#include "nflfed/models.hpp"

namespace nflfed {
namespace attacks {

// A private-data candidate: features plus regression target or class label.
struct Candidate {
  Vec x;
  double target = 0.0;
  bool operator==(const Candidate& o) const { return x == o.x && target == o.target; }
};

// -1/(2 sigma^2) ||w - grad(d)||^2
struct GaussianGradientMatch {
  double sigma = 1.0;
  models::ToyModel model;
};
// cosine similarity between w and grad(d)
struct CosineGradientMatch {
  models::ToyModel model;
};
// log 1{||w|| in bin of the candidate's class}
struct NormScoring {
  std::vector<std::pair<double, double>> bins;
};
// log 1{w[label] < 0}, w being a logit gradient
struct SignBased {};
struct CustomLikelihood {
  std::function<double(const Vec& w, const Candidate& d)> log_likelihood;
};
using Likelihood =
    std::variant<GaussianGradientMatch, CosineGradientMatch, NormScoring, SignBased, CustomLikelihood>;

struct FlatPrior {};
struct LabelPrior {
  Vec frequencies;
};
// -weight * sum_j |x[j+1] - x[j]|
struct TotalVariationPrior {
  double weight = 0.0;
};
struct CustomPrior {
  std::function<double(const Candidate& d)> log_prior;
};
using Prior = std::variant<FlatPrior, LabelPrior, TotalVariationPrior, CustomPrior>;

struct AttackSpec {
  Likelihood likelihood = SignBased{};
  Prior prior = FlatPrior{};
  std::vector<Candidate> candidate_grid;
};

struct AttackResult {
  std::size_t map_index = 0;
  Candidate map_estimate;
  divergence::BeliefDistribution posterior;  // over candidate indices
  std::optional<bool> success;
  Vec score_trace;  // log-likelihood plus log-prior per candidate
};

double log_likelihood(const Likelihood& lik, const Vec& w, const Candidate& d);
double log_prior(const Prior& prior, const Candidate& d);

// Exhaustive MAP over the candidate grid; ties go to the lowest index.
AttackResult bayesian_map_attack(const AttackSpec& spec, const Vec& observed_w,
                                 std::optional<std::size_t> truth = std::nullopt);

std::size_t direct_label_inference(const Vec& logit_gradient);

struct NormScoringResult {
  double threshold = 0.0;
  int high_class = 1;  // class predicted above the threshold
  std::vector<int> predictions;
};
// calibration_labels[i] is 0/1 for calibration samples and -1 otherwise.
NormScoringResult norm_scoring_attack(const std::vector<Vec>& cut_gradients,
                                      const std::vector<int>& calibration_labels);

struct DlgOptions {
  std::size_t steps = 1000;
  double lr = 0.01;
  bool optimize_x = true;
  bool optimize_target = true;  // ignored for classifiers
  double tolerance = 1e-14;
};
struct DlgResult {
  Candidate estimate;
  double residual = 0.0;  // final ||w - grad(d)||^2
  std::size_t steps_taken = 0;
};
DlgResult dlg_gradient_match(const Vec& observed_grad, const models::ToyModel& model,
                             const Candidate& init, const DlgOptions& opt = {});
// Grid variant: MAP with a unit-temperature gaussian match and flat prior.
AttackResult dlg_grid(const Vec& observed_grad, const models::ToyModel& model,
                      const std::vector<Candidate>& grid);

// Leakage estimated from labelled attack outcomes: each sample's belief is
// the empirical label distribution among samples sharing its prediction,
// compared with the empirical label frequencies. Returns the mean sqrt-JS.
double confusion_leakage(const std::vector<int>& truth, const std::vector<int>& predicted,
                         std::size_t classes);

// P(w | d) tabulated on discrete model-info points; rows indexed by d.
struct LikelihoodTable {
  std::vector<Vec> rows;
};
// Attacker belief after seeing protected information, accounting for the
// mechanism: posterior under the composed likelihood, averaged over P^S.
divergence::BeliefDistribution empirical_posterior(const mechanisms::DiscreteChannel& channel,
                                                   const divergence::BeliefDistribution& prior,
                                                   const LikelihoodTable& likelihood,
                                                   const Vec& p_orig);
divergence::BeliefDistribution empirical_posterior(const mechanisms::MechanismConfig& cfg,
                                                   const divergence::BeliefDistribution& prior,
                                                   const LikelihoodTable& likelihood,
                                                   const Vec& p_orig,
                                                   const divergence::QuadratureSpec& quad);

}  // namespace attacks
}  // namespace nflfed

#endif  // NFLFED_ATTACKS_HPP_
