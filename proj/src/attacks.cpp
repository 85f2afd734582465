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

#include "nflfed/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nflfed {
namespace attacks {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double norm2(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Vec candidate_gradient(const models::ToyModel& m, const Candidate& d) {
  if (d.x.size() != m.dim) throw Error(ErrorCode::kDimensionMismatch, "candidate and model dims differ");
  return m.param_gradient(d.x.data(), d.target);
}
}  // namespace

double log_likelihood(const Likelihood& lik, const Vec& w, const Candidate& d) {
  if (auto* g = std::get_if<GaussianGradientMatch>(&lik)) {
    if (!(g->sigma > 0.0)) throw Error(ErrorCode::kLikelihoodUndefined, "sigma must be positive");
    Vec gd = candidate_gradient(g->model, d);
    if (gd.size() != w.size()) throw Error(ErrorCode::kDimensionMismatch, "observed gradient has wrong size");
    double s = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) s += (w[k] - gd[k]) * (w[k] - gd[k]);
    return -s / (2.0 * g->sigma * g->sigma);
  }
  if (auto* c = std::get_if<CosineGradientMatch>(&lik)) {
    Vec gd = candidate_gradient(c->model, d);
    if (gd.size() != w.size()) throw Error(ErrorCode::kDimensionMismatch, "observed gradient has wrong size");
    double a = norm2(w), b = norm2(gd);
    if (a == 0.0 || b == 0.0) throw Error(ErrorCode::kLikelihoodUndefined, "cosine of a zero vector");
    double dot = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) dot += w[k] * gd[k];
    return dot / (a * b);
  }
  if (auto* n = std::get_if<NormScoring>(&lik)) {
    auto cls = static_cast<std::size_t>(d.target);
    if (cls >= n->bins.size()) throw Error(ErrorCode::kLikelihoodUndefined, "no norm bin for class");
    double r = norm2(w);
    return (r >= n->bins[cls].first && r < n->bins[cls].second) ? 0.0 : kNegInf;
  }
  if (std::holds_alternative<SignBased>(lik)) {
    auto cls = static_cast<std::size_t>(d.target);
    if (cls >= w.size()) throw Error(ErrorCode::kLikelihoodUndefined, "label outside gradient");
    return w[cls] < 0.0 ? 0.0 : kNegInf;
  }
  const auto& custom = std::get<CustomLikelihood>(lik);
  if (!custom.log_likelihood) throw Error(ErrorCode::kLikelihoodUndefined, "empty likelihood");
  return custom.log_likelihood(w, d);
}

double log_prior(const Prior& prior, const Candidate& d) {
  if (std::holds_alternative<FlatPrior>(prior)) return 0.0;
  if (auto* l = std::get_if<LabelPrior>(&prior)) {
    auto cls = static_cast<std::size_t>(d.target);
    if (cls >= l->frequencies.size()) return kNegInf;
    return l->frequencies[cls] > 0.0 ? std::log(l->frequencies[cls]) : kNegInf;
  }
  if (auto* t = std::get_if<TotalVariationPrior>(&prior)) {
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < d.x.size(); ++j) s += std::fabs(d.x[j + 1] - d.x[j]);
    return -t->weight * s;
  }
  const auto& c = std::get<CustomPrior>(prior);
  return c.log_prior ? c.log_prior(d) : 0.0;
}

AttackResult bayesian_map_attack(const AttackSpec& spec, const Vec& observed_w,
                                 std::optional<std::size_t> truth) {
  const auto& grid = spec.candidate_grid;
  if (grid.empty()) throw Error(ErrorCode::kEmptyGrid, "candidate grid is empty");
  AttackResult res;
  res.score_trace.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double s = log_likelihood(spec.likelihood, observed_w, grid[i]) + log_prior(spec.prior, grid[i]);
    if (std::isnan(s)) throw Error(ErrorCode::kLikelihoodUndefined, "score is NaN");
    res.score_trace[i] = s;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (res.score_trace[i] > res.score_trace[best]) best = i;
  double top = res.score_trace[best];
  if (!std::isfinite(top))
    throw Error(ErrorCode::kLikelihoodUndefined, "no candidate has finite posterior score");
  Vec w(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) w[i] = std::exp(res.score_trace[i] - top);
  std::vector<divergence::Point> support(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) support[i] = {static_cast<double>(i)};
  res.posterior = divergence::BeliefDistribution::from_weights(support, w);
  res.map_index = best;
  res.map_estimate = grid[best];
  if (truth) res.success = grid.at(*truth) == grid[best];
  return res;
}

std::size_t direct_label_inference(const Vec& g) {
  if (g.empty()) throw Error(ErrorCode::kEmptyInput, "empty gradient");
  std::size_t best = static_cast<std::size_t>(std::min_element(g.begin(), g.end()) - g.begin());
  if (!(g[best] < 0.0))
    throw Error(ErrorCode::kNoNegativeCoordinate, "logit gradient has no negative coordinate");
  return best;
}

NormScoringResult norm_scoring_attack(const std::vector<Vec>& grads,
                                      const std::vector<int>& calib) {
  if (grads.size() != calib.size()) throw Error(ErrorCode::kDimensionMismatch, "labels and gradients differ in count");
  double sum[2] = {0.0, 0.0};
  std::size_t cnt[2] = {0, 0};
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (calib[i] < 0) continue;
    if (calib[i] > 1) throw Error(ErrorCode::kInvalidSpec, "norm scoring is binary");
    sum[calib[i]] += norm2(grads[i]);
    ++cnt[calib[i]];
  }
  if (cnt[0] == 0 || cnt[1] == 0)
    throw Error(ErrorCode::kDegenerateCalibration, "calibration set lacks one class");
  double m0 = sum[0] / static_cast<double>(cnt[0]), m1 = sum[1] / static_cast<double>(cnt[1]);
  NormScoringResult res;
  res.threshold = 0.5 * (m0 + m1);
  res.high_class = m1 >= m0 ? 1 : 0;
  int majority = cnt[1] > cnt[0] ? 1 : 0;
  bool informative = std::fabs(m1 - m0) > 1e-12 * std::max(1.0, std::fabs(res.threshold));
  res.predictions.resize(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!informative) {
      res.predictions[i] = majority;
      continue;
    }
    bool above = norm2(grads[i]) > res.threshold;
    res.predictions[i] = above ? res.high_class : 1 - res.high_class;
  }
  return res;
}

DlgResult dlg_gradient_match(const Vec& observed, const models::ToyModel& model,
                             const Candidate& init, const DlgOptions& opt) {
  if (observed.size() != model.num_params())
    throw Error(ErrorCode::kDimensionMismatch, "observed gradient has wrong size");
  if (init.x.size() != model.dim) throw Error(ErrorCode::kDimensionMismatch, "initial candidate has wrong size");
  DlgResult res;
  res.estimate = init;
  bool regress = model.kind == models::ModelKind::kLinearRegression;
  Vec gx;
  double gt = 0.0;
  for (std::size_t step = 0; step < opt.steps; ++step) {
    double j = model.match_objective(observed, res.estimate.x, res.estimate.target);
    if (!std::isfinite(j)) throw Error(ErrorCode::kNonFiniteLoss, "gradient matching diverged");
    if (j <= opt.tolerance) break;
    model.match_gradient(observed, res.estimate.x, res.estimate.target, gx, gt);
    double gnorm = 0.0;
    if (opt.optimize_x)
      for (double v : gx) gnorm += v * v;
    if (opt.optimize_target && regress) gnorm += gt * gt;
    if (gnorm <= opt.tolerance * opt.tolerance) break;
    if (opt.optimize_x)
      for (std::size_t k = 0; k < gx.size(); ++k) res.estimate.x[k] -= opt.lr * gx[k];
    if (opt.optimize_target && regress) res.estimate.target -= opt.lr * gt;
    res.steps_taken = step + 1;
  }
  res.residual = model.match_objective(observed, res.estimate.x, res.estimate.target);
  if (!std::isfinite(res.residual)) throw Error(ErrorCode::kNonFiniteLoss, "gradient matching diverged");
  return res;
}

AttackResult dlg_grid(const Vec& observed, const models::ToyModel& model,
                      const std::vector<Candidate>& grid) {
  AttackSpec spec;
  spec.likelihood = GaussianGradientMatch{1.0, model};
  spec.prior = FlatPrior{};
  spec.candidate_grid = grid;
  return bayesian_map_attack(spec, observed);
}

double confusion_leakage(const std::vector<int>& truth, const std::vector<int>& predicted,
                         std::size_t classes) {
  if (truth.empty()) throw Error(ErrorCode::kEmptyInput, "no attack outcomes");
  if (truth.size() != predicted.size()) throw Error(ErrorCode::kDimensionMismatch, "truth and predictions differ in count");
  // Row `classes` collects samples the attack could not label.
  std::vector<Vec> counts(classes + 1, Vec(classes, 0.0));
  Vec prior(classes, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || static_cast<std::size_t>(truth[i]) >= classes)
      throw Error(ErrorCode::kInvalidSpec, "label outside the class range");
    std::size_t p = predicted[i] < 0 || static_cast<std::size_t>(predicted[i]) >= classes
                        ? classes
                        : static_cast<std::size_t>(predicted[i]);
    counts[p][static_cast<std::size_t>(truth[i])] += 1.0;
    prior[static_cast<std::size_t>(truth[i])] += 1.0;
  }
  double n = static_cast<double>(truth.size());
  for (double& v : prior) v /= n;
  double total = 0.0;
  for (const auto& row : counts) {
    double m = 0.0;
    for (double v : row) m += v;
    if (m == 0.0) continue;
    Vec belief(classes);
    for (std::size_t c = 0; c < classes; ++c) belief[c] = row[c] / m;
    total += m * std::sqrt(divergence::js_pmf(belief, prior));
  }
  return total / n;
}

divergence::BeliefDistribution empirical_posterior(const mechanisms::DiscreteChannel& channel,
                                                   const divergence::BeliefDistribution& prior,
                                                   const LikelihoodTable& lik,
                                                   const Vec& p_orig) {
  std::size_t nd = prior.size(), nw = p_orig.size();
  if (lik.rows.size() != nd) throw Error(ErrorCode::kMisalignedSupport, "likelihood rows must match the prior");
  if (channel.size() != nw) throw Error(ErrorCode::kMisalignedSupport, "channel does not match the w grid");
  for (const auto& r : lik.rows)
    if (r.size() != nw) throw Error(ErrorCode::kMisalignedSupport, "likelihood row has wrong length");
  Vec p_prot = channel.push(p_orig);
  std::size_t nout = p_prot.size();
  // Protected likelihood P(w^S | d) = sum_w M(w^S | w) P(w | d).
  std::vector<Vec> lik_prot(nd);
  for (std::size_t d = 0; d < nd; ++d) lik_prot[d] = channel.push(lik.rows[d]);
  Vec out(nd, 0.0);
  for (std::size_t j = 0; j < nout; ++j) {
    if (p_prot[j] <= 0.0) continue;
    double z = 0.0;
    for (std::size_t d = 0; d < nd; ++d) z += prior.mass()[d] * lik_prot[d][j];
    if (!(z > 0.0)) throw Error(ErrorCode::kLikelihoodUndefined, "observed value impossible under every candidate");
    for (std::size_t d = 0; d < nd; ++d) out[d] += p_prot[j] * prior.mass()[d] * lik_prot[d][j] / z;
  }
  return divergence::BeliefDistribution::from_weights(prior.support(), out);
}

divergence::BeliefDistribution empirical_posterior(const mechanisms::MechanismConfig& cfg,
                                                   const divergence::BeliefDistribution& prior,
                                                   const LikelihoodTable& lik, const Vec& p_orig,
                                                   const divergence::QuadratureSpec& quad) {
  return empirical_posterior(mechanisms::channel_on_grid(cfg, quad), prior, lik, p_orig);
}

}  // namespace attacks
}  // namespace nflfed
