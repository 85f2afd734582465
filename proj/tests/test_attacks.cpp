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
#include <limits>

#include "nflfed/attacks.hpp"

using namespace nflfed;
using namespace nflfed::attacks;

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

std::size_t brute_argmax(const AttackSpec& spec, const Vec& w) {
  std::size_t best = 0;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.candidate_grid.size(); ++i) {
    double s = log_likelihood(spec.likelihood, w, spec.candidate_grid[i]) + log_prior(spec.prior, spec.candidate_grid[i]);
    if (s > top) top = s, best = i;
  }
  return best;
}
}  // namespace

TEST_CASE("map attack matches a brute force argmax") {
  Rng rng(5);
  std::normal_distribution<double> z(0.0, 1.0);
  auto model = models::ToyModel::softmax_linear(2, 3, {0.5, -0.2, 0.1, 0.3, -0.4, 0.2});
  for (int t = 0; t < 30; ++t) {
    AttackSpec spec;
    spec.likelihood = GaussianGradientMatch{0.5 + t * 0.1, model};
    if (t % 3 == 1) spec.prior = LabelPrior{{0.2, 0.5, 0.3}};
    if (t % 3 == 2) spec.prior = TotalVariationPrior{0.7};
    for (int i = 0; i < 12; ++i) spec.candidate_grid.push_back({{z(rng), z(rng)}, static_cast<double>(i % 3)});
    const auto& truth = spec.candidate_grid[static_cast<std::size_t>(t % 12)];
    Vec w = model.param_gradient(truth.x.data(), truth.target);
    for (double& v : w) v += 0.05 * z(rng);
    auto res = bayesian_map_attack(spec, w, static_cast<std::size_t>(t % 12));
    CHECK(res.map_index == brute_argmax(spec, w));
    CHECK(res.map_estimate == spec.candidate_grid[res.map_index]);
    double mass = 0.0;
    for (double m : res.posterior.mass()) mass += m;
    CHECK(mass == doctest::Approx(1.0));
  }
}

TEST_CASE("map attack tie and failure rules") {
  AttackSpec spec;
  spec.likelihood = CustomLikelihood{[](const Vec&, const Candidate&) { return 0.0; }};
  spec.candidate_grid = {{{1.0}, 0}, {{2.0}, 0}, {{3.0}, 0}};
  CHECK(bayesian_map_attack(spec, {0.0}).map_index == 0);
  spec.likelihood = CustomLikelihood{[](const Vec&, const Candidate&) { return -std::numeric_limits<double>::infinity(); }};
  CHECK(code_of([&] { bayesian_map_attack(spec, {0.0}); }) == ErrorCode::kLikelihoodUndefined);
  spec.candidate_grid.clear();
  CHECK(code_of([&] { bayesian_map_attack(spec, {0.0}); }) == ErrorCode::kEmptyGrid);
}

TEST_CASE("sign based likelihood and direct label inference") {
  Vec p = models::softmax({0.3, -1.0, 2.0, 0.1});
  p[1] -= 1.0;
  CHECK(direct_label_inference(p) == 1);
  CHECK(code_of([] { direct_label_inference({0.1, 0.2}); }) == ErrorCode::kNoNegativeCoordinate);
  AttackSpec spec;
  spec.likelihood = SignBased{};
  for (int c = 0; c < 4; ++c) spec.candidate_grid.push_back({{}, static_cast<double>(c)});
  CHECK(bayesian_map_attack(spec, p).map_index == 1);
}

TEST_CASE("norm scoring separates classes by gradient norm") {
  std::vector<Vec> g;
  std::vector<int> calib;
  for (int i = 0; i < 40; ++i) {
    bool pos = i % 5 == 0;
    g.push_back({pos ? 3.0 + 0.01 * i : 0.5 + 0.001 * i});
    calib.push_back(i < 10 ? (pos ? 1 : 0) : -1);
  }
  auto res = norm_scoring_attack(g, calib);
  CHECK(res.high_class == 1);
  for (int i = 0; i < 40; ++i) CHECK(res.predictions[static_cast<std::size_t>(i)] == (i % 5 == 0 ? 1 : 0));
  std::vector<int> one_class(40, -1);
  one_class[1] = 0;
  CHECK(code_of([&] { norm_scoring_attack(g, one_class); }) == ErrorCode::kDegenerateCalibration);
}

TEST_CASE("gradient matching derivative against finite differences") {
  Rng rng(8);
  std::normal_distribution<double> z(0.0, 1.0);
  auto reg = models::ToyModel::linear_regression({0.4, -0.7, 1.1});
  auto cls = models::ToyModel::softmax_linear(3, 4, {});
  for (double& t : cls.theta) t = z(rng);
  for (const auto* m : {&reg, &cls}) {
    Vec obs(m->num_params());
    for (double& v : obs) v = z(rng);
    Vec x{z(rng), z(rng), z(rng)};
    double target = m == &reg ? 0.3 : 2.0;
    Vec gx;
    double gt = 0.0;
    m->match_gradient(obs, x, target, gx, gt);
    const double h = 1e-6;
    for (std::size_t k = 0; k < 3; ++k) {
      Vec xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      double fd = (m->match_objective(obs, xp, target) - m->match_objective(obs, xm, target)) / (2 * h);
      CHECK(gx[k] == doctest::Approx(fd).epsilon(1e-6));
    }
    if (m == &reg) {
      double fd = (m->match_objective(obs, x, target + h) - m->match_objective(obs, x, target - h)) / (2 * h);
      CHECK(gt == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("gradient matching recovers a classifier input") {
  auto model = models::ToyModel::softmax_linear(3, 3, {0.3, -0.1, 0.2, -0.4, 0.5, 0.1, 0.2, 0.2, -0.3});
  Vec x{0.8, -0.5, 1.2};
  Vec obs = model.param_gradient(x.data(), 2.0);
  DlgOptions opt;
  opt.steps = 20000;
  opt.lr = 0.1;
  opt.tolerance = 1e-20;
  auto res = dlg_gradient_match(obs, model, {{0.1, 0.1, 0.1}, 2.0}, opt);
  CHECK(res.residual < 1e-12);
  for (std::size_t k = 0; k < 3; ++k) CHECK(res.estimate.x[k] == doctest::Approx(x[k]).epsilon(1e-4));
  std::vector<Candidate> grid{{{0.8, -0.5, 1.2}, 2.0}, {{0.8, -0.5, 1.2}, 0.0}, {{0.0, 0.0, 1.0}, 2.0}};
  CHECK(dlg_grid(obs, model, grid).map_index == 0);
}

// Flip channel with probability 0.2 on two values, identity likelihood,
// uniform prior, true value 1. By hand: 0.2 * (0.8, 0.2) + 0.8 * (0.2, 0.8).
TEST_CASE("empirical posterior accounts for the mechanism") {
  mechanisms::DiscreteChannel flip{{{0.8, 0.2}, {0.2, 0.8}}};
  auto prior = divergence::BeliefDistribution::over_indices({0.5, 0.5});
  LikelihoodTable lik{{{1.0, 0.0}, {0.0, 1.0}}};
  auto post = empirical_posterior(flip, prior, lik, {0.0, 1.0});
  CHECK(post.mass()[0] == doctest::Approx(0.32));
  CHECK(post.mass()[1] == doctest::Approx(0.68));
  auto same = empirical_posterior(mechanisms::DiscreteChannel::constant(2, 0), prior, lik, {0.0, 1.0});
  CHECK(same.mass()[0] == doctest::Approx(0.5));
}

TEST_CASE("confusion leakage") {
  std::vector<int> truth{0, 1, 0, 1, 1, 0, 1, 1};
  Vec prior{3.0 / 8.0, 5.0 / 8.0};
  double perfect = attacks::confusion_leakage(truth, truth, 2);
  double want = (3.0 * std::sqrt(divergence::js_pmf({1.0, 0.0}, prior)) + 5.0 * std::sqrt(divergence::js_pmf({0.0, 1.0}, prior))) / 8.0;
  CHECK(perfect == doctest::Approx(want));
  CHECK(attacks::confusion_leakage(truth, std::vector<int>(8, 1), 2) == doctest::Approx(0.0));
  CHECK(attacks::confusion_leakage(truth, std::vector<int>(8, -1), 2) == doctest::Approx(0.0));
}

TEST_CASE("scaling the evidence keeps the map choice under a flat prior") {
  Rng rng(31);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    Vec table(12);
    for (double& v : table) v = z(rng);
    AttackSpec spec;
    for (int i = 0; i < 12; ++i) spec.candidate_grid.push_back({{}, static_cast<double>(i)});
    spec.likelihood = CustomLikelihood{[&](const Vec&, const Candidate& d) { return table[static_cast<std::size_t>(d.target)]; }};
    auto base = bayesian_map_attack(spec, {});
    for (double c : {0.1, 3.0, 50.0}) {
      spec.likelihood =
          CustomLikelihood{[&, c](const Vec&, const Candidate& d) { return c * table[static_cast<std::size_t>(d.target)]; }};
      CHECK(bayesian_map_attack(spec, {}).map_index == base.map_index);
    }
  }
}

TEST_CASE("identity channel posterior is the normalized likelihood") {
  Rng rng(5);
  std::gamma_distribution<double> g(1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    LikelihoodTable lik;
    for (int d = 0; d < 3; ++d) {
      Vec row(4);
      double total = 0.0;
      for (double& v : row) total += (v = g(rng));
      for (double& v : row) v /= total;
      lik.rows.push_back(row);
    }
    std::size_t seen = static_cast<std::size_t>(t % 4);
    Vec p_orig(4, 0.0);
    p_orig[seen] = 1.0;
    auto flat = divergence::BeliefDistribution::over_indices({1.0 / 3, 1.0 / 3, 1.0 / 3});
    auto post = empirical_posterior(mechanisms::DiscreteChannel::identity(4), flat, lik, p_orig);
    double s = lik.rows[0][seen] + lik.rows[1][seen] + lik.rows[2][seen];
    for (std::size_t d = 0; d < 3; ++d) CHECK(post.mass()[d] == doctest::Approx(lik.rows[d][seen] / s));
    // Leakage of any posterior is capped by sqrt(ln 2).
    auto noisy = empirical_posterior(mechanisms::DiscreteChannel{{{0.7, 0.1, 0.1, 0.1}, {0.1, 0.7, 0.1, 0.1},
                                                                   {0.1, 0.1, 0.7, 0.1}, {0.1, 0.1, 0.1, 0.7}}},
                                     flat, lik, p_orig);
    CHECK(divergence::bayesian_privacy_leakage(flat, noisy) <= std::sqrt(std::log(2.0)));
    CHECK(divergence::bayesian_privacy_leakage(flat, post) <= std::sqrt(std::log(2.0)));
  }
}
