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

#include "nflfed/two_atom.hpp"

#include <bit>
#include <cmath>
#include <cstdint>

namespace nflfed {
namespace two_atom {

Scenario make_scenario(const Params& params) {
  if (!(params.prior_first > 0.0 && params.prior_first < 1.0))
    throw Error(ErrorCode::kInvalidSpec, "prior_first must lie in (0, 1)");
  if (!(params.kernel_width > 0.0) || !(params.step > 0.0) || !(params.half_range > 0.0))
    throw Error(ErrorCode::kInvalidSpec, "kernel_width, step and half_range must be positive");
  Scenario s;
  s.params = params;
  auto cells = static_cast<std::size_t>(std::llround(2.0 * params.half_range / params.step)) + 1;
  double pad = 0.5 * params.step;
  s.quad = divergence::QuadratureSpec{{-params.half_range - pad}, {params.half_range + pad}, {cells}, true};
  s.quad.validate();
  std::vector<divergence::Point> centers = s.quad.centers();
  std::vector<divergence::Point> data{{0.0}, {1.0}};
  Vec prior{params.prior_first, 1.0 - params.prior_first};
  s.prior = divergence::BeliefDistribution(data, prior);
  std::vector<divergence::BeliefDistribution> rows;
  double inv = 1.0 / (2.0 * params.kernel_width * params.kernel_width);
  for (const auto& c : centers) {
    double w = c[0];
    s.grid.push_back(w);
    double a = -w * w * inv;
    double b = -(w - params.center_second) * (w - params.center_second) * inv;
    double m = std::max(a, b);
    rows.push_back(divergence::BeliefDistribution::from_weights(
        data, {prior[0] * std::exp(a - m), prior[1] * std::exp(b - m)}));
    s.utility.push_back(-w * w);
    auto q = static_cast<std::uint64_t>(std::llabs(std::llround(w / params.step)));
    s.cost.push_back(static_cast<double>(std::bit_width(q)) + 1.0);
  }
  s.kernel = divergence::ConditionalBelief(centers, std::move(rows));
  auto origin = divergence::cell_masses(divergence::ModelInfoDistribution::point_mass({0.0}), s.quad);
  s.p_orig = origin.mass;
  return s;
}

Vec Scenario::protect(const mechanisms::MechanismConfig& cfg) const {
  return mechanisms::channel_on_grid(cfg, quad).push(p_orig);
}

bounds::EnumerableScenario Scenario::enumerable(const Vec& p_prot) const {
  bounds::EnumerableScenario e;
  e.clients.push_back(bounds::EnumerableClient{prior, kernel, p_orig, p_prot, cost});
  e.fed = bounds::EnumerableFederation{p_orig, p_prot, utility};
  return e;
}

bounds::TradeoffReport Scenario::evaluate(const mechanisms::MechanismConfig& cfg) const {
  return bounds::evaluate(enumerable(protect(cfg)));
}

bounds::Metrics Scenario::metrics(const mechanisms::MechanismConfig& cfg) const {
  auto r = evaluate(cfg);
  return bounds::Metrics{r.epsilon_p, r.epsilon_u, r.epsilon_e};
}

Vec reference_sigmas() { return {0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0}; }

}  // namespace two_atom
}  // namespace nflfed
