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

#ifndef NFLFED_TWO_ATOM_HPP_
#define NFLFED_TWO_ATOM_HPP_

#include "nflfed/bounds.hpp"
#include "nflfed/mechanisms.hpp"

namespace nflfed {
namespace two_atom {

// One client whose private datum takes one of two values. The released scalar
// sits at 0 unprotected; the attacker reads it through a gaussian kernel
// centred on each candidate's typical release.
struct Params {
  double prior_first = 0.5;
  double center_second = 2.5;  // typical release of the second datum; first is 0
  double kernel_width = 1.0;
  double half_range = 4.0;
  double step = 1.0 / 16.0;
};

struct Scenario {
  Params params;
  divergence::QuadratureSpec quad;
  Vec grid;  // cell centres
  divergence::BeliefDistribution prior;
  divergence::ConditionalBelief kernel;
  Vec p_orig;
  Vec utility;  // -w^2
  Vec cost;     // bits of the quantized release plus a sign bit

  Vec protect(const mechanisms::MechanismConfig& cfg) const;
  bounds::EnumerableScenario enumerable(const Vec& p_prot) const;
  bounds::TradeoffReport evaluate(const mechanisms::MechanismConfig& cfg) const;
  bounds::Metrics metrics(const mechanisms::MechanismConfig& cfg) const;
};

Scenario make_scenario(const Params& params = {});

// Randomization strengths used by the reference sweep.
Vec reference_sigmas();

}  // namespace two_atom
}  // namespace nflfed

#endif  // NFLFED_TWO_ATOM_HPP_
