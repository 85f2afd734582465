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

#ifndef NFLFED_BOUNDS_HPP_
#define NFLFED_BOUNDS_HPP_

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nflfed/divergence.hpp"
#include "nflfed/mechanisms.hpp"

namespace nflfed {
namespace bounds {

struct NflConstants {
  double xi = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  std::optional<double> delta;
  std::optional<double> xi_cap;
  std::optional<double> gamma_cap;
  double gamma_ratio = 0.0;
  std::optional<double> c_d;  // absent when delta is
  std::optional<double> c_x;  // absent when xi_cap/gamma_cap are
};

double c2_from_xi(double xi);
// Fills c2, c_d, c_x from the primary quantities.
NflConstants make_constants(double xi, double c1, std::optional<double> delta,
                            std::optional<double> xi_cap, std::optional<double> gamma_cap,
                            double gamma_ratio);

// max |log f(d|w) / f(d)| over the kernel rows (optionally only rows with
// used[w] set) and the prior support.
double xi_constant(const divergence::ConditionalBelief& kernel,
                   const divergence::BeliefDistribution& prior,
                   const std::vector<bool>& used = {});
double c1_constant(const std::vector<divergence::BeliefDistribution>& priors,
                   const std::vector<divergence::BeliefDistribution>& unprotected_posteriors);

struct DeltaEstimate {
  std::optional<double> delta;
  std::string reason;  // set when the assumption fails
  double tv = 0.0;
};
// Pmfs and utility values on a shared set of model-info points.
DeltaEstimate delta_estimate(const Vec& utility, const Vec& p_s_fed, const Vec& p_o_fed,
                             double tolerance = 1e-6);
DeltaEstimate delta_estimate(const std::function<double(const divergence::Point&)>& utility,
                             const divergence::ModelInfoDistribution& p_s_fed,
                             const divergence::ModelInfoDistribution& p_o_fed,
                             const divergence::QuadratureSpec& grid, double tolerance = 1e-6);

struct XiGammaEstimate {
  std::optional<double> xi_cap;
  std::optional<double> gamma_cap;
  std::string reason;
  double tv = 0.0;
};
XiGammaEstimate xi_gamma_estimate(const Vec& cost, const Vec& p_o, const Vec& p_s);
XiGammaEstimate xi_gamma_estimate(const std::function<double(const divergence::Point&)>& cost,
                                  const divergence::ModelInfoDistribution& p_o,
                                  const divergence::ModelInfoDistribution& p_s,
                                  const divergence::QuadratureSpec& grid);

enum class CheckStatus { kSatisfied, kViolated, kNotApplicable };
const char* check_status_name(CheckStatus s);

struct BoundCheck {
  std::string name;
  CheckStatus status = CheckStatus::kNotApplicable;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // lhs - rhs
};

struct NflChecks {
  BoundCheck privacy_efficiency;  // eps_p + C_x eps_e >= C1
  BoundCheck privacy_utility;     // eps_p + C_d eps_u >= C1
  BoundCheck full_nfl;            // eps_p + C_d/2 eps_u + C_x/2 eps_e >= C1
};
NflChecks nfl_check(double eps_p, double eps_u, double eps_e, const NflConstants& c);

// ---------------------------------------------------------------------------
// Enumerable scenarios: every distribution is a pmf on a finite point set.

struct EnumerableClient {
  divergence::BeliefDistribution prior;  // over private data
  divergence::ConditionalBelief kernel;  // rows over model-info points
  Vec p_orig;                            // over kernel rows
  Vec p_prot;
  Vec cost;  // communication cost per model-info point; empty when unknown
};

struct EnumerableFederation {
  Vec p_orig;
  Vec p_prot;
  Vec utility;
};

struct EnumerableScenario {
  std::vector<EnumerableClient> clients;
  std::optional<EnumerableFederation> fed;
};

struct TradeoffReport {
  double epsilon_p = 0.0;
  double epsilon_u = 0.0;
  double epsilon_e = 0.0;
  Vec epsilon_p_per_client;
  Vec epsilon_e_per_client;
  Vec c1_per_client;
  Vec xi_per_client;
  Vec tv_per_client;
  double tv_fed = 0.0;
  NflConstants constants;
  std::string delta_reason;
  std::string xi_gamma_reason;
  NflChecks checks;
};

// Unprotected and attacker beliefs of a client: sum_w f(d|w) P(w).
divergence::BeliefDistribution unprotected_belief(const EnumerableClient& c);
divergence::BeliefDistribution protected_belief(const EnumerableClient& c);

TradeoffReport evaluate(const EnumerableScenario& s);

// ---------------------------------------------------------------------------
// Closed-form mechanism lower bounds.

struct BoundValue {
  double raw = 0.0;
  double clamped = 0.0;  // max(0, raw)
};

enum class RandomizationVariant { kStated, kConservative };

struct MechanismBoundInputs {
  double c1 = 0.0;
  double c2 = 0.0;
  std::optional<double> delta;
  std::optional<double> xi_gamma;  // product of the two efficiency constants
  std::size_t dims = 1;
  Vec sigma0;  // per-dimension std of the unprotected gaussian (randomization)
};

// 1 - (2 delta / n^2)^m for a Paillier configuration, computed in log space.
double paillier_distortion(const mechanisms::PaillierConfig& cfg, std::size_t dims);
double secret_sharing_distortion(const mechanisms::SecretSharing& cfg, std::size_t dims);
double compression_distortion(const mechanisms::Compression& cfg, std::size_t dims);

BoundValue mechanism_privacy_bound(const mechanisms::MechanismConfig& cfg,
                                   const MechanismBoundInputs& in,
                                   RandomizationVariant variant = RandomizationVariant::kStated);
double mechanism_utility_bound(const mechanisms::MechanismConfig& cfg, const MechanismBoundInputs& in);
// nullopt when no efficiency bound exists for the mechanism.
std::optional<double> mechanism_efficiency_bound(const mechanisms::MechanismConfig& cfg,
                                                 const MechanismBoundInputs& in);

// ---------------------------------------------------------------------------
// Protector's constrained choice over a finite configuration grid.

struct Metrics {
  double epsilon_p = 0.0;
  double epsilon_u = 0.0;
  double epsilon_e = 0.0;
};

struct OptimizeRow {
  Metrics metrics;
  double objective = 0.0;
  bool feasible = false;
};

struct OptimizeResult {
  std::size_t best = 0;
  mechanisms::MechanismConfig config;
  Metrics metrics;
  double objective = 0.0;
  std::vector<OptimizeRow> rows;
};

using Evaluator = std::function<Metrics(const mechanisms::MechanismConfig&)>;

OptimizeResult protector_optimize(const std::vector<mechanisms::MechanismConfig>& grid,
                                  const Evaluator& evaluate, double eta_u, double eta_e,
                                  double chi, std::optional<double> phi = std::nullopt);

}  // namespace bounds
}  // namespace nflfed

#endif  // NFLFED_BOUNDS_HPP_
