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

#include "nflfed/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace nflfed {
namespace bounds {

using divergence::BeliefDistribution;
using divergence::ConditionalBelief;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSlack = 1e-9;

double mean(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// 0 * C with C possibly infinite is 0 here: a vanishing loss switches the term off.
double weighted(double c, double eps) { return eps == 0.0 ? 0.0 : c * eps; }
}  // namespace

double c2_from_xi(double xi) { return 0.5 * std::expm1(2.0 * xi); }

NflConstants make_constants(double xi, double c1, std::optional<double> delta,
                            std::optional<double> xi_cap, std::optional<double> gamma_cap,
                            double gamma_ratio) {
  NflConstants c;
  c.xi = xi;
  c.c1 = c1;
  c.c2 = c2_from_xi(xi);
  c.delta = delta;
  c.xi_cap = xi_cap;
  c.gamma_cap = gamma_cap;
  c.gamma_ratio = gamma_ratio;
  double e = std::expm1(2.0 * xi);
  if (delta) c.c_d = gamma_ratio / (4.0 * *delta) * e;
  if (xi_cap && gamma_cap) c.c_x = e / (2.0 * *xi_cap * *gamma_cap);
  return c;
}

double xi_constant(const ConditionalBelief& kernel, const BeliefDistribution& prior,
                   const std::vector<bool>& used) {
  const auto& support = kernel.d_support();
  Vec pri(support.size());
  for (std::size_t d = 0; d < support.size(); ++d) pri[d] = prior.mass_at(support[d]);
  double xi = 0.0;
  for (std::size_t w = 0; w < kernel.size(); ++w) {
    if (!used.empty() && !used.at(w)) continue;
    const Vec& row = kernel.rows()[w].mass();
    for (std::size_t d = 0; d < row.size(); ++d) {
      if (pri[d] == 0.0) {
        if (row[d] > 0.0) throw Error(ErrorCode::kRatioUnbounded, "posterior positive where the prior is zero");
        continue;
      }
      // A zero posterior entry under a positive prior makes the ratio unbounded.
      double r = row[d] == 0.0 ? kInf : std::fabs(std::log(row[d] / pri[d]));
      xi = std::max(xi, r);
    }
  }
  return xi;
}

double c1_constant(const std::vector<BeliefDistribution>& priors,
                   const std::vector<BeliefDistribution>& posts) {
  if (priors.empty()) throw Error(ErrorCode::kEmptyInput, "no clients");
  if (priors.size() != posts.size()) throw Error(ErrorCode::kMisalignedSupport, "client counts differ");
  Vec v(priors.size());
  for (std::size_t k = 0; k < priors.size(); ++k)
    v[k] = divergence::bayesian_privacy_leakage(priors[k], posts[k]);
  return mean(v);
}

DeltaEstimate delta_estimate(const Vec& utility, const Vec& p_s, const Vec& p_o, double tol) {
  if (utility.size() != p_s.size() || p_s.size() != p_o.size())
    throw Error(ErrorCode::kMisalignedSupport, "utility and pmfs differ in length");
  DeltaEstimate est;
  est.tv = divergence::tv_pmf(p_s, p_o);
  if (est.tv == 0.0) {
    est.reason = "TV between unprotected and protected federated distributions is zero";
    return est;
  }
  double best = -kInf;
  for (std::size_t i = 0; i < utility.size(); ++i)
    if (p_s[i] > 0.0 || p_o[i] > 0.0) best = std::max(best, utility[i]);
  double max_gap = 0.0;
  for (std::size_t i = 0; i < utility.size(); ++i)
    if (p_s[i] > 0.0) max_gap = std::max(max_gap, best - utility[i]);
  auto near_mass = [&](double c) {
    double m = 0.0;
    for (std::size_t i = 0; i < utility.size(); ++i)
      if (p_s[i] > 0.0 && best - utility[i] <= c) m += p_s[i];
    return m;
  };
  double half = 0.5 * est.tv;
  if (near_mass(0.0) > half) {
    est.reason = "protected mass on the optimal set already exceeds TV/2";
    return est;
  }
  double lo = 0.0, hi = max_gap;
  if (near_mass(hi) <= half) {
    est.delta = hi;
    return est;
  }
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    (near_mass(mid) <= half ? lo : hi) = mid;
  }
  if (lo <= 0.0) {
    est.reason = "no positive utility gap keeps the near-optimal mass below TV/2";
    return est;
  }
  est.delta = lo;
  return est;
}

namespace {
struct GridPmfs {
  Vec a, b, values;
};
GridPmfs tabulate(const std::function<double(const divergence::Point&)>& f,
                  const divergence::ModelInfoDistribution& a,
                  const divergence::ModelInfoDistribution& b, const divergence::QuadratureSpec& grid) {
  auto ca = divergence::cell_masses(a, grid), cb = divergence::cell_masses(b, grid);
  if (ca.outside > 1e-6 || cb.outside > 1e-6)
    throw Error(ErrorCode::kInsufficientKernelCoverage, "grid does not cover the distributions");
  GridPmfs out{ca.mass, cb.mass, {}};
  for (const auto& x : grid.centers()) out.values.push_back(f(x));
  return out;
}
}  // namespace

DeltaEstimate delta_estimate(const std::function<double(const divergence::Point&)>& utility,
                             const divergence::ModelInfoDistribution& p_s,
                             const divergence::ModelInfoDistribution& p_o,
                             const divergence::QuadratureSpec& grid, double tol) {
  auto t = tabulate(utility, p_s, p_o, grid);
  return delta_estimate(t.values, t.a, t.b, tol);
}

XiGammaEstimate xi_gamma_estimate(const Vec& cost, const Vec& p_o, const Vec& p_s) {
  if (cost.size() != p_o.size() || p_o.size() != p_s.size())
    throw Error(ErrorCode::kMisalignedSupport, "cost and pmfs differ in length");
  XiGammaEstimate est;
  est.tv = divergence::tv_pmf(p_s, p_o);
  if (est.tv == 0.0) {
    est.reason = "TV between unprotected and protected distributions is zero";
    return est;
  }
  // Gain set: protected density above unprotected; loss set: below.
  double loss_cost = -kInf;
  std::set<double> gain_costs;
  for (std::size_t i = 0; i < cost.size(); ++i) {
    double diff = p_s[i] - p_o[i];
    if (diff > 0.0) gain_costs.insert(cost[i]);
    else if (diff < 0.0) loss_cost = std::max(loss_cost, cost[i]);
  }
  double best = 0.0;
  for (double c : gain_costs) {
    double gap = c - loss_cost;
    if (!(gap > 0.0)) continue;
    double plus = 0.0, minus = 0.0;
    bool valid = true;
    for (std::size_t i = 0; i < cost.size(); ++i) {
      double diff = p_s[i] - p_o[i];
      if (!(diff > 0.0)) continue;
      if (cost[i] >= loss_cost + gap) {
        plus += diff;
      } else {
        if (cost[i] < loss_cost - gap) valid = false;
        minus += diff;
      }
    }
    if (!valid) continue;
    double gamma = (plus - minus) / est.tv;
    if (gamma > 0.0 && gap * gamma > best) {
      best = gap * gamma;
      est.xi_cap = gap;
      est.gamma_cap = gamma;
    }
  }
  if (!est.xi_cap) est.reason = "no positive cost gap with positive mass balance";
  return est;
}

XiGammaEstimate xi_gamma_estimate(const std::function<double(const divergence::Point&)>& cost,
                                  const divergence::ModelInfoDistribution& p_o,
                                  const divergence::ModelInfoDistribution& p_s,
                                  const divergence::QuadratureSpec& grid) {
  auto t = tabulate(cost, p_o, p_s, grid);
  return xi_gamma_estimate(t.values, t.a, t.b);
}

const char* check_status_name(CheckStatus s) {
  switch (s) {
    case CheckStatus::kSatisfied: return "satisfied";
    case CheckStatus::kViolated: return "violated";
    case CheckStatus::kNotApplicable: return "not_applicable";
  }
  return "unknown";
}

namespace {
BoundCheck make_check(const char* name, double eps_p, double c1,
                      std::initializer_list<std::pair<std::optional<double>, double>> terms) {
  BoundCheck b;
  b.name = name;
  b.rhs = c1;
  double lhs = eps_p;
  for (const auto& [coef, eps] : terms) {
    if (eps == 0.0) continue;
    // NaN marks a loss that cannot be evaluated for this mechanism.
    if (!coef || std::isnan(eps)) {
      b.status = CheckStatus::kNotApplicable;
      b.lhs = std::numeric_limits<double>::quiet_NaN();
      b.margin = b.lhs;
      return b;
    }
    lhs += weighted(*coef, eps);
  }
  b.lhs = lhs;
  b.margin = lhs - c1;
  b.status = lhs >= c1 - kSlack ? CheckStatus::kSatisfied : CheckStatus::kViolated;
  return b;
}
}  // namespace

NflChecks nfl_check(double eps_p, double eps_u, double eps_e, const NflConstants& c) {
  auto half = [](std::optional<double> v) { return v ? std::optional<double>(*v / 2.0) : v; };
  NflChecks out;
  out.privacy_efficiency = make_check("privacy_efficiency", eps_p, c.c1, {{c.c_x, eps_e}});
  out.privacy_utility = make_check("privacy_utility", eps_p, c.c1, {{c.c_d, eps_u}});
  out.full_nfl = make_check("full_nfl", eps_p, c.c1, {{half(c.c_d), eps_u}, {half(c.c_x), eps_e}});
  return out;
}

BeliefDistribution unprotected_belief(const EnumerableClient& c) {
  return divergence::marginal_belief(c.kernel, c.p_orig);
}

BeliefDistribution protected_belief(const EnumerableClient& c) {
  return divergence::marginal_belief(c.kernel, c.p_prot);
}

TradeoffReport evaluate(const EnumerableScenario& s) {
  if (s.clients.empty()) throw Error(ErrorCode::kEmptyInput, "scenario has no clients");
  TradeoffReport r;
  bool have_cost = true;
  std::optional<double> xi_cap, gamma_cap;
  std::string xg_reason;
  for (const auto& c : s.clients) {
    if (c.p_orig.size() != c.kernel.size() || c.p_prot.size() != c.kernel.size())
      throw Error(ErrorCode::kMisalignedSupport, "client pmfs do not match the kernel rows");
    auto fo = unprotected_belief(c), fa = protected_belief(c);
    r.epsilon_p_per_client.push_back(divergence::bayesian_privacy_leakage(c.prior, fa));
    r.c1_per_client.push_back(divergence::bayesian_privacy_leakage(c.prior, fo));
    r.xi_per_client.push_back(xi_constant(c.kernel, c.prior));
    r.tv_per_client.push_back(divergence::tv_pmf(c.p_orig, c.p_prot));
    if (c.cost.empty()) {
      have_cost = false;
      continue;
    }
    if (c.cost.size() != c.kernel.size()) throw Error(ErrorCode::kMisalignedSupport, "cost has wrong length");
    double e = 0.0;
    for (std::size_t i = 0; i < c.cost.size(); ++i) e += c.cost[i] * (c.p_prot[i] - c.p_orig[i]);
    r.epsilon_e_per_client.push_back(e);
    auto xg = xi_gamma_estimate(c.cost, c.p_orig, c.p_prot);
    if (!xg.xi_cap) {
      if (xg_reason.empty()) xg_reason = xg.reason;
    } else if (xg_reason.empty()) {
      xi_cap = xi_cap ? std::min(*xi_cap, *xg.xi_cap) : *xg.xi_cap;
      gamma_cap = gamma_cap ? std::min(*gamma_cap, *xg.gamma_cap) : *xg.gamma_cap;
    }
  }
  if (!have_cost) xg_reason = "no communication cost model";
  if (!xg_reason.empty()) {
    xi_cap.reset();
    gamma_cap.reset();
  }
  r.xi_gamma_reason = xg_reason;
  r.epsilon_p = mean(r.epsilon_p_per_client);
  r.epsilon_e = have_cost ? mean(r.epsilon_e_per_client) : 0.0;
  double xi = *std::max_element(r.xi_per_client.begin(), r.xi_per_client.end());
  double c1 = mean(r.c1_per_client);

  std::optional<double> delta;
  double gamma_ratio = 0.0;
  if (s.fed) {
    const auto& f = *s.fed;
    if (f.p_orig.size() != f.p_prot.size() || f.utility.size() != f.p_orig.size())
      throw Error(ErrorCode::kMisalignedSupport, "federated pmfs and utility differ in length");
    r.tv_fed = divergence::tv_pmf(f.p_orig, f.p_prot);
    double u = 0.0;
    for (std::size_t i = 0; i < f.utility.size(); ++i) u += f.utility[i] * (f.p_orig[i] - f.p_prot[i]);
    r.epsilon_u = u;
    auto de = delta_estimate(f.utility, f.p_prot, f.p_orig);
    delta = de.delta;
    r.delta_reason = de.reason;
    if (r.tv_fed > 0.0) gamma_ratio = mean(r.tv_per_client) / r.tv_fed;
  } else {
    r.delta_reason = "no federated utility model";
  }
  r.constants = make_constants(xi, c1, delta, xi_cap, gamma_cap, gamma_ratio);
  r.checks = nfl_check(r.epsilon_p, r.epsilon_u, r.epsilon_e, r.constants);
  return r;
}

// ---------------------------------------------------------------------------

double paillier_distortion(const mechanisms::PaillierConfig& cfg, std::size_t dims) {
  double log_n2;
  if (!cfg.p.empty()) {
    mechanisms::BigInt n = mechanisms::BigInt(cfg.p) * mechanisms::BigInt(cfg.q);
    mechanisms::BigInt n2 = n * n;
    long exp = 0;
    double mant = mpz_get_d_2exp(&exp, n2.get_mpz_t());
    log_n2 = std::log(mant) + static_cast<double>(exp) * std::log(2.0);
  } else {
    log_n2 = (4.0 * cfg.prime_bits - 2.0) * std::log(2.0);
  }
  double log_ratio = std::log(2.0 * cfg.delta) - log_n2;
  return -std::expm1(static_cast<double>(dims) * log_ratio);
}

double secret_sharing_distortion(const mechanisms::SecretSharing& cfg, std::size_t dims) {
  double prod = 1.0;
  for (std::size_t j = 0; j < dims; ++j)
    prod *= 2.0 * cfg.delta / (mechanisms::dim_param(cfg.b, j) + mechanisms::dim_param(cfg.r, j));
  return 1.0 - prod;
}

double compression_distortion(const mechanisms::Compression& cfg, std::size_t dims) {
  double prod = 1.0;
  for (std::size_t j = 0; j < dims; ++j) prod *= mechanisms::dim_param(cfg.rho, j);
  return 1.0 - prod;
}

namespace {
double randomization_x(const mechanisms::Randomization& r, const MechanismBoundInputs& in) {
  if (in.sigma0.empty()) throw Error(ErrorCode::kInvalidConfig, "randomization bounds need sigma0");
  Vec s0(in.dims);
  for (std::size_t j = 0; j < in.dims; ++j) s0[j] = mechanisms::dim_param(in.sigma0, j);
  return divergence::gaussian_tv_sandwich(s0, r.sigma).x;
}
}  // namespace

BoundValue mechanism_privacy_bound(const mechanisms::MechanismConfig& cfg,
                                   const MechanismBoundInputs& in, RandomizationVariant variant) {
  mechanisms::validate(cfg);
  double loss = 0.0;
  if (std::holds_alternative<mechanisms::Identity>(cfg)) {
    loss = 0.0;
  } else if (auto* r = std::get_if<mechanisms::Randomization>(&cfg)) {
    double coef = variant == RandomizationVariant::kStated ? in.c2 / 100.0 : 1.5 * in.c2;
    loss = weighted(coef, randomization_x(*r, in));
  } else if (auto* p = std::get_if<mechanisms::PaillierConfig>(&cfg)) {
    loss = weighted(in.c2, paillier_distortion(*p, in.dims));
  } else if (auto* s = std::get_if<mechanisms::SecretSharing>(&cfg)) {
    loss = weighted(in.c2, secret_sharing_distortion(*s, in.dims));
  } else {
    loss = weighted(in.c2, compression_distortion(std::get<mechanisms::Compression>(cfg), in.dims));
  }
  BoundValue v;
  v.raw = in.c1 - loss;
  v.clamped = std::max(0.0, v.raw);
  return v;
}

double mechanism_utility_bound(const mechanisms::MechanismConfig& cfg, const MechanismBoundInputs& in) {
  mechanisms::validate(cfg);
  if (std::holds_alternative<mechanisms::Identity>(cfg) ||
      std::holds_alternative<mechanisms::PaillierConfig>(cfg) ||
      std::holds_alternative<mechanisms::SecretSharing>(cfg))
    return 0.0;
  if (!in.delta) throw Error(ErrorCode::kDeltaRequired, "utility bound needs delta");
  if (auto* r = std::get_if<mechanisms::Randomization>(&cfg))
    return *in.delta / 200.0 * randomization_x(*r, in);
  return *in.delta / 2.0 * compression_distortion(std::get<mechanisms::Compression>(cfg), in.dims);
}

std::optional<double> mechanism_efficiency_bound(const mechanisms::MechanismConfig& cfg,
                                                 const MechanismBoundInputs& in) {
  mechanisms::validate(cfg);
  if (std::holds_alternative<mechanisms::Identity>(cfg)) return 0.0;
  if (std::holds_alternative<mechanisms::SecretSharing>(cfg)) return std::nullopt;
  if (!in.xi_gamma) throw Error(ErrorCode::kXiGammaRequired, "efficiency bound needs xi and gamma");
  double k = *in.xi_gamma;
  if (auto* r = std::get_if<mechanisms::Randomization>(&cfg)) return k / 100.0 * randomization_x(*r, in);
  if (auto* p = std::get_if<mechanisms::PaillierConfig>(&cfg)) return k * paillier_distortion(*p, in.dims);
  return k * compression_distortion(std::get<mechanisms::Compression>(cfg), in.dims);
}

OptimizeResult protector_optimize(const std::vector<mechanisms::MechanismConfig>& grid,
                                  const Evaluator& eval, double eta_u, double eta_e, double chi,
                                  std::optional<double> phi) {
  if (grid.empty()) throw Error(ErrorCode::kEmptyGrid, "parameter grid is empty");
  OptimizeResult res;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    OptimizeRow row;
    row.metrics = eval(grid[i]);
    row.objective = eta_u * row.metrics.epsilon_u + eta_e * row.metrics.epsilon_e;
    row.feasible = row.metrics.epsilon_p <= chi && (!phi || row.metrics.epsilon_e <= *phi);
    if (row.feasible && (!best || row.objective < res.rows[*best].objective)) best = i;
    res.rows.push_back(row);
  }
  if (!best) throw Error(ErrorCode::kInfeasible, "no configuration satisfies the privacy and efficiency caps");
  res.best = *best;
  res.config = grid[*best];
  res.metrics = res.rows[*best].metrics;
  res.objective = res.rows[*best].objective;
  return res;
}

}  // namespace bounds
}  // namespace nflfed
