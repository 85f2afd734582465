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
#include <random>

#include "nflfed/bounds.hpp"
#include "nflfed/two_atom.hpp"

using namespace nflfed;
using namespace nflfed::bounds;
using divergence::BeliefDistribution;
using divergence::ConditionalBelief;

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

Vec random_pmf(Rng& rng, std::size_t n) {
  std::gamma_distribution<double> g(1.0, 1.0);
  Vec v(n);
  double s = 0.0;
  for (double& x : v) s += (x = g(rng));
  for (double& x : v) x /= s;
  return v;
}

ConditionalBelief kernel_of(const std::vector<Vec>& rows) {
  std::vector<divergence::Point> d, w;
  for (std::size_t i = 0; i < rows.front().size(); ++i) d.push_back({static_cast<double>(i)});
  std::vector<BeliefDistribution> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    w.push_back({static_cast<double>(i)});
    out.emplace_back(d, rows[i]);
  }
  return ConditionalBelief(w, out);
}
}  // namespace

TEST_CASE("constants from xi") {
  CHECK(c2_from_xi(0.0) == 0.0);
  CHECK(c2_from_xi(0.5) == doctest::Approx((std::exp(1.0) - 1.0) / 2.0));
  auto c = make_constants(0.5, 0.3, 2.0, 4.0, 0.5, 1.5);
  CHECK(*c.c_d == doctest::Approx(1.5 / 8.0 * (std::exp(1.0) - 1.0)));
  CHECK(*c.c_x == doctest::Approx((std::exp(1.0) - 1.0) / 4.0));
  auto none = make_constants(0.5, 0.3, std::nullopt, std::nullopt, std::nullopt, 0.0);
  CHECK_FALSE(none.c_d.has_value());
  CHECK_FALSE(none.c_x.has_value());
}

TEST_CASE("xi over kernel rows") {
  auto prior = BeliefDistribution::over_indices({0.5, 0.5});
  CHECK(xi_constant(kernel_of({{0.5, 0.5}}), prior) == 0.0);
  CHECK(xi_constant(kernel_of({{0.8, 0.2}, {0.5, 0.5}}), prior) == doctest::Approx(std::fabs(std::log(0.4))));
  CHECK(xi_constant(kernel_of({{0.8, 0.2}, {0.5, 0.5}}), prior, {false, true}) == 0.0);
  // A posterior that rules a value out makes the ratio unbounded.
  CHECK(std::isinf(xi_constant(kernel_of({{1.0, 0.0}, {0.0, 1.0}}), prior)));
  auto skewed = BeliefDistribution::over_indices({1.0, 0.0});
  CHECK(code_of([&] { xi_constant(kernel_of({{0.5, 0.5}}), skewed); }) == ErrorCode::kRatioUnbounded);
}

TEST_CASE("delta estimate matches a fine scan") {
  Vec w;
  for (int i = -40; i <= 40; ++i) w.push_back(i / 10.0);
  Vec util(w.size()), p_o(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) util[i] = -w[i] * w[i];
  p_o[40] = 1.0;
  for (double sigma : {0.3, 0.7, 1.5}) {
    Vec p_s(w.size());
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += (p_s[i] = std::exp(-w[i] * w[i] / (2 * sigma * sigma)));
    for (double& v : p_s) v /= s;
    auto est = delta_estimate(util, p_s, p_o);
    REQUIRE(est.delta.has_value());
    double tv = divergence::tv_pmf(p_s, p_o);
    double scan = 0.0;
    for (double c = 0.0; c <= 16.0; c += 1e-4) {
      double m = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i)
        if (-util[i] <= c) m += p_s[i];
      if (m <= tv / 2) scan = c;
      else break;
    }
    CHECK(std::fabs(*est.delta - scan) <= 2e-4);
  }
  auto zero = delta_estimate(util, p_o, p_o);
  CHECK_FALSE(zero.delta.has_value());
  CHECK_FALSE(zero.reason.empty());
}

TEST_CASE("efficiency constants on a two-point cost") {
  auto est = xi_gamma_estimate({64.0, 1024.0}, {1.0, 0.0}, {0.0, 1.0});
  REQUIRE(est.xi_cap.has_value());
  CHECK(*est.xi_cap == 960.0);
  CHECK(*est.gamma_cap == 1.0);
  auto cheaper = xi_gamma_estimate({64.0, 1024.0}, {0.0, 1.0}, {1.0, 0.0});
  CHECK_FALSE(cheaper.xi_cap.has_value());
  CHECK_FALSE(xi_gamma_estimate({1.0, 2.0}, {0.5, 0.5}, {0.5, 0.5}).xi_cap.has_value());
}

TEST_CASE("nfl check statuses") {
  auto bare = make_constants(1.0, 0.4, std::nullopt, std::nullopt, std::nullopt, 0.0);
  auto eq = nfl_check(0.4, 0.0, 0.0, bare);
  CHECK(eq.full_nfl.status == CheckStatus::kSatisfied);
  CHECK(eq.full_nfl.margin == 0.0);
  auto na = nfl_check(0.1, 0.5, 0.0, bare);
  CHECK(na.privacy_utility.status == CheckStatus::kNotApplicable);
  CHECK(na.privacy_efficiency.status == CheckStatus::kViolated);
  auto full = make_constants(0.1, 0.4, 1.0, 2.0, 1.0, 1.0);
  CHECK(nfl_check(0.1, 0.5, 0.0, full).privacy_utility.status == CheckStatus::kViolated);
  CHECK(nfl_check(0.1, 0.0, std::nan(""), full).full_nfl.status == CheckStatus::kNotApplicable);
  auto inf = make_constants(std::numeric_limits<double>::infinity(), 0.4, 1.0, 2.0, 1.0, 1.0);
  CHECK(nfl_check(0.0, 0.1, 0.1, inf).full_nfl.status == CheckStatus::kSatisfied);
}

// Frozen values from an independent numpy evaluation of the same scenario.
TEST_CASE("two atom scenario reference values") {
  auto s = two_atom::make_scenario();
  CHECK(s.grid.size() == 129);
  auto id = s.evaluate(mechanisms::Identity{});
  CHECK(id.constants.c1 == doctest::Approx(0.387890608357875).epsilon(1e-12));
  CHECK(id.constants.xi == doctest::Approx(12.431854814171766).epsilon(1e-12));
  CHECK(id.epsilon_p == id.constants.c1);
  CHECK(id.checks.full_nfl.status == CheckStatus::kSatisfied);
  CHECK(std::fabs(id.checks.full_nfl.margin) <= 1e-9);
  struct Ref {
    double sigma, eps_p, eps_u, tv;
  };
  for (Ref r : {Ref{0.5, 0.34771311049801845, 0.2503255208333327, 0.9501646619415056},
                Ref{1.0, 0.26639811793397455, 1.0002053437030363, 0.9750701651312457}}) {
    auto rep = s.evaluate(mechanisms::Randomization{r.sigma});
    CHECK(rep.epsilon_p == doctest::Approx(r.eps_p).epsilon(1e-10));
    CHECK(rep.epsilon_u == doctest::Approx(r.eps_u).epsilon(1e-10));
    CHECK(rep.tv_fed == doctest::Approx(r.tv).epsilon(1e-10));
    CHECK(rep.constants.delta.has_value());
    CHECK(rep.constants.xi_cap.has_value());
    CHECK(rep.checks.full_nfl.status == CheckStatus::kSatisfied);
  }
}

TEST_CASE("leakage lower bound and js upper bound on random scenarios") {
  Rng rng(23);
  std::uniform_int_distribution<int> size(2, 5);
  for (int t = 0; t < 40; ++t) {
    std::size_t nd = static_cast<std::size_t>(size(rng)), nw = static_cast<std::size_t>(size(rng));
    std::vector<Vec> rows;
    for (std::size_t w = 0; w < nw; ++w) rows.push_back(random_pmf(rng, nd));
    EnumerableClient c{BeliefDistribution::over_indices(random_pmf(rng, nd)), kernel_of(rows),
                       random_pmf(rng, nw), random_pmf(rng, nw), {}};
    // The prior must be the kernel average for the lemmas; rebuild it.
    Vec mix(nw, 1.0 / static_cast<double>(nw));
    c.prior = divergence::marginal_belief(c.kernel, mix);
    EnumerableScenario sc{{c}, std::nullopt};
    auto rep = evaluate(sc);
    double tv = rep.tv_per_client[0];
    CHECK(rep.epsilon_p >= rep.constants.c1 - rep.constants.c2 * tv - 1e-9);
    auto fa = protected_belief(c), fo = unprotected_belief(c);
    double e = std::expm1(2.0 * rep.constants.xi);
    CHECK(divergence::js_discrete(fa, fo) <= 0.25 * e * e * tv * tv + 1e-9);
  }
}

TEST_CASE("closed form mechanism bounds") {
  mechanisms::PaillierConfig p;
  p.p = "5";
  p.q = "7";
  CHECK(paillier_distortion(p, 2) == doctest::Approx(1.0 - 1.0 / (1225.0 * 1225.0)).epsilon(1e-15));
  mechanisms::PaillierConfig big;
  CHECK(paillier_distortion(big, 4) == 1.0);
  mechanisms::SecretSharing s;
  s.b = {2.0};
  s.r = {2.0};
  CHECK(secret_sharing_distortion(s, 2) == doctest::Approx(0.9375));
  CHECK(compression_distortion(mechanisms::Compression{{0.3}}, 3) == doctest::Approx(0.973));

  MechanismBoundInputs in;
  in.c1 = 0.4;
  in.c2 = 0.05;
  in.delta = 2.0;
  in.xi_gamma = 10.0;
  in.dims = 3;
  in.sigma0 = {1.0};
  auto cmp = mechanisms::Compression{{0.3}};
  CHECK(mechanism_privacy_bound(cmp, in).raw == doctest::Approx(0.4 - 0.05 * 0.973));
  CHECK(mechanism_utility_bound(cmp, in) == doctest::Approx(1.0 * 0.973));
  CHECK(*mechanism_efficiency_bound(cmp, in) == doctest::Approx(9.73));
  auto rz = mechanisms::Randomization{0.5};
  // Unit sigma0 broadcast over three dimensions: X = 0.25 * sqrt(3).
  const double x = 0.25 * std::sqrt(3.0);
  CHECK(mechanism_privacy_bound(rz, in).raw == doctest::Approx(0.4 - 0.05 / 100 * x));
  CHECK(mechanism_privacy_bound(rz, in, RandomizationVariant::kConservative).raw == doctest::Approx(0.4 - 0.075 * x));
  CHECK(mechanism_utility_bound(rz, in) == doctest::Approx(2.0 / 200 * x));
  CHECK(*mechanism_efficiency_bound(rz, in) == doctest::Approx(10.0 / 100 * x));
  in.sigma0 = {4.0};
  CHECK(mechanism_utility_bound(rz, in) == doctest::Approx(2.0 / 200 * 0.25 / 16.0 * std::sqrt(3.0)));
  in.sigma0 = {1.0};
  CHECK(mechanism_utility_bound(s, in) == 0.0);
  CHECK_FALSE(mechanism_efficiency_bound(s, in).has_value());
  CHECK(mechanism_privacy_bound(mechanisms::Identity{}, in).raw == 0.4);
  auto huge = in;
  huge.c2 = 100.0;
  CHECK(mechanism_privacy_bound(cmp, huge).clamped == 0.0);
  huge.delta.reset();
  CHECK(code_of([&] { mechanism_utility_bound(cmp, huge); }) == ErrorCode::kDeltaRequired);
  huge.xi_gamma.reset();
  CHECK(code_of([&] { mechanism_efficiency_bound(cmp, huge); }) == ErrorCode::kXiGammaRequired);
  double prev = -1.0;
  for (int i = 1; i <= 10; ++i) {
    double b = mechanism_privacy_bound(mechanisms::Compression{{i / 10.0}}, in).raw;
    CHECK(b >= prev);
    prev = b;
  }
}

TEST_CASE("protector choice") {
  std::vector<mechanisms::MechanismConfig> grid;
  for (double s : {0.1, 0.5, 1.0, 2.0}) grid.push_back(mechanisms::Randomization{s});
  Evaluator ev = [](const mechanisms::MechanismConfig& c) {
    double s = std::get<mechanisms::Randomization>(c).sigma;
    return Metrics{1.0 / (1.0 + s), s * s, s};
  };
  auto res = protector_optimize(grid, ev, 1.0, 1.0, 0.7);
  CHECK(res.best == 1);
  CHECK(res.objective == doctest::Approx(0.75));
  CHECK(protector_optimize(grid, ev, 1.0, 1.0, 0.7, 0.6).best == 1);
  CHECK(code_of([&] { protector_optimize(grid, ev, 1.0, 1.0, 0.7, 0.4); }) == ErrorCode::kInfeasible);
  CHECK(code_of([&] { protector_optimize(grid, ev, 1.0, 1.0, 0.1); }) == ErrorCode::kInfeasible);
  CHECK(code_of([&] { protector_optimize({}, ev, 1.0, 1.0, 0.1); }) == ErrorCode::kEmptyGrid);
}

TEST_CASE("utility and efficiency lemmas on the two atom sweep") {
  auto s = two_atom::make_scenario();
  std::vector<mechanisms::MechanismConfig> grid;
  for (double sigma : two_atom::reference_sigmas()) grid.push_back(mechanisms::Randomization{sigma});
  for (double rho : {0.2, 0.5, 0.9}) grid.push_back(mechanisms::Compression{{rho}});
  for (const auto& cfg : grid) {
    auto rep = s.evaluate(cfg);
    if (rep.constants.delta) CHECK(rep.epsilon_u >= *rep.constants.delta / 2.0 * rep.tv_fed - 1e-9);
    if (rep.constants.xi_cap && rep.constants.gamma_cap)
      CHECK(rep.epsilon_e >= *rep.constants.xi_cap * *rep.constants.gamma_cap * rep.tv_per_client[0] - 1e-9);
  }
}

TEST_CASE("paillier privacy bound shrinks as the modulus grows") {
  MechanismBoundInputs in;
  in.c1 = 0.4;
  in.c2 = 0.3;
  in.dims = 2;
  double prev = 1.0;
  for (auto [p, q] : std::vector<std::pair<const char*, const char*>>{{"3", "5"}, {"5", "7"}, {"11", "13"}, {"101", "103"}}) {
    mechanisms::PaillierConfig cfg;
    cfg.p = p;
    cfg.q = q;
    double b = mechanism_privacy_bound(cfg, in).raw;
    CHECK(b <= prev);
    prev = b;
  }
}

TEST_CASE("protector choice on the two atom scenario") {
  auto s = two_atom::make_scenario();
  Evaluator ev = [&](const mechanisms::MechanismConfig& c) { return s.metrics(c); };
  std::vector<mechanisms::MechanismConfig> grid{mechanisms::Identity{}, mechanisms::Randomization{0.5},
                                                mechanisms::Randomization{1.0}, mechanisms::Randomization{2.0}};
  CHECK(protector_optimize(grid, ev, 1.0, 1.0, std::sqrt(std::log(2.0))).best == 0);
  CHECK(code_of([&] { protector_optimize(grid, ev, 1.0, 1.0, -1.0); }) == ErrorCode::kInfeasible);
  auto res = protector_optimize(grid, ev, 1.0, 1.0, 0.3);
  std::size_t smallest = grid.size();
  for (std::size_t i = 1; i < grid.size() && smallest == grid.size(); ++i)
    if (s.metrics(grid[i]).epsilon_p <= 0.3) smallest = i;
  CHECK(res.best == smallest);
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (res.rows[i].feasible) CHECK(res.rows[i].objective >= res.objective);
}
