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

#ifndef NFLFED_DIVERGENCE_HPP_
#define NFLFED_DIVERGENCE_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "nflfed/common.hpp"

namespace nflfed {
namespace divergence {

using Point = std::vector<double>;

// Probability mass over a finite set of private-data points.
class BeliefDistribution {
 public:
  BeliefDistribution() = default;
  // Masses must be nonnegative and sum to 1 within 1e-9; points distinct.
  BeliefDistribution(std::vector<Point> support, Vec mass);
  // Normalizes nonnegative weights.
  static BeliefDistribution from_weights(std::vector<Point> support, Vec weights);
  static BeliefDistribution uniform(std::vector<Point> support);
  // Scalar support 0..n-1.
  static BeliefDistribution over_indices(Vec mass);

  const std::vector<Point>& support() const { return support_; }
  const Vec& mass() const { return mass_; }
  std::size_t size() const { return mass_.size(); }
  double mass_at(const Point& x) const;

 private:
  std::vector<Point> support_;
  Vec mass_;
};

// Both masses embedded in the sorted union of the two supports.
std::pair<Vec, Vec> align(const BeliefDistribution& p, const BeliefDistribution& q);

// Raw pmf versions over a shared index set.
double kl_pmf(const Vec& p, const Vec& q);
double js_pmf(const Vec& p, const Vec& q);
double tv_pmf(const Vec& p, const Vec& q);

double kl_discrete(const BeliefDistribution& p, const BeliefDistribution& q);
double js_discrete(const BeliefDistribution& p, const BeliefDistribution& q);
// sqrt(JS(posterior || prior)).
double bayesian_privacy_leakage(const BeliefDistribution& prior,
                                const BeliefDistribution& posterior);
double system_privacy_leakage(const Vec& per_client);

// f(d | w) tabulated on a finite set of model-info points. All rows share the
// same private-data support.
class ConditionalBelief {
 public:
  ConditionalBelief() = default;
  ConditionalBelief(std::vector<Point> w_points, std::vector<BeliefDistribution> rows);

  const std::vector<Point>& w_points() const { return w_points_; }
  const std::vector<BeliefDistribution>& rows() const { return rows_; }
  const std::vector<Point>& d_support() const { return rows_.front().support(); }
  std::size_t size() const { return rows_.size(); }
  // Index of an exactly matching w point, or -1.
  long find(const Point& w) const;

 private:
  std::vector<Point> w_points_;
  std::vector<BeliefDistribution> rows_;
};

// ---------------------------------------------------------------------------
// Distributions of exchanged model information.

struct PointMass {
  Vec location;
};
struct DiagonalGaussian {
  Vec mean;
  Vec variance;
};
struct UniformBox {
  Vec lower;
  Vec upper;
};
// Uniform on the box in the free dimensions, pinned in the collapsed ones.
struct CollapsedBox {
  Vec lower;
  Vec upper;
  std::vector<std::uint8_t> collapsed;
  Vec pinned;
};
struct FiniteDiscrete {
  std::vector<Point> atoms;
  Vec weights;
};
class ModelInfoDistribution;
struct Mixture {
  std::vector<ModelInfoDistribution> components;
  Vec weights;
};

class ModelInfoDistribution {
 public:
  using Kind = std::variant<PointMass, DiagonalGaussian, UniformBox, CollapsedBox,
                            FiniteDiscrete, Mixture>;

  static ModelInfoDistribution point_mass(Vec location);
  static ModelInfoDistribution gaussian(Vec mean, Vec variance);
  static ModelInfoDistribution box(Vec lower, Vec upper);
  static ModelInfoDistribution collapsed_box(Vec lower, Vec upper,
                                             std::vector<std::uint8_t> collapsed,
                                             Vec pinned);
  static ModelInfoDistribution discrete(std::vector<Point> atoms, Vec weights);
  static ModelInfoDistribution mixture(std::vector<ModelInfoDistribution> components,
                                       Vec weights);

  const Kind& kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  template <class T>
  const T* as() const { return std::get_if<T>(&kind_); }

  // True when every component is a point mass or finite discrete.
  bool is_atomic() const;
  // True for Gaussians, full boxes and mixtures of those.
  bool is_absolutely_continuous() const;
  // Lebesgue density; atoms and collapsed parts contribute nothing.
  double density(const Point& x) const;
  Point sample(Rng& rng) const;
  // Flattened atoms of an atomic distribution, equal atoms merged, sorted.
  std::pair<std::vector<Point>, Vec> atoms() const;

  bool operator==(const ModelInfoDistribution& o) const;

 private:
  ModelInfoDistribution(Kind k, std::size_t dim) : kind_(std::move(k)), dim_(dim) {}
  Kind kind_;
  std::size_t dim_ = 0;
};

// Regular grid over a box; cell centers act as discretized model-info points.
struct QuadratureSpec {
  Vec lower;
  Vec upper;
  std::vector<std::size_t> cells;
  // Mass outside the grid is folded into the edge cells instead of lost.
  bool clamp_tails = false;

  std::size_t dim() const { return cells.size(); }
  std::size_t num_points() const;
  std::vector<Point> centers() const;
  // Flat cell index of x; nullopt when outside and not clamping.
  std::optional<std::size_t> cell_of(const Point& x) const;
  void validate() const;
};

// Cell masses of a distribution on the grid plus the mass that fell outside.
struct CellMasses {
  Vec mass;
  double outside = 0.0;
};
CellMasses cell_masses(const ModelInfoDistribution& dist, const QuadratureSpec& quad);

// f^A(d) = sum_w f(d|w) P(w) with P discretized on the quadrature grid.
BeliefDistribution marginal_belief(const ConditionalBelief& kernel,
                                   const ModelInfoDistribution& w_dist,
                                   const QuadratureSpec& quad);
// Same with P already given as a pmf aligned with the kernel rows.
BeliefDistribution marginal_belief(const ConditionalBelief& kernel, const Vec& w_pmf);

struct ClosedForm {};
struct GridMethod {
  QuadratureSpec quad;
};
struct MonteCarlo {
  std::size_t samples = 1000000;
  std::uint64_t seed = 0;
};
using TvMethod = std::variant<ClosedForm, GridMethod, MonteCarlo>;

struct TvResult {
  double value = 0.0;
  double std_error = 0.0;  // zero for deterministic methods
};

TvResult tv_distance(const ModelInfoDistribution& p, const ModelInfoDistribution& q,
                     const TvMethod& method = ClosedForm{});

// TV between two univariate normals via their density crossings.
double gaussian_tv_1d(double mean1, double var1, double mean2, double var2);

struct Sandwich {
  double lower = 0.0;
  double upper = 0.0;
  double x = 0.0;
};
// Bracket on TV(N(mu, S0) || N(mu, S0 + s^2 I)) with X = min(1, s^2 sqrt(sum 1/s_i^4)).
Sandwich gaussian_tv_sandwich(const Vec& sigma0, double sigma_eps);

double normal_cdf(double x);

}  // namespace divergence
}  // namespace nflfed

#endif  // NFLFED_DIVERGENCE_HPP_
