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

#include "nflfed/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

namespace nflfed {
namespace divergence {

namespace {

constexpr double kMassTol = 1e-9;

void check_pmf(const Vec& mass, const char* what) {
  if (mass.empty()) throw Error(ErrorCode::kEmptyInput, std::string(what) + " is empty");
  double s = 0.0;
  for (double m : mass) {
    if (!(m >= 0.0) || !std::isfinite(m))
      throw Error(ErrorCode::kInvalidDistribution, std::string(what) + " has a negative mass");
    s += m;
  }
  if (std::fabs(s - 1.0) > kMassTol)
    throw Error(ErrorCode::kInvalidDistribution, std::string(what) + " does not sum to 1");
}

}  // namespace

BeliefDistribution::BeliefDistribution(std::vector<Point> support, Vec mass)
    : support_(std::move(support)), mass_(std::move(mass)) {
  if (support_.size() != mass_.size())
    throw Error(ErrorCode::kInvalidDistribution, "support and mass lengths differ");
  check_pmf(mass_, "belief");
  std::vector<Point> sorted = support_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorCode::kInvalidDistribution, "belief support points are not distinct");
}

BeliefDistribution BeliefDistribution::from_weights(std::vector<Point> support, Vec w) {
  double s = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw Error(ErrorCode::kInvalidDistribution, "negative weight");
    s += x;
  }
  if (!(s > 0.0)) throw Error(ErrorCode::kInvalidDistribution, "weights sum to zero");
  for (double& x : w) x /= s;
  return BeliefDistribution(std::move(support), std::move(w));
}

BeliefDistribution BeliefDistribution::uniform(std::vector<Point> support) {
  Vec w(support.size(), 1.0);
  return from_weights(std::move(support), std::move(w));
}

BeliefDistribution BeliefDistribution::over_indices(Vec mass) {
  std::vector<Point> support(mass.size());
  for (std::size_t i = 0; i < mass.size(); ++i) support[i] = {static_cast<double>(i)};
  return BeliefDistribution(std::move(support), std::move(mass));
}

double BeliefDistribution::mass_at(const Point& x) const {
  for (std::size_t i = 0; i < support_.size(); ++i)
    if (support_[i] == x) return mass_[i];
  return 0.0;
}

std::pair<Vec, Vec> align(const BeliefDistribution& p, const BeliefDistribution& q) {
  std::map<Point, std::pair<double, double>> joint;
  std::size_t dim = p.support().front().size();
  for (const auto& x : q.support())
    if (x.size() != dim) throw Error(ErrorCode::kMisalignedSupport, "support point dimensions differ");
  for (std::size_t i = 0; i < p.size(); ++i) joint[p.support()[i]].first += p.mass()[i];
  for (std::size_t i = 0; i < q.size(); ++i) joint[q.support()[i]].second += q.mass()[i];
  Vec a, b;
  a.reserve(joint.size());
  b.reserve(joint.size());
  for (const auto& kv : joint) {
    a.push_back(kv.second.first);
    b.push_back(kv.second.second);
  }
  return {a, b};
}

double kl_pmf(const Vec& p, const Vec& q) {
  if (p.size() != q.size()) throw Error(ErrorCode::kMisalignedSupport, "pmf lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0)
      throw Error(ErrorCode::kAbsoluteContinuityViolated, "p has mass where q has none");
    s += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(0.0, s);
}

double js_pmf(const Vec& p, const Vec& q) {
  if (p.size() != q.size()) throw Error(ErrorCode::kMisalignedSupport, "pmf lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double a = p[i], b = q[i];
    if (a + b <= 0.0) continue;
    // a*log(a/m) + b*log(b/m) with m = (a+b)/2, written in terms of the
    // relative gap so that swapping a and b only swaps the two summands.
    double r = (a - b) / (a + b);
    double ta = a > 0.0 ? a * std::log1p(r) : 0.0;
    double tb = b > 0.0 ? b * std::log1p(-r) : 0.0;
    s += 0.5 * (ta + tb);
  }
  return std::clamp(s, 0.0, std::log(2.0));
}

double tv_pmf(const Vec& p, const Vec& q) {
  if (p.size() != q.size()) throw Error(ErrorCode::kMisalignedSupport, "pmf lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - q[i]);
  return std::min(1.0, 0.5 * s);
}

double kl_discrete(const BeliefDistribution& p, const BeliefDistribution& q) {
  if (p.support() != q.support())
    throw Error(ErrorCode::kMisalignedSupport, "KL needs identical ordered supports");
  return kl_pmf(p.mass(), q.mass());
}

double js_discrete(const BeliefDistribution& p, const BeliefDistribution& q) {
  auto [a, b] = align(p, q);
  return js_pmf(a, b);
}

double bayesian_privacy_leakage(const BeliefDistribution& prior,
                                const BeliefDistribution& posterior) {
  return std::sqrt(js_discrete(posterior, prior));
}

double system_privacy_leakage(const Vec& per_client) {
  if (per_client.empty()) throw Error(ErrorCode::kEmptyInput, "no clients");
  return std::accumulate(per_client.begin(), per_client.end(), 0.0) /
         static_cast<double>(per_client.size());
}

ConditionalBelief::ConditionalBelief(std::vector<Point> w_points,
                                     std::vector<BeliefDistribution> rows)
    : w_points_(std::move(w_points)), rows_(std::move(rows)) {
  if (rows_.empty()) throw Error(ErrorCode::kEmptyInput, "kernel has no rows");
  if (rows_.size() != w_points_.size())
    throw Error(ErrorCode::kInvalidDistribution, "kernel rows and w points differ in count");
  for (const auto& r : rows_)
    if (r.support() != rows_.front().support())
      throw Error(ErrorCode::kMisalignedSupport, "kernel rows use different supports");
}

long ConditionalBelief::find(const Point& w) const {
  for (std::size_t i = 0; i < w_points_.size(); ++i)
    if (w_points_[i] == w) return static_cast<long>(i);
  return -1;
}

// ---------------------------------------------------------------------------

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

void require(bool ok, ErrorCode code, const char* msg) {
  if (!ok) throw Error(code, msg);
}

double box_volume(const Vec& lo, const Vec& hi) {
  double v = 1.0;
  for (std::size_t i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
  return v;
}

double overlap_volume(const UniformBox& a, const UniformBox& b) {
  double v = 1.0;
  for (std::size_t i = 0; i < a.lower.size(); ++i) {
    double w = std::min(a.upper[i], b.upper[i]) - std::max(a.lower[i], b.lower[i]);
    if (w <= 0.0) return 0.0;
    v *= w;
  }
  return v;
}

bool box_nested(const UniformBox& in, const UniformBox& out) {
  for (std::size_t i = 0; i < in.lower.size(); ++i)
    if (in.lower[i] < out.lower[i] || in.upper[i] > out.upper[i]) return false;
  return true;
}

}  // namespace

ModelInfoDistribution ModelInfoDistribution::point_mass(Vec location) {
  require(!location.empty(), ErrorCode::kInvalidDistribution, "zero-dimensional point mass");
  std::size_t d = location.size();
  return ModelInfoDistribution(PointMass{std::move(location)}, d);
}

ModelInfoDistribution ModelInfoDistribution::gaussian(Vec mean, Vec variance) {
  require(!mean.empty() && mean.size() == variance.size(), ErrorCode::kDimensionMismatch,
          "gaussian mean and variance lengths differ");
  for (double v : variance)
    require(v > 0.0 && std::isfinite(v), ErrorCode::kNonpositiveVariance,
            "gaussian variance must be positive");
  std::size_t d = mean.size();
  return ModelInfoDistribution(DiagonalGaussian{std::move(mean), std::move(variance)}, d);
}

ModelInfoDistribution ModelInfoDistribution::box(Vec lower, Vec upper) {
  require(!lower.empty() && lower.size() == upper.size(), ErrorCode::kDimensionMismatch,
          "box bounds lengths differ");
  for (std::size_t i = 0; i < lower.size(); ++i)
    require(lower[i] < upper[i], ErrorCode::kInvalidDistribution, "box needs lower < upper");
  std::size_t d = lower.size();
  return ModelInfoDistribution(UniformBox{std::move(lower), std::move(upper)}, d);
}

ModelInfoDistribution ModelInfoDistribution::collapsed_box(Vec lower, Vec upper,
                                                           std::vector<std::uint8_t> collapsed,
                                                           Vec pinned) {
  std::size_t d = lower.size();
  require(d > 0 && upper.size() == d && collapsed.size() == d && pinned.size() == d,
          ErrorCode::kDimensionMismatch, "collapsed box field lengths differ");
  for (std::size_t i = 0; i < d; ++i)
    if (!collapsed[i])
      require(lower[i] < upper[i], ErrorCode::kInvalidDistribution, "box needs lower < upper");
  bool any = std::any_of(collapsed.begin(), collapsed.end(), [](auto c) { return c != 0; });
  if (!any) return box(std::move(lower), std::move(upper));
  bool all = std::all_of(collapsed.begin(), collapsed.end(), [](auto c) { return c != 0; });
  if (all) return point_mass(std::move(pinned));
  return ModelInfoDistribution(
      CollapsedBox{std::move(lower), std::move(upper), std::move(collapsed), std::move(pinned)},
      d);
}

ModelInfoDistribution ModelInfoDistribution::discrete(std::vector<Point> atoms, Vec weights) {
  require(!atoms.empty() && atoms.size() == weights.size(), ErrorCode::kInvalidDistribution,
          "atoms and weights lengths differ");
  std::size_t d = atoms.front().size();
  require(d > 0, ErrorCode::kInvalidDistribution, "zero-dimensional atom");
  for (const auto& a : atoms)
    require(a.size() == d, ErrorCode::kDimensionMismatch, "atoms differ in dimension");
  check_pmf(weights, "discrete weights");
  return ModelInfoDistribution(FiniteDiscrete{std::move(atoms), std::move(weights)}, d);
}

ModelInfoDistribution ModelInfoDistribution::mixture(std::vector<ModelInfoDistribution> comps,
                                                     Vec weights) {
  require(!comps.empty() && comps.size() == weights.size(), ErrorCode::kInvalidDistribution,
          "components and weights lengths differ");
  std::size_t d = comps.front().dim();
  for (const auto& c : comps)
    require(c.dim() == d, ErrorCode::kDimensionMismatch, "mixture components differ in dimension");
  check_pmf(weights, "mixture weights");
  return ModelInfoDistribution(Mixture{std::move(comps), std::move(weights)}, d);
}

bool ModelInfoDistribution::is_atomic() const {
  if (as<PointMass>() || as<FiniteDiscrete>()) return true;
  if (auto* m = as<Mixture>())
    return std::all_of(m->components.begin(), m->components.end(),
                       [](const auto& c) { return c.is_atomic(); });
  return false;
}

bool ModelInfoDistribution::is_absolutely_continuous() const {
  if (as<DiagonalGaussian>() || as<UniformBox>()) return true;
  if (auto* m = as<Mixture>())
    return std::all_of(m->components.begin(), m->components.end(),
                       [](const auto& c) { return c.is_absolutely_continuous(); });
  return false;
}

double ModelInfoDistribution::density(const Point& x) const {
  if (auto* g = as<DiagonalGaussian>()) {
    double lp = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      double z = x[i] - g->mean[i];
      lp += -0.5 * z * z / g->variance[i] - 0.5 * std::log(2.0 * M_PI * g->variance[i]);
    }
    return std::exp(lp);
  }
  if (auto* b = as<UniformBox>()) {
    for (std::size_t i = 0; i < dim_; ++i)
      if (x[i] < b->lower[i] || x[i] > b->upper[i]) return 0.0;
    return 1.0 / box_volume(b->lower, b->upper);
  }
  if (auto* m = as<Mixture>()) {
    double s = 0.0;
    for (std::size_t i = 0; i < m->components.size(); ++i)
      s += m->weights[i] * m->components[i].density(x);
    return s;
  }
  return 0.0;
}

Point ModelInfoDistribution::sample(Rng& rng) const {
  Point x(dim_);
  if (auto* p = as<PointMass>()) return p->location;
  if (auto* g = as<DiagonalGaussian>()) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (std::size_t i = 0; i < dim_; ++i) x[i] = g->mean[i] + std::sqrt(g->variance[i]) * n(rng);
    return x;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (auto* b = as<UniformBox>()) {
    for (std::size_t i = 0; i < dim_; ++i)
      x[i] = b->lower[i] + (b->upper[i] - b->lower[i]) * u(rng);
    return x;
  }
  if (auto* c = as<CollapsedBox>()) {
    for (std::size_t i = 0; i < dim_; ++i)
      x[i] = c->collapsed[i] ? c->pinned[i] : c->lower[i] + (c->upper[i] - c->lower[i]) * u(rng);
    return x;
  }
  if (auto* f = as<FiniteDiscrete>()) {
    std::discrete_distribution<std::size_t> pick(f->weights.begin(), f->weights.end());
    return f->atoms[pick(rng)];
  }
  const auto& m = std::get<Mixture>(kind_);
  std::discrete_distribution<std::size_t> pick(m.weights.begin(), m.weights.end());
  return m.components[pick(rng)].sample(rng);
}

std::pair<std::vector<Point>, Vec> ModelInfoDistribution::atoms() const {
  require(is_atomic(), ErrorCode::kUnsupportedClosedForm, "distribution is not atomic");
  std::map<Point, double> acc;
  std::vector<std::pair<const ModelInfoDistribution*, double>> stack{{this, 1.0}};
  while (!stack.empty()) {
    auto [d, w] = stack.back();
    stack.pop_back();
    if (auto* p = d->as<PointMass>()) {
      acc[p->location] += w;
    } else if (auto* f = d->as<FiniteDiscrete>()) {
      for (std::size_t i = 0; i < f->atoms.size(); ++i) acc[f->atoms[i]] += w * f->weights[i];
    } else {
      const auto& m = std::get<Mixture>(d->kind_);
      for (std::size_t i = 0; i < m.components.size(); ++i)
        stack.push_back({&m.components[i], w * m.weights[i]});
    }
  }
  std::vector<Point> pts;
  Vec ws;
  for (auto& kv : acc) {
    pts.push_back(kv.first);
    ws.push_back(kv.second);
  }
  return {pts, ws};
}

namespace {

bool same_kind(const PointMass& a, const PointMass& b) { return a.location == b.location; }
bool same_kind(const DiagonalGaussian& a, const DiagonalGaussian& b) {
  return a.mean == b.mean && a.variance == b.variance;
}
bool same_kind(const UniformBox& a, const UniformBox& b) {
  return a.lower == b.lower && a.upper == b.upper;
}
bool same_kind(const CollapsedBox& a, const CollapsedBox& b) {
  if (a.collapsed != b.collapsed) return false;
  for (std::size_t i = 0; i < a.lower.size(); ++i) {
    if (a.collapsed[i] ? a.pinned[i] != b.pinned[i]
                       : (a.lower[i] != b.lower[i] || a.upper[i] != b.upper[i]))
      return false;
  }
  return true;
}
bool same_kind(const FiniteDiscrete& a, const FiniteDiscrete& b) {
  return a.atoms == b.atoms && a.weights == b.weights;
}
bool same_kind(const Mixture& a, const Mixture& b) {
  return a.components == b.components && a.weights == b.weights;
}

}  // namespace

bool ModelInfoDistribution::operator==(const ModelInfoDistribution& o) const {
  if (dim_ != o.dim_ || kind_.index() != o.kind_.index()) return false;
  return std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        return same_kind(a, std::get<T>(o.kind_));
      },
      kind_);
}

// ---------------------------------------------------------------------------
// Quadrature grid.

void QuadratureSpec::validate() const {
  require(!cells.empty() && lower.size() == cells.size() && upper.size() == cells.size(),
          ErrorCode::kDimensionMismatch, "quadrature fields differ in length");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    require(cells[i] > 0, ErrorCode::kInvalidConfig, "quadrature needs at least one cell");
    require(lower[i] < upper[i], ErrorCode::kInvalidConfig, "quadrature needs lower < upper");
  }
}

std::size_t QuadratureSpec::num_points() const {
  std::size_t n = 1;
  for (auto c : cells) n *= c;
  return n;
}

std::vector<Point> QuadratureSpec::centers() const {
  validate();
  std::size_t n = num_points(), d = dim();
  std::vector<Point> out(n, Point(d));
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t rem = flat;
    for (std::size_t j = d; j-- > 0;) {
      std::size_t i = rem % cells[j];
      rem /= cells[j];
      double h = (upper[j] - lower[j]) / static_cast<double>(cells[j]);
      out[flat][j] = lower[j] + (static_cast<double>(i) + 0.5) * h;
    }
  }
  return out;
}

std::optional<std::size_t> QuadratureSpec::cell_of(const Point& x) const {
  std::size_t flat = 0;
  for (std::size_t j = 0; j < dim(); ++j) {
    double h = (upper[j] - lower[j]) / static_cast<double>(cells[j]);
    double t = std::floor((x[j] - lower[j]) / h);
    long i = static_cast<long>(t);
    if (x[j] == upper[j]) i = static_cast<long>(cells[j]) - 1;
    if (i < 0 || i >= static_cast<long>(cells[j])) {
      if (!clamp_tails) return std::nullopt;
      i = std::clamp<long>(i, 0, static_cast<long>(cells[j]) - 1);
    }
    flat = flat * cells[j] + static_cast<std::size_t>(i);
  }
  return flat;
}

namespace {

// Per-dimension cell masses of a product-form distribution; last entry of each
// row is the mass outside the grid in that dimension.
std::vector<Vec> axis_masses(const ModelInfoDistribution& dist, const QuadratureSpec& q) {
  std::size_t d = q.dim();
  std::vector<Vec> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    std::size_t c = q.cells[j];
    double h = (q.upper[j] - q.lower[j]) / static_cast<double>(c);
    Vec m(c + 1, 0.0);
    auto edge = [&](std::size_t i) { return q.lower[j] + static_cast<double>(i) * h; };
    if (auto* g = dist.as<DiagonalGaussian>()) {
      double s = std::sqrt(g->variance[j]);
      auto cdf = [&](double x) { return normal_cdf((x - g->mean[j]) / s); };
      double prev = q.clamp_tails ? 0.0 : cdf(edge(0));
      for (std::size_t i = 0; i < c; ++i) {
        double next = (q.clamp_tails && i + 1 == c) ? 1.0 : cdf(edge(i + 1));
        m[i] = std::max(0.0, next - prev);
        prev = next;
      }
      if (!q.clamp_tails) m[c] = std::max(0.0, cdf(edge(0)) + (1.0 - cdf(edge(c))));
    } else {
      double lo, hi;
      bool pinned = false;
      if (auto* b = dist.as<UniformBox>()) {
        lo = b->lower[j];
        hi = b->upper[j];
      } else {
        const auto& cb = std::get<CollapsedBox>(dist.kind());
        lo = cb.lower[j];
        hi = cb.upper[j];
        if (cb.collapsed[j]) {
          pinned = true;
          lo = hi = cb.pinned[j];
        }
      }
      if (pinned) {
        QuadratureSpec one{{q.lower[j]}, {q.upper[j]}, {c}, q.clamp_tails};
        auto cell = one.cell_of({lo});
        if (cell) m[*cell] = 1.0; else m[c] = 1.0;
      } else {
        double width = hi - lo, inside = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
          double a = edge(i), b = edge(i + 1);
          if (q.clamp_tails && i == 0) a = std::min(a, lo);
          if (q.clamp_tails && i + 1 == c) b = std::max(b, hi);
          double w = std::min(b, hi) - std::max(a, lo);
          m[i] = w > 0.0 ? w / width : 0.0;
          inside += m[i];
        }
        m[c] = std::max(0.0, 1.0 - inside);
      }
    }
    out[j] = std::move(m);
  }
  return out;
}

void add_cell_masses(const ModelInfoDistribution& dist, const QuadratureSpec& q, double weight,
                     CellMasses& acc) {
  if (dist.dim() != q.dim()) throw Error(ErrorCode::kDimensionMismatch, "grid and distribution dims differ");
  if (dist.is_atomic()) {
    auto [pts, ws] = dist.atoms();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto cell = q.cell_of(pts[i]);
      if (cell) acc.mass[*cell] += weight * ws[i]; else acc.outside += weight * ws[i];
    }
    return;
  }
  if (auto* m = dist.as<Mixture>()) {
    for (std::size_t i = 0; i < m->components.size(); ++i)
      add_cell_masses(m->components[i], q, weight * m->weights[i], acc);
    return;
  }
  auto axes = axis_masses(dist, q);
  std::size_t n = q.num_points(), d = q.dim();
  double inside = 0.0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t rem = flat;
    double v = 1.0;
    for (std::size_t j = d; j-- > 0;) {
      v *= axes[j][rem % q.cells[j]];
      rem /= q.cells[j];
      if (v == 0.0) break;
    }
    acc.mass[flat] += weight * v;
    inside += v;
  }
  acc.outside += weight * std::max(0.0, 1.0 - inside);
}

}  // namespace

CellMasses cell_masses(const ModelInfoDistribution& dist, const QuadratureSpec& quad) {
  quad.validate();
  CellMasses acc;
  acc.mass.assign(quad.num_points(), 0.0);
  add_cell_masses(dist, quad, 1.0, acc);
  return acc;
}

BeliefDistribution marginal_belief(const ConditionalBelief& kernel, const Vec& w_pmf) {
  if (w_pmf.size() != kernel.size())
    throw Error(ErrorCode::kMisalignedSupport, "w pmf does not match kernel rows");
  const auto& support = kernel.d_support();
  Vec out(support.size(), 0.0);
  double total = 0.0;
  for (std::size_t w = 0; w < kernel.size(); ++w) {
    if (w_pmf[w] == 0.0) continue;
    total += w_pmf[w];
    const Vec& row = kernel.rows()[w].mass();
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += w_pmf[w] * row[d];
  }
  if (std::fabs(total - 1.0) > 1e-6)
    throw Error(ErrorCode::kInsufficientKernelCoverage, "w pmf does not sum to 1");
  return BeliefDistribution::from_weights(support, out);
}

BeliefDistribution marginal_belief(const ConditionalBelief& kernel,
                                   const ModelInfoDistribution& w_dist,
                                   const QuadratureSpec& quad) {
  quad.validate();
  Vec pmf(kernel.size(), 0.0);
  double covered = 0.0;
  auto place = [&](long row, double w) {
    if (row < 0) return;
    pmf[static_cast<std::size_t>(row)] += w;
    covered += w;
  };
  // Kernel row assigned to each grid cell (first kernel point falling in it).
  std::vector<long> row_of_cell(quad.num_points(), -1);
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    if (kernel.w_points()[i].size() != quad.dim()) continue;
    auto c = quad.cell_of(kernel.w_points()[i]);
    if (c && row_of_cell[*c] < 0) row_of_cell[*c] = static_cast<long>(i);
  }
  if (w_dist.is_atomic()) {
    auto [pts, ws] = w_dist.atoms();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      long row = kernel.find(pts[i]);
      if (row < 0) {
        auto c = quad.cell_of(pts[i]);
        if (c) row = row_of_cell[*c];
      }
      place(row, ws[i]);
    }
  } else {
    CellMasses cm = cell_masses(w_dist, quad);
    for (std::size_t c = 0; c < cm.mass.size(); ++c)
      if (cm.mass[c] > 0.0) place(row_of_cell[c], cm.mass[c]);
  }
  if (covered < 1.0 - 1e-6)
    throw Error(ErrorCode::kInsufficientKernelCoverage,
                "kernel grid covers only " + std::to_string(covered) + " of the mass");
  const auto& support = kernel.d_support();
  Vec out(support.size(), 0.0);
  for (std::size_t w = 0; w < kernel.size(); ++w) {
    if (pmf[w] == 0.0) continue;
    const Vec& row = kernel.rows()[w].mass();
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += pmf[w] * row[d];
  }
  return BeliefDistribution::from_weights(support, out);
}

// ---------------------------------------------------------------------------
// Total variation.

double gaussian_tv_1d(double m1, double v1, double m2, double v2) {
  require(v1 > 0.0 && v2 > 0.0, ErrorCode::kNonpositiveVariance, "variance must be positive");
  double s1 = std::sqrt(v1), s2 = std::sqrt(v2);
  if (v1 == v2) {
    if (m1 == m2) return 0.0;
    return 2.0 * normal_cdf(std::fabs(m1 - m2) / (2.0 * s1)) - 1.0;
  }
  // Make the first density the narrower one: it dominates between the roots.
  if (v1 > v2) {
    std::swap(m1, m2);
    std::swap(v1, v2);
    std::swap(s1, s2);
  }
  double a = 0.5 / v2 - 0.5 / v1;
  double b = m1 / v1 - m2 / v2;
  double c = 0.5 * m2 * m2 / v2 - 0.5 * m1 * m1 / v1 + std::log(s2 / s1);
  double disc = std::sqrt(std::max(0.0, b * b - 4.0 * a * c));
  double qq = -0.5 * (b + std::copysign(disc, b));
  double r1 = qq / a, r2 = c / qq;
  if (qq == 0.0) r1 = r2 = 0.0;
  double lo = std::min(r1, r2), hi = std::max(r1, r2);
  auto mass = [](double m, double s, double x0, double x1) {
    double z0 = (x0 - m) / s, z1 = (x1 - m) / s;
    // Difference of tail probabilities keeps precision away from the mode.
    if (z0 > 0.0) return normal_cdf(-z0) - normal_cdf(-z1);
    return normal_cdf(z1) - normal_cdf(z0);
  };
  double tv = mass(m1, s1, lo, hi) - mass(m2, s2, lo, hi);
  return std::clamp(tv, 0.0, 1.0);
}

Sandwich gaussian_tv_sandwich(const Vec& sigma0, double sigma_eps) {
  require(!sigma0.empty(), ErrorCode::kEmptyInput, "no dimensions");
  for (double s : sigma0)
    require(s > 0.0 && std::isfinite(s), ErrorCode::kNonpositiveVariance, "sigma must be positive");
  require(sigma_eps >= 0.0, ErrorCode::kNonpositiveSigma, "noise sigma must be nonnegative");
  double acc = 0.0;
  for (double s : sigma0) acc += 1.0 / (s * s * s * s);
  double x = std::min(1.0, sigma_eps * sigma_eps * std::sqrt(acc));
  return {x / 100.0, std::min(1.0, 1.5 * x), x};
}

namespace {

// Weight of components of `mix` that are identical to `p`, or nullopt when a
// component is neither identical to nor singular with respect to `p`.
std::optional<double> identical_weight(const ModelInfoDistribution& p,
                                       const ModelInfoDistribution& q) {
  if (p == q) return 1.0;
  if (q.is_atomic() || q.as<CollapsedBox>()) return 0.0;
  if (auto* m = q.as<Mixture>()) {
    double w = 0.0;
    for (std::size_t i = 0; i < m->components.size(); ++i) {
      auto c = identical_weight(p, m->components[i]);
      if (!c) return std::nullopt;
      w += m->weights[i] * *c;
    }
    return w;
  }
  return std::nullopt;
}

std::optional<double> closed_form(const ModelInfoDistribution& p,
                                  const ModelInfoDistribution& q) {
  if (p == q) return 0.0;
  if (p.is_atomic() && q.is_atomic()) {
    auto [pa, pw] = p.atoms();
    auto [qa, qw] = q.atoms();
    std::map<Point, std::pair<double, double>> joint;
    for (std::size_t i = 0; i < pa.size(); ++i) joint[pa[i]].first += pw[i];
    for (std::size_t i = 0; i < qa.size(); ++i) joint[qa[i]].second += qw[i];
    double s = 0.0;
    for (auto& kv : joint) s += std::fabs(kv.second.first - kv.second.second);
    return std::min(1.0, 0.5 * s);
  }
  auto* bp = p.as<UniformBox>();
  auto* bq = q.as<UniformBox>();
  if (bp && bq) {
    double v1 = box_volume(bp->lower, bp->upper), v2 = box_volume(bq->lower, bq->upper);
    if (box_nested(*bp, *bq)) return 1.0 - v1 / v2;
    if (box_nested(*bq, *bp)) return 1.0 - v2 / v1;
    double vi = overlap_volume(*bp, *bq);
    double tv = 0.5 * ((v1 - vi) / v1 + (v2 - vi) / v2 + vi * std::fabs(1.0 / v1 - 1.0 / v2));
    return std::clamp(tv, 0.0, 1.0);
  }
  auto* gp = p.as<DiagonalGaussian>();
  auto* gq = q.as<DiagonalGaussian>();
  if (gp && gq) {
    // Product measures that differ in one coordinate reduce to that coordinate.
    std::size_t differing = 0, at = 0;
    for (std::size_t i = 0; i < p.dim(); ++i)
      if (gp->mean[i] != gq->mean[i] || gp->variance[i] != gq->variance[i]) {
        ++differing;
        at = i;
      }
    if (differing == 1)
      return gaussian_tv_1d(gp->mean[at], gp->variance[at], gq->mean[at], gq->variance[at]);
    return std::nullopt;
  }
  // Continuous against something singular to it, possibly mixed with copies of itself.
  if (p.is_absolutely_continuous() && !p.as<Mixture>()) {
    if (auto w = identical_weight(p, q)) return std::clamp(1.0 - *w, 0.0, 1.0);
  }
  if (q.is_absolutely_continuous() && !q.as<Mixture>()) {
    if (auto w = identical_weight(q, p)) return std::clamp(1.0 - *w, 0.0, 1.0);
  }
  return std::nullopt;
}

struct ChunkSum {
  double sum = 0.0;
  double sumsq = 0.0;
};

TvResult monte_carlo(const ModelInfoDistribution& p, const ModelInfoDistribution& q,
                     const MonteCarlo& mc) {
  if (!p.is_absolutely_continuous())
    throw Error(ErrorCode::kUnsupportedClosedForm,
                "Monte Carlo TV samples from the first argument, which needs a density");
  if (mc.samples < 2) throw Error(ErrorCode::kInvalidConfig, "Monte Carlo needs at least 2 samples");
  constexpr std::size_t kChunk = 1 << 16;
  std::size_t chunks = (mc.samples + kChunk - 1) / kChunk;
  std::vector<ChunkSum> parts(chunks);
  auto run = [&](std::size_t first, std::size_t stride) {
    for (std::size_t c = first; c < chunks; c += stride) {
      Rng rng(derive_seed(mc.seed, {c}));
      std::size_t n = std::min(kChunk, mc.samples - c * kChunk);
      ChunkSum s;
      for (std::size_t i = 0; i < n; ++i) {
        Point x = p.sample(rng);
        double px = p.density(x), qx = q.density(x);
        // (1 - q/p)^+ : unbiased for TV even when q has a singular part.
        double h = px > 0.0 ? std::max(0.0, 1.0 - qx / px) : 0.0;
        s.sum += h;
        s.sumsq += h * h;
      }
      parts[c] = s;
    }
  };
  unsigned threads = std::min<unsigned>(worker_threads(), static_cast<unsigned>(chunks));
  if (threads <= 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(run, t, threads);
    for (auto& th : pool) th.join();
  }
  ChunkSum tot;
  for (const auto& s : parts) {
    tot.sum += s.sum;
    tot.sumsq += s.sumsq;
  }
  double n = static_cast<double>(mc.samples);
  double mean = tot.sum / n;
  double var = std::max(0.0, (tot.sumsq / n - mean * mean) * n / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

}  // namespace

TvResult tv_distance(const ModelInfoDistribution& p, const ModelInfoDistribution& q,
                     const TvMethod& method) {
  if (p.dim() != q.dim()) throw Error(ErrorCode::kDimensionMismatch, "TV needs equal dimensions");
  if (std::holds_alternative<ClosedForm>(method)) {
    auto v = closed_form(p, q);
    if (!v) throw Error(ErrorCode::kUnsupportedClosedForm, "no closed form for this pair");
    return {*v, 0.0};
  }
  if (auto* g = std::get_if<GridMethod>(&method)) {
    CellMasses a = cell_masses(p, g->quad), b = cell_masses(q, g->quad);
    double s = std::fabs(a.outside - b.outside);
    for (std::size_t i = 0; i < a.mass.size(); ++i) s += std::fabs(a.mass[i] - b.mass[i]);
    return {std::min(1.0, 0.5 * s), 0.0};
  }
  return monte_carlo(p, q, std::get<MonteCarlo>(method));
}

}  // namespace divergence
}  // namespace nflfed
