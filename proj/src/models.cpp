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

#include "nflfed/models.hpp"

#include <algorithm>
#include <cmath>

namespace nflfed {
namespace models {

Vec softmax(const Vec& z) {
  double mx = *std::max_element(z.begin(), z.end());
  Vec p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - mx));
  for (double& v : p) v /= s;
  return p;
}

ToyModel ToyModel::linear_regression(Vec theta) {
  if (theta.empty()) throw Error(ErrorCode::kInvalidSpec, "linear model needs at least one weight");
  ToyModel m;
  m.kind = ModelKind::kLinearRegression;
  m.dim = theta.size();
  m.classes = 1;
  m.theta = std::move(theta);
  return m;
}

ToyModel ToyModel::softmax_linear(std::size_t dim, std::size_t classes, Vec theta) {
  if (dim == 0 || classes < 2) throw Error(ErrorCode::kInvalidSpec, "softmax model needs dim >= 1 and classes >= 2");
  if (theta.empty()) theta.assign(dim * classes, 0.0);
  if (theta.size() != dim * classes) throw Error(ErrorCode::kDimensionMismatch, "softmax weights have wrong size");
  ToyModel m;
  m.kind = ModelKind::kSoftmaxLinear;
  m.dim = dim;
  m.classes = classes;
  m.theta = std::move(theta);
  return m;
}

Vec ToyModel::logits(const double* x) const {
  Vec z(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t j = 0; j < dim; ++j) z[c] += theta[c * dim + j] * x[j];
  return z;
}

double ToyModel::loss(const double* x, double target) const {
  if (kind == ModelKind::kLinearRegression) {
    double r = -target;
    for (std::size_t j = 0; j < dim; ++j) r += theta[j] * x[j];
    return r * r;
  }
  Vec z = logits(x);
  double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  return mx + std::log(s) - z[static_cast<std::size_t>(target)];
}

Vec ToyModel::param_gradient(const double* x, double target) const {
  Vec g(num_params(), 0.0);
  if (kind == ModelKind::kLinearRegression) {
    double r = -target;
    for (std::size_t j = 0; j < dim; ++j) r += theta[j] * x[j];
    for (std::size_t j = 0; j < dim; ++j) g[j] = 2.0 * r * x[j];
    return g;
  }
  Vec p = softmax(logits(x));
  p[static_cast<std::size_t>(target)] -= 1.0;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t j = 0; j < dim; ++j) g[c * dim + j] = p[c] * x[j];
  return g;
}

double ToyModel::mean_loss(const Dataset& data) const {
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    s += loss(data.row(i), kind == ModelKind::kLinearRegression ? data.targets[i] : data.labels[i]);
  return s / static_cast<double>(data.size());
}

Vec ToyModel::mean_gradient(const Dataset& data) const {
  Vec g(num_params(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    Vec gi = param_gradient(data.row(i),
                            kind == ModelKind::kLinearRegression ? data.targets[i] : data.labels[i]);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += gi[k];
  }
  for (double& v : g) v /= static_cast<double>(data.size());
  return g;
}

double ToyModel::match_objective(const Vec& observed, const Vec& x, double target) const {
  Vec g = param_gradient(x.data(), target);
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += (g[k] - observed[k]) * (g[k] - observed[k]);
  return s;
}

void ToyModel::match_gradient(const Vec& observed, const Vec& x, double target, Vec& grad_x,
                              double& grad_target) const {
  Vec g = param_gradient(x.data(), target);
  Vec e(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) e[k] = g[k] - observed[k];
  grad_x.assign(dim, 0.0);
  grad_target = 0.0;
  if (kind == ModelKind::kLinearRegression) {
    double r = -target, xe = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      r += theta[j] * x[j];
      xe += x[j] * e[j];
    }
    for (std::size_t j = 0; j < dim; ++j) grad_x[j] = 4.0 * (xe * theta[j] + r * e[j]);
    grad_target = -4.0 * xe;
    return;
  }
  Vec p = softmax(logits(x.data()));
  std::size_t label = static_cast<std::size_t>(target);
  Vec s(classes, 0.0), mean_row(dim, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t j = 0; j < dim; ++j) {
      s[c] += e[c * dim + j] * x[j];
      mean_row[j] += p[c] * theta[c * dim + j];
    }
  }
  for (std::size_t k = 0; k < dim; ++k) {
    double t = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      t += s[c] * p[c] * (theta[c * dim + k] - mean_row[k]);
      t += e[c * dim + k] * (p[c] - (c == label ? 1.0 : 0.0));
    }
    grad_x[k] = 2.0 * t;
  }
}

}  // namespace models
}  // namespace nflfed
