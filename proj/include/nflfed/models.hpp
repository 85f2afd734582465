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

#ifndef NFLFED_MODELS_HPP_
#define NFLFED_MODELS_HPP_

#include <cstddef>
#include <vector>

#include "nflfed/common.hpp"

namespace nflfed {
namespace models {

// Row-major feature matrix with regression targets and class labels.
struct Dataset {
  std::size_t dim = 0;
  Vec features;
  Vec targets;
  std::vector<int> labels;

  std::size_t size() const { return dim == 0 ? 0 : features.size() / dim; }
  const double* row(std::size_t i) const { return features.data() + i * dim; }
};

enum class ModelKind { kLinearRegression, kSoftmaxLinear };

// Linear regression, squared loss, no bias; or softmax-linear classifier with
// a (classes x dim) weight matrix and cross-entropy loss.
struct ToyModel {
  ModelKind kind = ModelKind::kLinearRegression;
  std::size_t dim = 1;
  std::size_t classes = 1;
  Vec theta;

  static ToyModel linear_regression(Vec theta);
  static ToyModel softmax_linear(std::size_t dim, std::size_t classes, Vec theta);

  std::size_t num_params() const { return kind == ModelKind::kLinearRegression ? dim : dim * classes; }
  // `target` is the regression target or the class label.
  double loss(const double* x, double target) const;
  Vec param_gradient(const double* x, double target) const;
  Vec logits(const double* x) const;

  // Mean loss and gradient over a dataset.
  double mean_loss(const Dataset& data) const;
  Vec mean_gradient(const Dataset& data) const;

  // Gradient of ||observed - param_gradient(x, target)||^2 with respect to x
  // and (regression only) the target.
  double match_objective(const Vec& observed, const Vec& x, double target) const;
  void match_gradient(const Vec& observed, const Vec& x, double target, Vec& grad_x,
                      double& grad_target) const;
};

Vec softmax(const Vec& z);

}  // namespace models
}  // namespace nflfed

#endif  // NFLFED_MODELS_HPP_
