// Copyright 2026 The fvem Authors
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

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fvem/rng.hpp"
#include "fvem/tensor.hpp"

namespace fvem {

/// Affine map y = x W^T + b with W of shape (out, in).
struct Layer {
  DenseTensor weight;
  DenseTensor bias;

  [[nodiscard]] std::size_t in_dim() const { return weight.cols(); }
  [[nodiscard]] std::size_t out_dim() const { return weight.rows(); }
  [[nodiscard]] std::size_t param_count() const { return weight.size() + bias.size(); }

  static Layer zeros(std::size_t out, std::size_t in) {
    return {DenseTensor::matrix(out, in), DenseTensor::vector(out)};
  }

  friend bool operator==(const Layer&, const Layer&) = default;
};

using BaseLayers = std::vector<Layer>;

/// Hidden layers (the shared base) plus a final linear classifier (the head).
struct MlpParams {
  BaseLayers base;
  Layer head;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct MlpSpec {
  std::size_t input_dim = 784;
  std::vector<std::size_t> hidden = {100};
  std::size_t num_classes = 10;

  /// Flattened head length (weights then biases).
  [[nodiscard]] std::size_t head_dim() const;
  [[nodiscard]] std::size_t feature_dim() const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
MlpParams init_params(const MlpSpec& spec, Stream& rng);

/// Throws DimensionError naming the first layer whose input does not match.
void check_chain(std::span<const Layer> base, const Layer& head, std::size_t input_dim);

/// Base output: every hidden layer is followed by a rectifier.
DenseTensor base_features(std::span<const Layer> base, const DenseTensor& batch);
DenseTensor head_logits(const Layer& head, const DenseTensor& features);
DenseTensor forward(const MlpParams& params, const DenseTensor& batch);

/// Mean negative log-softmax at the true label.
double cross_entropy(const DenseTensor& logits, std::span<const int> labels);
/// d(cross_entropy)/d(logits); also returns the loss through `loss`.
DenseTensor cross_entropy_grad(const DenseTensor& logits, std::span<const int> labels,
                               double* loss = nullptr);

std::vector<int> predict(const DenseTensor& logits);

/// Exact reverse-mode gradient of cross_entropy (+ extra, if given) w.r.t.
/// every parameter. `extra` has the shape of `params` and is added as-is.
MlpParams backward(const MlpParams& params, const DenseTensor& batch, std::span<const int> labels,
                   const MlpParams* extra = nullptr, double* loss = nullptr);

/// Gradient of cross_entropy w.r.t. the head only, given base features.
Layer head_backward(const Layer& head, const DenseTensor& features, std::span<const int> labels,
                    double* loss = nullptr);

/// params - lr * grads. Throws NumericError naming the layer on a
/// non-finite gradient.
MlpParams sgd_step(const MlpParams& params, const MlpParams& grads, double lr);

std::vector<double> flatten(const Layer& layer);
Layer unflatten(std::span<const double> flat, std::size_t out_dim, std::size_t in_dim);
std::vector<double> flatten(std::span<const Layer> layers);
/// Rebuilds layers shaped like `like` from a flat vector.
BaseLayers unflatten(std::span<const double> flat, std::span<const Layer> like);
std::size_t param_count(std::span<const Layer> layers);

MlpParams zeros_like(const MlpParams& params);

}  // namespace fvem
