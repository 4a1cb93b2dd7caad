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

#include "fvem/mlp.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "fvem/error.hpp"

namespace fvem {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

ConstMatrixMap as_matrix(const DenseTensor& t) {
  return ConstMatrixMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                        static_cast<Eigen::Index>(t.cols()));
}
MatrixMap as_matrix(DenseTensor& t) {
  return MatrixMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}
ConstVectorMap as_vector(const DenseTensor& t) {
  return ConstVectorMap(t.data(), static_cast<Eigen::Index>(t.size()));
}
VectorMap as_vector(DenseTensor& t) {
  return VectorMap(t.data(), static_cast<Eigen::Index>(t.size()));
}

std::string layer_name(std::size_t index, std::size_t base_count) {
  return index < base_count ? "base[" + std::to_string(index) + "]" : std::string("head");
}

void check_layer(const Layer& layer, const std::string& name) {
  if (layer.weight.rank() != 2 || layer.bias.rank() != 1 ||
      layer.bias.size() != layer.weight.rows()) {
    throw DimensionError("layer " + name + ": weight " + layer.weight.shape_string() +
                         " and bias " + layer.bias.shape_string() + " disagree");
  }
}

DenseTensor affine(const Layer& layer, const DenseTensor& x) {
  DenseTensor out = DenseTensor::matrix(x.rows(), layer.out_dim());
  auto y = as_matrix(out);
  y.noalias() = as_matrix(x) * as_matrix(layer.weight).transpose();
  y.rowwise() += as_vector(layer.bias).transpose();
  return out;
}

void relu_inplace(DenseTensor& t) {
  for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
}

void check_labels(const DenseTensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy: logits must be rank 2");
  if (labels.size() != logits.rows()) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.rows()) + " rows");
  }
  if (logits.rows() == 0) throw InputError("cross_entropy: empty batch");
  const auto classes = static_cast<int>(logits.cols());
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw InputError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
  }
}

// Per-row log-sum-exp minus the true logit. Written as m + log1p(sum of the
// non-maximal terms) so saturated rows keep their tiny losses.
double row_loss(std::span<const double> z, int label, std::span<double> softmax) {
  const auto top = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
  const double m = z[top];
  double rest = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    const double e = std::exp(z[c] - m);
    if (!softmax.empty()) softmax[c] = e;
    if (c != top) rest += e;
  }
  const double log_norm = std::log1p(rest);
  if (!softmax.empty()) {
    const double inv = 1.0 / (1.0 + rest);
    for (double& s : softmax) s *= inv;
  }
  return (m - z[static_cast<std::size_t>(label)]) + log_norm;
}

void add_inplace(Layer& into, const Layer& other) {
  if (into.weight.shape() != other.weight.shape() || into.bias.shape() != other.bias.shape()) {
    throw DimensionError("gradient injection: shape mismatch");
  }
  as_vector(into.weight) += as_vector(other.weight);
  as_vector(into.bias) += as_vector(other.bias);
}

// Head and base gradients sharing one forward pass; the head gradient is
// skipped when `head_grad` is null.
void backprop(const BaseLayers& base, const Layer& head, const DenseTensor& batch,
              std::span<const int> labels, BaseLayers* base_grad, Layer* head_grad,
              double* loss) {
  check_chain(base, head, batch.cols());
  std::vector<DenseTensor> acts;
  acts.reserve(base.size());
  const DenseTensor* input = &batch;
  for (const Layer& layer : base) {
    DenseTensor a = affine(layer, *input);
    relu_inplace(a);
    acts.push_back(std::move(a));
    input = &acts.back();
  }
  const DenseTensor logits = affine(head, *input);
  DenseTensor dz = cross_entropy_grad(logits, labels, loss);

  if (head_grad != nullptr) {
    *head_grad = Layer::zeros(head.out_dim(), head.in_dim());
    as_matrix(head_grad->weight).noalias() = as_matrix(dz).transpose() * as_matrix(*input);
    as_vector(head_grad->bias) = as_matrix(dz).colwise().sum().transpose();
  }
  if (base_grad == nullptr || base.empty()) return;

  base_grad->assign(base.size(), Layer{});
  DenseTensor upstream = DenseTensor::matrix(dz.rows(), head.in_dim());
  as_matrix(upstream).noalias() = as_matrix(dz) * as_matrix(head.weight);
  for (std::size_t k = base.size(); k-- > 0;) {
    const DenseTensor& a = acts[k];
    for (std::size_t i = 0; i < upstream.size(); ++i) {
      if (a[i] <= 0.0) upstream[i] = 0.0;
    }
    const DenseTensor& prev = k == 0 ? batch : acts[k - 1];
    Layer& g = (*base_grad)[k];
    g = Layer::zeros(base[k].out_dim(), base[k].in_dim());
    as_matrix(g.weight).noalias() = as_matrix(upstream).transpose() * as_matrix(prev);
    as_vector(g.bias) = as_matrix(upstream).colwise().sum().transpose();
    if (k > 0) {
      DenseTensor next = DenseTensor::matrix(upstream.rows(), base[k].in_dim());
      as_matrix(next).noalias() = as_matrix(upstream) * as_matrix(base[k].weight);
      upstream = std::move(next);
    }
  }
}

}  // namespace

std::size_t MlpSpec::head_dim() const { return num_classes * feature_dim() + num_classes; }

std::size_t MlpSpec::feature_dim() const { return hidden.empty() ? input_dim : hidden.back(); }

MlpParams init_params(const MlpSpec& spec, Stream& rng) {
  if (spec.input_dim == 0 || spec.num_classes == 0) {
    throw InputError("init_params: input_dim and num_classes must be positive");
  }
  auto make = [&rng](std::size_t out, std::size_t in) {
    if (out == 0) throw InputError("init_params: zero-width layer");
    Layer layer = Layer::zeros(out, in);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : layer.weight.values()) v = (2.0 * rng.uniform() - 1.0) * bound;
    for (double& v : layer.bias.values()) v = (2.0 * rng.uniform() - 1.0) * bound;
    return layer;
  };
  MlpParams params;
  std::size_t in = spec.input_dim;
  for (std::size_t width : spec.hidden) {
    params.base.push_back(make(width, in));
    in = width;
  }
  params.head = make(spec.num_classes, in);
  return params;
}

void check_chain(std::span<const Layer> base, const Layer& head, std::size_t input_dim) {
  std::size_t in = input_dim;
  for (std::size_t k = 0; k <= base.size(); ++k) {
    const Layer& layer = k < base.size() ? base[k] : head;
    const std::string name = layer_name(k, base.size());
    check_layer(layer, name);
    if (layer.in_dim() != in) {
      throw DimensionError("layer " + name + ": expects input dim " +
                           std::to_string(layer.in_dim()) + ", got " + std::to_string(in));
    }
    in = layer.out_dim();
  }
}

DenseTensor base_features(std::span<const Layer> base, const DenseTensor& batch) {
  if (batch.rank() != 2) throw DimensionError("batch must be rank 2, got " + batch.shape_string());
  std::size_t in = batch.cols();
  for (std::size_t k = 0; k < base.size(); ++k) {
    check_layer(base[k], layer_name(k, base.size()));
    if (base[k].in_dim() != in) {
      throw DimensionError("layer base[" + std::to_string(k) + "]: expects input dim " +
                           std::to_string(base[k].in_dim()) + ", got " + std::to_string(in));
    }
    in = base[k].out_dim();
  }
  if (base.empty()) return batch;
  DenseTensor a = affine(base[0], batch);
  relu_inplace(a);
  for (std::size_t k = 1; k < base.size(); ++k) {
    a = affine(base[k], a);
    relu_inplace(a);
  }
  return a;
}

DenseTensor head_logits(const Layer& head, const DenseTensor& features) {
  check_layer(head, "head");
  if (features.rank() != 2 || head.in_dim() != features.cols()) {
    throw DimensionError("layer head: expects input dim " + std::to_string(head.in_dim()) +
                         ", got features " + features.shape_string());
  }
  return affine(head, features);
}

DenseTensor forward(const MlpParams& params, const DenseTensor& batch) {
  if (batch.rank() != 2) throw DimensionError("batch must be rank 2, got " + batch.shape_string());
  check_chain(params.base, params.head, batch.cols());
  return head_logits(params.head, base_features(params.base, batch));
}

double cross_entropy(const DenseTensor& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) total += row_loss(logits.row(i), labels[i], {});
  return total / static_cast<double>(logits.rows());
}

DenseTensor cross_entropy_grad(const DenseTensor& logits, std::span<const int> labels,
                               double* loss) {
  check_labels(logits, labels);
  const std::size_t rows = logits.rows();
  const std::size_t cols = logits.cols();
  DenseTensor grad = DenseTensor::matrix(rows, cols);
  const double scale = 1.0 / static_cast<double>(rows);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    std::span<double> g = grad.values().subspan(i * cols, cols);
    total += row_loss(logits.row(i), labels[i], g);
    g[static_cast<std::size_t>(labels[i])] -= 1.0;
    for (double& v : g) v *= scale;
  }
  if (loss != nullptr) *loss = total * scale;
  return grad;
}

std::vector<int> predict(const DenseTensor& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto r = logits.row(i);
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

MlpParams backward(const MlpParams& params, const DenseTensor& batch, std::span<const int> labels,
                   const MlpParams* extra, double* loss) {
  if (batch.rank() != 2) throw DimensionError("batch must be rank 2, got " + batch.shape_string());
  MlpParams grads;
  backprop(params.base, params.head, batch, labels, &grads.base, &grads.head, loss);
  if (extra != nullptr) {
    if (extra->base.size() != grads.base.size()) {
      throw DimensionError("gradient injection: base depth mismatch");
    }
    for (std::size_t k = 0; k < grads.base.size(); ++k) add_inplace(grads.base[k], extra->base[k]);
    add_inplace(grads.head, extra->head);
  }
  return grads;
}

Layer head_backward(const Layer& head, const DenseTensor& features, std::span<const int> labels,
                    double* loss) {
  Layer grad;
  backprop({}, head, features, labels, nullptr, &grad, loss);
  return grad;
}

MlpParams sgd_step(const MlpParams& params, const MlpParams& grads, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InputError("sgd_step: learning rate must be >= 0");
  if (params.base.size() != grads.base.size()) {
    throw DimensionError("sgd_step: base depth mismatch");
  }
  MlpParams out = params;
  const std::size_t n = params.base.size();
  for (std::size_t k = 0; k <= n; ++k) {
    Layer& p = k < n ? out.base[k] : out.head;
    const Layer& g = k < n ? grads.base[k] : grads.head;
    const std::string name = layer_name(k, n);
    if (p.weight.shape() != g.weight.shape() || p.bias.shape() != g.bias.shape()) {
      throw DimensionError("sgd_step: gradient shape mismatch in layer " + name);
    }
    if (!g.weight.all_finite() || !g.bias.all_finite()) {
      throw NumericError("sgd_step: non-finite gradient in layer " + name);
    }
    as_vector(p.weight) -= lr * as_vector(g.weight);
    as_vector(p.bias) -= lr * as_vector(g.bias);
  }
  return out;
}

std::vector<double> flatten(const Layer& layer) {
  std::vector<double> flat;
  flat.reserve(layer.param_count());
  flat.insert(flat.end(), layer.weight.values().begin(), layer.weight.values().end());
  flat.insert(flat.end(), layer.bias.values().begin(), layer.bias.values().end());
  return flat;
}

Layer unflatten(std::span<const double> flat, std::size_t out_dim, std::size_t in_dim) {
  if (flat.size() != out_dim * in_dim + out_dim) {
    throw DimensionError("unflatten: " + std::to_string(flat.size()) + " values for a " +
                         std::to_string(out_dim) + "x" + std::to_string(in_dim) + " layer");
  }
  Layer layer = Layer::zeros(out_dim, in_dim);
  std::copy_n(flat.begin(), layer.weight.size(), layer.weight.data());
  std::copy(flat.begin() + static_cast<std::ptrdiff_t>(layer.weight.size()), flat.end(),
            layer.bias.data());
  return layer;
}

std::vector<double> flatten(std::span<const Layer> layers) {
  std::vector<double> flat;
  flat.reserve(param_count(layers));
  for (const Layer& layer : layers) {
    flat.insert(flat.end(), layer.weight.values().begin(), layer.weight.values().end());
    flat.insert(flat.end(), layer.bias.values().begin(), layer.bias.values().end());
  }
  return flat;
}

BaseLayers unflatten(std::span<const double> flat, std::span<const Layer> like) {
  if (flat.size() != param_count(like)) {
    throw DimensionError("unflatten: " + std::to_string(flat.size()) + " values for " +
                         std::to_string(param_count(like)) + " parameters");
  }
  BaseLayers out;
  out.reserve(like.size());
  std::size_t offset = 0;
  for (const Layer& l : like) {
    out.push_back(unflatten(flat.subspan(offset, l.param_count()), l.out_dim(), l.in_dim()));
    offset += l.param_count();
  }
  return out;
}

std::size_t param_count(std::span<const Layer> layers) {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.param_count();
  return n;
}

MlpParams zeros_like(const MlpParams& params) {
  MlpParams z;
  for (const Layer& l : params.base) z.base.push_back(Layer::zeros(l.out_dim(), l.in_dim()));
  z.head = Layer::zeros(params.head.out_dim(), params.head.in_dim());
  return z;
}

}  // namespace fvem
