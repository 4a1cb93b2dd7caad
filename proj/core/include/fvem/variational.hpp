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
#include <functional>
#include <span>
#include <vector>

#include "fvem/mlp.hpp"
#include "fvem/rng.hpp"
#include "fvem/tensor.hpp"

namespace fvem {

/// ln(1 + exp(x)) without overflow.
double softplus(double x);
/// Inverse of softplus on (0, inf).
double softplus_inverse(double y);
/// 1 / (1 + exp(-x)), the derivative of softplus.
double logistic(double x);

/// Diagonal Gaussian q(w) = N(mu, diag(softplus(pi)^2)) over the head.
struct VariationalPosterior {
  std::vector<double> mu;
  std::vector<double> pi;

  static VariationalPosterior from_sigma(std::vector<double> mu, std::span<const double> sigma);

  [[nodiscard]] std::size_t dim() const { return mu.size(); }
  [[nodiscard]] std::vector<double> sigma() const;
  /// Tr(Sigma) = sum of sigma_i^2.
  [[nodiscard]] double trace() const;

  friend bool operator==(const VariationalPosterior&, const VariationalPosterior&) = default;
};

/// N(center, I / tau): the conditional prior of one client given the latent head.
struct IsotropicPrior {
  std::vector<double> center;
  double tau = 1.0;
};

/// mu + softplus(pi) * noise.
std::vector<double> sample(const VariationalPosterior& post, std::span<const double> noise);

struct KlTerm {
  double value = 0.0;
  std::vector<double> grad_mu;
  std::vector<double> grad_pi;
};

/// Exact KL[q || p] for diagonal q and isotropic p, zero when q == p.
double kl_to_prior(const VariationalPosterior& post, const IsotropicPrior& prior);
/// KL together with its gradient w.r.t. (mu, pi).
KlTerm kl_to_prior_with_grad(const VariationalPosterior& post, const IsotropicPrior& prior);

/// n * f(w) for one head sample; writes d(n f)/dw into `grad`.
using Likelihood = std::function<double(std::span<const double> head, std::span<double> grad)>;

/// Negative log-likelihood n * cross_entropy of a linear head on fixed
/// features. The head vector is laid out as flatten(Layer).
Likelihood head_likelihood(const DenseTensor& features, std::span<const int> labels,
                           std::size_t num_classes);

struct LocalObjective {
  double value = 0.0;       ///< likelihood + kl
  double likelihood = 0.0;  ///< (1/K) sum_k n f(w_k)
  double kl = 0.0;
  std::vector<double> grad_mu;
  std::vector<double> grad_pi;
};

/// (1/K) sum_k n f(w_k) + KL with w_k = sample(post, noise_k). `noise` holds
/// K * d standard normals, sample k at [k*d, (k+1)*d).
LocalObjective mc_local_loss(const VariationalPosterior& post, const IsotropicPrior& prior,
                             const Likelihood& likelihood, std::span<const double> noise);
/// Same, drawing the K * d normals from `rng`.
LocalObjective mc_local_loss(const VariationalPosterior& post, const IsotropicPrior& prior,
                             const Likelihood& likelihood, std::size_t samples, Stream& rng);
/// Head objective for a data batch pushed through a fixed base.
LocalObjective mc_local_loss(const VariationalPosterior& post, const IsotropicPrior& prior,
                             const DenseTensor& batch, std::span<const int> labels,
                             std::span<const Layer> base, std::size_t num_classes,
                             std::size_t samples, Stream& rng);

/// One gradient-descent step on (mu, pi).
void descend(VariationalPosterior& post, const LocalObjective& objective, double lr);

enum class ConfidenceMode { kFull, kUncertaintyOnly, kDeviationOnly };

struct TauBounds {
  double min = 1e-8;
  double max = 1e8;
};

struct Confidence {
  double tau = 0.0;
  double uncertainty = 0.0;  ///< Tr(Sigma)
  double deviation = 0.0;    ///< ||mu - center||^2
};

/// tau = d / (Tr(Sigma) + ||mu - center||^2), clamped to `bounds`. The
/// ablation modes keep only one of the two terms in the denominator.
Confidence confidence(const VariationalPosterior& post, std::span<const double> center,
                      ConfidenceMode mode = ConfidenceMode::kFull, TauBounds bounds = {});

}  // namespace fvem
