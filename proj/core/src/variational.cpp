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

#include "fvem/variational.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fvem/error.hpp"

namespace fvem {
namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InputError(std::string(what) + ": dimension " + std::to_string(a) + " vs " +
                     std::to_string(b));
  }
}

void check_posterior(const VariationalPosterior& post) {
  require_same_dim(post.mu.size(), post.pi.size(), "posterior mu/pi");
}

}  // namespace

double softplus(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw DomainError("softplus_inverse: argument must be positive");
  if (y > 30.0) return y + std::log(-std::expm1(-y));
  return std::log(std::expm1(y));
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

VariationalPosterior VariationalPosterior::from_sigma(std::vector<double> mu,
                                                      std::span<const double> sigma) {
  require_same_dim(mu.size(), sigma.size(), "from_sigma");
  VariationalPosterior post{std::move(mu), std::vector<double>(sigma.size())};
  for (std::size_t i = 0; i < sigma.size(); ++i) post.pi[i] = softplus_inverse(sigma[i]);
  return post;
}

std::vector<double> VariationalPosterior::sigma() const {
  std::vector<double> s(pi.size());
  std::transform(pi.begin(), pi.end(), s.begin(), softplus);
  return s;
}

double VariationalPosterior::trace() const {
  double t = 0.0;
  for (double p : pi) {
    const double s = softplus(p);
    t += s * s;
  }
  return t;
}

std::vector<double> sample(const VariationalPosterior& post, std::span<const double> noise) {
  check_posterior(post);
  require_same_dim(noise.size(), post.dim(), "sample: noise");
  std::vector<double> w(post.dim());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = post.mu[i] + softplus(post.pi[i]) * noise[i];
  return w;
}

KlTerm kl_to_prior_with_grad(const VariationalPosterior& post, const IsotropicPrior& prior) {
  check_posterior(post);
  require_same_dim(post.dim(), prior.center.size(), "kl_to_prior: prior center");
  if (!(prior.tau > 0.0)) throw DomainError("kl_to_prior: tau must be positive");
  const double tau = prior.tau;
  // ln(rho / sigma) = -0.5 ln tau - ln sigma
  const double half_log_tau = 0.5 * std::log(tau);
  KlTerm out;
  out.grad_mu.resize(post.dim());
  out.grad_pi.resize(post.dim());
  for (std::size_t i = 0; i < post.dim(); ++i) {
    const double sigma = softplus(post.pi[i]);
    const double diff = post.mu[i] - prior.center[i];
    out.value += -half_log_tau - std::log(sigma) + 0.5 * tau * (sigma * sigma + diff * diff) - 0.5;
    out.grad_mu[i] = diff * tau;
    out.grad_pi[i] = (-1.0 / sigma + sigma * tau) * logistic(post.pi[i]);
  }
  return out;
}

double kl_to_prior(const VariationalPosterior& post, const IsotropicPrior& prior) {
  return kl_to_prior_with_grad(post, prior).value;
}

Likelihood head_likelihood(const DenseTensor& features, std::span<const int> labels,
                           std::size_t num_classes) {
  if (features.rank() != 2) throw DimensionError("head_likelihood: features must be rank 2");
  const std::size_t in_dim = features.cols();
  const auto n = static_cast<double>(features.rows());
  return [&features, labels, num_classes, in_dim, n](std::span<const double> head,
                                                     std::span<double> grad) {
    const Layer layer = unflatten(head, num_classes, in_dim);
    double loss = 0.0;
    const Layer g = head_backward(layer, features, labels, &loss);
    const auto gw = g.weight.values();
    const auto gb = g.bias.values();
    std::transform(gw.begin(), gw.end(), grad.begin(), [n](double v) { return n * v; });
    std::transform(gb.begin(), gb.end(), grad.begin() + static_cast<std::ptrdiff_t>(gw.size()),
                   [n](double v) { return n * v; });
    return n * loss;
  };
}

LocalObjective mc_local_loss(const VariationalPosterior& post, const IsotropicPrior& prior,
                             const Likelihood& likelihood, std::span<const double> noise) {
  check_posterior(post);
  const std::size_t d = post.dim();
  if (d == 0) throw InputError("mc_local_loss: empty posterior");
  if (noise.empty() || noise.size() % d != 0) {
    throw InputError("mc_local_loss: noise must hold K >= 1 samples of dimension " +
                     std::to_string(d));
  }
  const std::size_t samples = noise.size() / d;
  const double inv_k = 1.0 / static_cast<double>(samples);

  KlTerm kl = kl_to_prior_with_grad(post, prior);
  LocalObjective out;
  out.kl = kl.value;
  out.grad_mu = std::move(kl.grad_mu);
  out.grad_pi = std::move(kl.grad_pi);

  std::vector<double> sigma_slope(d);
  for (std::size_t i = 0; i < d; ++i) sigma_slope[i] = logistic(post.pi[i]);

  std::vector<double> grad_w(d);
  for (std::size_t k = 0; k < samples; ++k) {
    const auto eps = noise.subspan(k * d, d);
    const std::vector<double> w = sample(post, eps);
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    out.likelihood += inv_k * likelihood(w, grad_w);
    for (std::size_t i = 0; i < d; ++i) {
      out.grad_mu[i] += inv_k * grad_w[i];
      out.grad_pi[i] += inv_k * grad_w[i] * eps[i] * sigma_slope[i];
    }
  }
  out.value = out.likelihood + out.kl;
  return out;
}

LocalObjective mc_local_loss(const VariationalPosterior& post, const IsotropicPrior& prior,
                             const Likelihood& likelihood, std::size_t samples, Stream& rng) {
  if (samples == 0) throw InputError("mc_local_loss: K must be at least 1");
  std::vector<double> noise(samples * post.dim());
  rng.fill_normal(noise);
  return mc_local_loss(post, prior, likelihood, noise);
}

LocalObjective mc_local_loss(const VariationalPosterior& post, const IsotropicPrior& prior,
                             const DenseTensor& batch, std::span<const int> labels,
                             std::span<const Layer> base, std::size_t num_classes,
                             std::size_t samples, Stream& rng) {
  if (batch.rank() != 2 || batch.rows() == 0) throw InputError("mc_local_loss: empty batch");
  const DenseTensor features = base_features(base, batch);
  return mc_local_loss(post, prior, head_likelihood(features, labels, num_classes), samples, rng);
}

void descend(VariationalPosterior& post, const LocalObjective& objective, double lr) {
  require_same_dim(objective.grad_mu.size(), post.dim(), "descend");
  for (std::size_t i = 0; i < post.dim(); ++i) {
    post.mu[i] -= lr * objective.grad_mu[i];
    post.pi[i] -= lr * objective.grad_pi[i];
  }
}

Confidence confidence(const VariationalPosterior& post, std::span<const double> center,
                      ConfidenceMode mode, TauBounds bounds) {
  check_posterior(post);
  require_same_dim(post.dim(), center.size(), "confidence: center");
  if (post.dim() == 0) throw InputError("confidence: empty posterior");
  Confidence c;
  c.uncertainty = post.trace();
  for (std::size_t i = 0; i < post.dim(); ++i) {
    const double diff = post.mu[i] - center[i];
    c.deviation += diff * diff;
  }
  double denom = 0.0;
  switch (mode) {
    case ConfidenceMode::kFull: denom = c.uncertainty + c.deviation; break;
    case ConfidenceMode::kUncertaintyOnly: denom = c.uncertainty; break;
    case ConfidenceMode::kDeviationOnly: denom = c.deviation; break;
  }
  const double raw = denom > 0.0 ? static_cast<double>(post.dim()) / denom : bounds.max;
  c.tau = std::clamp(raw, bounds.min, bounds.max);
  return c;
}

}  // namespace fvem
