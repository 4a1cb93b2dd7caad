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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fvem/error.hpp"
#include "oracles.hpp"

namespace fvem {
namespace {

using testing::central_difference;
using testing::relative_error;

VariationalPosterior random_posterior(std::mt19937_64& gen, std::size_t d) {
  return {testing::random_vector(gen, d), testing::random_vector(gen, d, -2.0, 1.0)};
}

TEST(Softplus, Values) {
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  const double tiny = softplus(-50.0);
  EXPECT_GE(tiny, 0.0);
  EXPECT_NEAR(tiny, std::exp(-50.0), 1e-30);
  EXPECT_NEAR(softplus(50.0), 50.0, 1e-12);
  EXPECT_TRUE(std::isfinite(softplus(1e6)));
  EXPECT_NEAR(softplus_inverse(softplus(0.3)), 0.3, 1e-14);
}

TEST(Sample, ZeroNoiseReturnsMean) {
  std::mt19937_64 gen(1);
  const auto post = random_posterior(gen, 6);
  EXPECT_EQ(sample(post, std::vector<double>(6, 0.0)), post.mu);
}

TEST(Sample, ZeroScaleIgnoresNoise) {
  std::mt19937_64 gen(2);
  VariationalPosterior post{testing::random_vector(gen, 4), std::vector<double>(4, -1e6)};
  EXPECT_EQ(sample(post, testing::random_vector(gen, 4, -5.0, 5.0)), post.mu);
}

TEST(Sample, LengthMismatch) {
  const VariationalPosterior post{{0.0, 1.0}, {0.0, 0.0}};
  EXPECT_THROW(sample(post, std::vector<double>(3)), InputError);
}

TEST(Sample, MonteCarloMoments) {
  std::mt19937_64 gen(3);
  const std::size_t d = 3;
  const auto post = random_posterior(gen, d);
  const auto sigma = post.sigma();
  Stream rng(3, {99});
  const std::size_t n = 1000000;
  std::vector<double> sum(d, 0.0), sq(d, 0.0), noise(d);
  for (std::size_t s = 0; s < n; ++s) {
    rng.fill_normal(noise);
    const auto w = sample(post, noise);
    for (std::size_t i = 0; i < d; ++i) {
      sum[i] += w[i];
      sq[i] += w[i] * w[i];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    const double mean = sum[i] / n;
    const double var = sq[i] / n - mean * mean;
    EXPECT_NEAR(mean, post.mu[i], 4.0 * sigma[i] / std::sqrt(double(n)));
    EXPECT_NEAR(var / (sigma[i] * sigma[i]), 1.0, 0.02);
  }
}

TEST(Kl, SelfDistanceIsZero) {
  const double tau = 2.5;
  const std::vector<double> sig(5, 1.0 / std::sqrt(tau));
  const auto post = VariationalPosterior::from_sigma({0.1, -0.2, 0.3, 0.0, 1.0}, sig);
  EXPECT_NEAR(kl_to_prior(post, {post.mu, tau}), 0.0, 1e-12);
}

TEST(Kl, HandValues) {
  const auto a = VariationalPosterior::from_sigma({1.0}, std::vector<double>{1.0});
  EXPECT_NEAR(kl_to_prior(a, {{0.0}, 1.0}), 0.5, 1e-12);
  const auto b = VariationalPosterior::from_sigma({0.0}, std::vector<double>{0.5});
  EXPECT_NEAR(kl_to_prior(b, {{0.0}, 1.0}), std::log(2.0) + 0.125 - 0.5, 1e-12);
  EXPECT_NEAR(kl_to_prior(b, {{0.0}, 1.0}), 0.318147, 1e-6);
}

TEST(Kl, NonPositiveTauIsDomainError) {
  const VariationalPosterior post{{0.0}, {0.0}};
  EXPECT_THROW(kl_to_prior(post, {{0.0}, 0.0}), DomainError);
  EXPECT_THROW(kl_to_prior(post, {{0.0}, -1.0}), DomainError);
}

TEST(Kl, NonNegativeOnRandomInstances) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> tau(0.01, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const auto post = random_posterior(gen, 1 + i % 8);
    const IsotropicPrior prior{testing::random_vector(gen, post.dim()), tau(gen)};
    EXPECT_GE(kl_to_prior(post, prior), -1e-12);
  }
}

TEST(Kl, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(5);
  auto post = random_posterior(gen, 7);
  const IsotropicPrior prior{testing::random_vector(gen, 7), 3.0};
  const KlTerm kl = kl_to_prior_with_grad(post, prior);
  auto f = [&] { return kl_to_prior(post, prior); };
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_LE(relative_error(kl.grad_mu[i], central_difference(f, post.mu[i])), 1e-6);
    EXPECT_LE(relative_error(kl.grad_pi[i], central_difference(f, post.pi[i])), 1e-6);
  }
}

// Jensen on -sum log sigma_i: with equal constants on both sides the bound
// reads -(d/2) log(Tr Sigma / d) + (tau/2)(Tr Sigma + ||mu - w||^2) - (d/2) log tau - d/2.
TEST(Kl, JensenLowerBound) {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> tau_dist(0.01, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = 1 + i % 10;
    const auto post = random_posterior(gen, d);
    const IsotropicPrior prior{testing::random_vector(gen, d), tau_dist(gen)};
    const double tr = post.trace();
    double dev = 0.0;
    for (std::size_t k = 0; k < d; ++k) dev += (post.mu[k] - prior.center[k]) * (post.mu[k] - prior.center[k]);
    const double dd = static_cast<double>(d);
    const double bound = -0.5 * dd * std::log(tr / dd) + 0.5 * prior.tau * (tr + dev) -
                         0.5 * dd * std::log(prior.tau) - 0.5 * dd;
    EXPECT_GE(kl_to_prior(post, prior), bound - 1e-12);
  }
}

class QuadraticLikelihood {
 public:
  // n * f(w) = 0.5 * sum_i a_i (w_i - b_i)^2
  QuadraticLikelihood(std::vector<double> a, std::vector<double> b) : a_(std::move(a)), b_(std::move(b)) {}

  Likelihood fn() const {
    return [this](std::span<const double> w, std::span<double> g) {
      double v = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        v += 0.5 * a_[i] * (w[i] - b_[i]) * (w[i] - b_[i]);
        g[i] = a_[i] * (w[i] - b_[i]);
      }
      return v;
    };
  }

 private:
  std::vector<double> a_, b_;
};

TEST(LocalLoss, DeterministicHeadLimit) {
  std::mt19937_64 gen(7);
  const std::size_t n = 12, feat = 4, classes = 3;
  const DenseTensor x({n, feat}, testing::random_vector(gen, n * feat));
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % classes);
  VariationalPosterior post{testing::random_vector(gen, classes * (feat + 1)),
                            std::vector<double>(classes * (feat + 1), -30.0)};
  const IsotropicPrior prior{testing::random_vector(gen, post.dim()), 2.0};
  const LocalObjective obj =
      mc_local_loss(post, prior, head_likelihood(x, y, classes), std::vector<double>(post.dim(), 0.0));
  const Layer head = unflatten(post.mu, classes, feat);
  const double want = n * cross_entropy(head_logits(head, x), y) + kl_to_prior(post, prior);
  EXPECT_NEAR(obj.value, want, 1e-9 * std::abs(want));
}

TEST(LocalLoss, ZeroSamplesRejected) {
  const VariationalPosterior post{{0.0}, {0.0}};
  QuadraticLikelihood q({1.0}, {0.0});
  Stream rng(1, {1});
  EXPECT_THROW(mc_local_loss(post, {{0.0}, 1.0}, q.fn(), 0, rng), InputError);
}

TEST(LocalLoss, GradientMatchesFiniteDifferencesWithFrozenNoise) {
  std::mt19937_64 gen(8);
  const std::size_t n = 20, feat = 6, classes = 4, k = 3;
  const DenseTensor x({n, feat}, testing::random_vector(gen, n * feat, -2.0, 2.0));
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>((i * 7) % classes);
  const std::size_t d = classes * (feat + 1);
  auto post = random_posterior(gen, d);
  const IsotropicPrior prior{testing::random_vector(gen, d), 1.7};
  std::vector<double> noise(k * d);
  std::normal_distribution<double> z;
  for (double& v : noise) v = z(gen);
  const Likelihood nll = head_likelihood(x, y, classes);
  const LocalObjective obj = mc_local_loss(post, prior, nll, noise);
  auto f = [&] { return mc_local_loss(post, prior, nll, noise).value; };
  for (std::size_t i = 0; i < d; ++i) {
    EXPECT_LE(relative_error(obj.grad_mu[i], central_difference(f, post.mu[i])), 1e-4) << i;
    EXPECT_LE(relative_error(obj.grad_pi[i], central_difference(f, post.pi[i])), 1e-4) << i;
  }
}

TEST(LocalLoss, SampleCountDoesNotShiftExpectation) {
  std::mt19937_64 gen(9);
  const std::size_t n = 15, feat = 3, classes = 3;
  const DenseTensor x({n, feat}, testing::random_vector(gen, n * feat));
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % classes);
  const std::size_t d = classes * (feat + 1);
  const auto post = random_posterior(gen, d);
  const IsotropicPrior prior{std::vector<double>(d, 0.0), 1.0};
  const Likelihood nll = head_likelihood(x, y, classes);
  auto stats = [&](std::size_t k, std::uint64_t tag) {
    std::vector<double> v;
    for (std::uint64_t r = 0; r < 200; ++r) {
      Stream rng(11, {tag, r});
      v.push_back(mc_local_loss(post, prior, nll, k, rng).value);
    }
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, std::sqrt(ss / (v.size() - 1) / v.size())};
  };
  const auto [m1, se1] = stats(1, 1);
  const auto [m4, se4] = stats(4, 2);
  EXPECT_LE(std::abs(m1 - m4), 3.0 * std::hypot(se1, se4));
}

TEST(LocalLoss, KlOnlyStepMovesTowardPrior) {
  const VariationalPosterior start{{1.0, -2.0, 0.5}, {0.3, 0.3, 0.3}};
  const IsotropicPrior prior{{0.0, 0.0, 1.0}, 4.0};
  const Likelihood none = [](std::span<const double>, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    return 0.0;
  };
  VariationalPosterior post = start;
  const double eta = 0.01;
  descend(post, mc_local_loss(post, prior, none, std::vector<double>(3, 0.0)), eta);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(post.mu[i], start.mu[i] - eta * prior.tau * (start.mu[i] - prior.center[i]));
  }
}

TEST(Confidence, HandValues) {
  const auto a = VariationalPosterior::from_sigma({1, 2, 3, 4}, std::vector<double>(4, 1.0));
  EXPECT_NEAR(confidence(a, a.mu).tau, 1.0, 1e-12);

  const auto b = VariationalPosterior::from_sigma({1.0, 1.0}, std::vector<double>(2, 0.5));
  const std::vector<double> cb{1.0 - std::sqrt(0.75), 1.0 - std::sqrt(0.75)};
  const Confidence c2 = confidence(b, cb);
  EXPECT_NEAR(c2.uncertainty, 0.5, 1e-12);
  EXPECT_NEAR(c2.deviation, 1.5, 1e-12);
  EXPECT_NEAR(c2.tau, 1.0, 1e-12);

  const std::vector<double> s3{std::sqrt(0.1), std::sqrt(0.2), std::sqrt(0.3)};
  const auto c = VariationalPosterior::from_sigma({1.0, 0.0, -1.0}, s3);
  EXPECT_NEAR(confidence(c, std::vector<double>(3, 0.0)).tau, 3.0 / 2.6, 1e-12);
}

TEST(Confidence, AblationModes) {
  const std::vector<double> s3{std::sqrt(0.1), std::sqrt(0.2), std::sqrt(0.3)};
  const auto c = VariationalPosterior::from_sigma({1.0, 0.0, -1.0}, s3);
  const std::vector<double> zero(3, 0.0);
  EXPECT_NEAR(confidence(c, zero, ConfidenceMode::kUncertaintyOnly).tau, 3.0 / 0.6, 1e-12);
  EXPECT_NEAR(confidence(c, zero, ConfidenceMode::kDeviationOnly).tau, 3.0 / 2.0, 1e-12);
}

TEST(Confidence, DegenerateFitIsClamped) {
  const VariationalPosterior post{{0.5, 0.5}, {-1e6, -1e6}};
  EXPECT_EQ(confidence(post, post.mu).tau, 1e8);
  EXPECT_EQ(confidence(post, post.mu, ConfidenceMode::kFull, {1e-3, 1e3}).tau, 1e3);
}

TEST(Confidence, PermutationAndTranslationInvariant) {
  std::mt19937_64 gen(10);
  for (int t = 0; t < 50; ++t) {
    const auto post = random_posterior(gen, 6);
    const auto center = testing::random_vector(gen, 6);
    const double tau = confidence(post, center).tau;
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    VariationalPosterior p2 = post;
    std::vector<double> c2 = center;
    for (std::size_t i = 0; i < 6; ++i) {
      p2.mu[i] = post.mu[perm[i]];
      p2.pi[i] = post.pi[perm[i]];
      c2[i] = center[perm[i]];
    }
    EXPECT_NEAR(confidence(p2, c2).tau, tau, 1e-12 * tau);
    const double shift = std::uniform_real_distribution<double>(-3, 3)(gen);
    for (std::size_t i = 0; i < 6; ++i) {
      p2.mu[i] += shift;
      c2[i] += shift;
    }
    EXPECT_NEAR(confidence(p2, c2).tau, tau, 1e-9 * tau);
  }
}

// E_q[log N(w_j | w, rho^2 I)] = -d/2 log(2 pi rho^2) - (Tr Sigma + ||mu - w||^2) / (2 rho^2)
TEST(Confidence, MaximizesServerObjectiveOverRho) {
  std::mt19937_64 gen(11);
  for (int t = 0; t < 20; ++t) {
    const std::size_t d = 1 + t % 6;
    const auto post = random_posterior(gen, d);
    const auto center = testing::random_vector(gen, d);
    const Confidence c = confidence(post, center);
    const double total = c.uncertainty + c.deviation;
    auto objective = [&](double log_rho2) {
      const double rho2 = std::exp(log_rho2);
      return -0.5 * d * std::log(2.0 * M_PI * rho2) - total / (2.0 * rho2);
    };
    const double rho2 = std::exp(testing::golden_max(objective, std::log(1e-6), std::log(1e6)));
    EXPECT_NEAR(rho2 * c.tau, 1.0, 1e-6);
  }
}

TEST(Sample, FrozenNoiseDeterministic) {
  std::mt19937_64 gen(12);
  const auto post = random_posterior(gen, 5);
  const auto noise = testing::random_vector(gen, 5);
  EXPECT_EQ(sample(post, noise), sample(post, noise));
}

}  // namespace
}  // namespace fvem
