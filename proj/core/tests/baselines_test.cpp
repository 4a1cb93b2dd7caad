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

#include "fvem/baselines.hpp"

#include <gtest/gtest.h>

#include <random>

#include "fvem/error.hpp"
#include "fvem/federation.hpp"
#include "fvem/partition.hpp"
#include "oracles.hpp"

namespace fvem {
namespace {

MlpSpec small_spec(std::size_t in = 8, std::size_t classes = 3) {
  MlpSpec spec;
  spec.input_dim = in;
  spec.hidden = {10};
  spec.num_classes = classes;
  return spec;
}

ClientData random_data(std::mt19937_64& gen, std::size_t n, std::size_t in, int classes) {
  ClientData d{DenseTensor::matrix(n, in), {}};
  std::normal_distribution<double> nd;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < in; ++k) d.x(i, k) = nd(gen);
    d.y.push_back(static_cast<int>(gen() % static_cast<std::uint64_t>(classes)));
  }
  return d;
}

std::vector<double*> coordinates(MlpParams& p) {
  std::vector<double*> out;
  auto add = [&](Layer& l) {
    for (double& v : l.weight.values()) out.push_back(&v);
    for (double& v : l.bias.values()) out.push_back(&v);
  };
  for (Layer& l : p.base) add(l);
  add(p.head);
  return out;
}

TEST(Proximal, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(4);
  const MlpSpec spec = small_spec();
  Stream rng(2, {1});
  MlpParams params = init_params(spec, rng);
  const MlpParams anchor = init_params(spec, rng);
  const ClientData d = random_data(gen, 12, spec.input_dim, 3);
  const double mu = 0.7;
  const ProximalObjective obj = proximal_objective(params, anchor, mu, d.x, d.y);
  MlpParams grad = obj.grad;
  auto xs = coordinates(params);
  auto gs = coordinates(grad);
  ASSERT_GE(xs.size(), 100u);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double numeric = testing::central_difference(
        [&] { return proximal_objective(params, anchor, mu, d.x, d.y).value; }, *xs[i]);
    EXPECT_LE(testing::relative_error(*gs[i], numeric), 1e-4) << "coordinate " << i;
  }
}

TEST(Proximal, ZeroMuIsCrossEntropy) {
  std::mt19937_64 gen(5);
  const MlpSpec spec = small_spec();
  Stream rng(3, {1});
  const MlpParams params = init_params(spec, rng);
  const ClientData d = random_data(gen, 9, spec.input_dim, 3);
  const ProximalObjective obj = proximal_objective(params, zeros_like(params), 0.0, d.x, d.y);
  double loss = 0.0;
  const MlpParams g = backward(params, d.x, d.y, nullptr, &loss);
  EXPECT_DOUBLE_EQ(obj.value, loss);
  EXPECT_EQ(obj.grad, g);
}

TEST(Proximal, PenaltyValue) {
  std::mt19937_64 gen(6);
  const MlpSpec spec = small_spec();
  Stream rng(4, {1});
  const MlpParams params = init_params(spec, rng);
  MlpParams anchor = params;
  anchor.head.bias[0] += 2.0;
  const ClientData d = random_data(gen, 9, spec.input_dim, 3);
  const double ce = proximal_objective(params, params, 1.0, d.x, d.y).value;
  EXPECT_NEAR(proximal_objective(params, anchor, 3.0, d.x, d.y).value, ce + 0.5 * 3.0 * 4.0, 1e-12);
}

TEST(LocalTrain, ZeroLearningRateReturnsInit) {
  std::mt19937_64 gen(7);
  const MlpSpec spec = small_spec();
  Stream init(1, {1});
  const MlpParams p0 = init_params(spec, init);
  const ClientData d = random_data(gen, 30, spec.input_dim, 3);
  BaselineConfig cfg;
  cfg.lr = 0.0;
  Stream rng(1, {2});
  EXPECT_EQ(local_train(d, cfg, p0, rng), p0);
}

TEST(LocalTrain, SeparableToyIsFit) {
  ClientData d{DenseTensor::matrix(40, 2), {}};
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  for (std::size_t i = 0; i < 40; ++i) {
    const int y = static_cast<int>(i % 2);
    const double sign = y == 0 ? -1.0 : 1.0;
    d.x(i, 0) = sign * u(gen);
    d.x(i, 1) = u(gen) - 0.6;
    d.y.push_back(y);
  }
  MlpSpec spec;
  spec.input_dim = 2;
  spec.hidden = {};
  spec.num_classes = 2;
  Stream init(2, {1});
  const MlpParams p0 = init_params(spec, init);
  BaselineConfig cfg;
  cfg.lr = 0.5;
  cfg.epochs = 50;
  cfg.batch = 8;
  Stream rng(2, {2});
  const MlpParams p = local_train(d, cfg, p0, rng);
  EXPECT_EQ(predict(forward(p, d.x)), d.y);
}

TEST(LocalTrain, DivergenceIsNumericError) {
  std::mt19937_64 gen(9);
  const MlpSpec spec = small_spec();
  Stream init(1, {1});
  const MlpParams p0 = init_params(spec, init);
  const ClientData d = random_data(gen, 30, spec.input_dim, 3);
  BaselineConfig cfg;
  cfg.lr = 1e300;
  Stream rng(1, {2});
  EXPECT_THROW(local_train(d, cfg, p0, rng), NumericError);
}

TEST(SgdTrain, HugeProximalPinsToAnchor) {
  std::mt19937_64 gen(10);
  const MlpSpec spec = small_spec();
  Stream init(1, {1});
  const MlpParams anchor = init_params(spec, init);
  MlpParams start = init_params(spec, init);
  const ClientData d = random_data(gen, 30, spec.input_dim, 3);
  Stream rng(1, {2});
  MlpParams p = sgd_train(start, d, 0.1, 3, 5, rng, &anchor, 1e8);
  auto a = coordinates(const_cast<MlpParams&>(anchor));
  auto b = coordinates(p);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(*b[i], *a[i], 1e-4);
}

std::vector<std::shared_ptr<const ClientData>> federated_data(std::size_t clients) {
  SynthSpec s;
  s.points_per_subclass = 20;
  const Dataset ds = synth_clusters(s);
  const Partition p = partition_concept_drift(ds, clients, 2);
  std::vector<std::shared_ptr<const ClientData>> out;
  for (const auto& idx : p.clients) out.push_back(std::make_shared<ClientData>(take(ds, idx)));
  return out;
}

BaselineConfig fed_config() {
  BaselineConfig cfg;
  cfg.lr = 0.05;
  cfg.epochs = 2;
  cfg.batch = 10;
  cfg.rounds = 3;
  cfg.report_prob = 0.5;
  cfg.seed = 6;
  return cfg;
}

TEST(FedAvg, SingleFullClientEqualsLocalTraining) {
  const auto data = federated_data(1);
  BaselineConfig cfg = fed_config();
  cfg.report_prob = 1.0;
  Stream init(cfg.seed, {1});
  const MlpParams g = init_params(small_spec(20, 5), init);
  const FederatedRound r = fedavg_round(g, data, cfg, 0, WorkerPool(1));
  Stream rng = baseline_stream(cfg.seed, 0, 0);
  EXPECT_EQ(r.next, local_train(*data[0], cfg, g, rng));
  EXPECT_EQ(r.reporter_count, 1u);
}

TEST(FedAvg, ConvexCombinationOfReporters) {
  const auto data = federated_data(4);
  BaselineConfig cfg = fed_config();
  cfg.report_prob = 1.0;
  Stream init(cfg.seed, {1});
  const MlpParams g = init_params(small_spec(20, 5), init);
  const FederatedRound r = fedavg_round(g, data, cfg, 0, WorkerPool(1));
  std::vector<MlpParams> locals;
  for (std::size_t j = 0; j < 4; ++j) {
    Stream rng = baseline_stream(cfg.seed, j, 0);
    locals.push_back(local_train(*data[j], cfg, g, rng));
  }
  MlpParams next = r.next;
  auto w = coordinates(next);
  for (std::size_t i = 0; i < w.size(); ++i) {
    double lo = 1e300;
    double hi = -1e300;
    for (auto& l : locals) {
      const double v = *coordinates(l)[i];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    EXPECT_GE(*w[i], lo - 1e-15);
    EXPECT_LE(*w[i], hi + 1e-15);
  }
}

TEST(FedProx, ZeroMuIsFedAvgBitwise) {
  const auto data = federated_data(5);
  BaselineConfig avg = fed_config();
  BaselineConfig prox = avg;
  prox.scheme = Scheme::kFedProx;
  prox.mu_prox = 0.0;
  const MlpSpec spec = small_spec(20, 5);
  const auto a = run_baseline(avg, data, spec, WorkerPool(1));
  const auto b = run_baseline(prox, data, spec, WorkerPool(1));
  EXPECT_EQ(a.global, b.global);
  prox.mu_prox = 1.0;
  EXPECT_NE(run_baseline(prox, data, spec, WorkerPool(1)).global, a.global);
}

TEST(RunBaseline, ReportsAndDeterminism) {
  const auto data = federated_data(5);
  const BaselineConfig cfg = fed_config();
  const MlpSpec spec = small_spec(20, 5);
  std::size_t calls = 0;
  const auto a = run_baseline(cfg, data, spec, WorkerPool(1),
                              [&](const MlpParams&, RoundReport& r) { r.gm_accuracy = ++calls; });
  EXPECT_EQ(calls, 3u);
  ASSERT_EQ(a.reports.size(), 3u);
  EXPECT_EQ(a.reports[2].gm_accuracy, 3.0);
  const auto b = run_baseline(cfg, data, spec, WorkerPool(3));
  EXPECT_EQ(a.global, b.global);
}

TEST(RunBaseline, LocalTrainsEveryClient) {
  const auto data = federated_data(4);
  BaselineConfig cfg = fed_config();
  cfg.scheme = Scheme::kLocal;
  const auto r = run_baseline(cfg, data, small_spec(20, 5), WorkerPool(2));
  ASSERT_EQ(r.locals.size(), 4u);
  for (const auto& l : r.locals) EXPECT_NE(l, r.global);
  EXPECT_TRUE(r.reports.empty());
}

TEST(RunBaseline, NegativeMuRejected) {
  BaselineConfig cfg = fed_config();
  cfg.mu_prox = -1.0;
  EXPECT_THROW(run_baseline(cfg, federated_data(2), small_spec(20, 5), WorkerPool(1)), InputError);
}

}  // namespace
}  // namespace fvem
