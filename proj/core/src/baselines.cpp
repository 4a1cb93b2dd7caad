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

#include <cmath>
#include <string>

#include "fvem/error.hpp"
#include "fvem/federation.hpp"

namespace fvem {
namespace {

template <class Fn>
void for_each_tensor(MlpParams& a, const MlpParams& b, const MlpParams& c, Fn fn) {
  for (std::size_t k = 0; k < a.base.size(); ++k) {
    fn(a.base[k].weight, b.base[k].weight, c.base[k].weight);
    fn(a.base[k].bias, b.base[k].bias, c.base[k].bias);
  }
  fn(a.head.weight, b.head.weight, c.head.weight);
  fn(a.head.bias, b.head.bias, c.head.bias);
}

BaseLayers as_layers(const MlpParams& p) {
  BaseLayers all = p.base;
  all.push_back(p.head);
  return all;
}

MlpParams from_layers(BaseLayers all) {
  MlpParams p;
  p.head = std::move(all.back());
  all.pop_back();
  p.base = std::move(all);
  return p;
}

}  // namespace

ProximalObjective proximal_objective(const MlpParams& params, const MlpParams& anchor,
                                     double mu_prox, const DenseTensor& batch,
                                     std::span<const int> labels) {
  MlpParams extra = zeros_like(params);
  double penalty = 0.0;
  for_each_tensor(extra, params, anchor, [&](DenseTensor& e, const DenseTensor& p,
                                             const DenseTensor& a) {
    if (p.shape() != a.shape()) throw DimensionError("proximal_objective: anchor shape");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double diff = p[i] - a[i];
      e[i] = mu_prox * diff;
      penalty += diff * diff;
    }
  });
  ProximalObjective out;
  double loss = 0.0;
  out.grad = backward(params, batch, labels, &extra, &loss);
  out.value = loss + 0.5 * mu_prox * penalty;
  return out;
}

MlpParams sgd_train(MlpParams params, const ClientData& data, double lr, std::size_t epochs,
                    std::size_t batch, Stream& rng, const MlpParams* anchor, double mu_prox) {
  if (data.size() == 0) throw InputError("sgd_train: empty dataset");
  if (mu_prox < 0.0) throw InputError("sgd_train: mu_prox must be nonnegative");
  const bool prox = anchor != nullptr && mu_prox > 0.0;
  const double shrink = 1.0 / (1.0 + lr * mu_prox);
  batch = std::max<std::size_t>(1, batch);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t e = 0; e < epochs; ++e) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const DenseTensor xb = gather_rows(data.x, idx);
      std::vector<int> yb;
      yb.reserve(idx.size());
      for (std::size_t i : idx) yb.push_back(data.y[i]);
      double loss = 0.0;
      const MlpParams grads = backward(params, xb, yb, nullptr, &loss);
      if (!std::isfinite(loss)) throw NumericError("sgd_train: non-finite loss");
      params = sgd_step(params, grads, lr);
      if (prox) {
        // Backward-Euler step on the penalty: theta <- (theta + lr*mu*anchor) / (1 + lr*mu).
        for_each_tensor(params, *anchor, *anchor,
                        [&](DenseTensor& p, const DenseTensor& a, const DenseTensor&) {
                          for (std::size_t i = 0; i < p.size(); ++i) {
                            p[i] = (p[i] + lr * mu_prox * a[i]) * shrink;
                          }
                        });
      }
    }
  }
  return params;
}

MlpParams local_train(const ClientData& data, const BaselineConfig& cfg, const MlpParams& init,
                      Stream& rng) {
  return sgd_train(init, data, cfg.lr, cfg.epochs, cfg.batch, rng);
}

Stream baseline_stream(std::uint64_t seed, std::size_t client, std::size_t round) {
  return Stream(seed, {static_cast<std::uint64_t>(StreamTag::kBaseline), client, round});
}

FederatedRound fedavg_round(const MlpParams& global,
                            std::span<const std::shared_ptr<const ClientData>> data,
                            const BaselineConfig& cfg, std::size_t round, const WorkerPool& pool) {
  Stream server = server_stream(cfg.seed, round);
  const std::vector<std::size_t> reporters = select_reporters(data.size(), cfg.report_prob, server);
  FederatedRound out{global, reporters.size()};
  if (reporters.empty()) return out;

  const double mu = cfg.scheme == Scheme::kFedProx ? cfg.mu_prox : 0.0;
  std::vector<BaseLayers> trained(reporters.size());
  std::vector<std::size_t> sizes(reporters.size());
  pool.for_each(reporters.size(), [&](std::size_t r) {
    const std::size_t j = reporters[r];
    Stream rng = baseline_stream(cfg.seed, j, round);
    try {
      trained[r] = as_layers(
          sgd_train(global, *data[j], cfg.lr, cfg.epochs, cfg.batch, rng, &global, mu));
    } catch (const NumericError& e) {
      throw NumericError("round " + std::to_string(round) + ", client " + std::to_string(j) +
                         ": " + e.what());
    }
    sizes[r] = data[j]->size();
  });
  out.next = from_layers(aggregate_base(trained, sizes));
  return out;
}

BaselineResult run_baseline(const BaselineConfig& cfg,
                            std::span<const std::shared_ptr<const ClientData>> data,
                            const MlpSpec& spec, const WorkerPool& pool,
                            const BaselineObserver& observer) {
  if (cfg.mu_prox < 0.0) throw InputError("run_baseline: mu_prox must be nonnegative");
  BaselineResult result;
  Stream init(cfg.seed, {static_cast<std::uint64_t>(StreamTag::kInit)});
  result.global = init_params(spec, init);

  if (cfg.scheme == Scheme::kLocal) {
    result.locals.resize(data.size());
    pool.for_each(data.size(), [&](std::size_t j) {
      Stream rng = baseline_stream(cfg.seed, j, 0);
      try {
        result.locals[j] = local_train(*data[j], cfg, result.global, rng);
      } catch (const NumericError& e) {
        throw NumericError("client " + std::to_string(j) + ": " + e.what());
      }
    });
    return result;
  }

  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    FederatedRound r = fedavg_round(result.global, data, cfg, t, pool);
    RoundReport report;
    report.round = t;
    report.reporter_count = r.reporter_count;
    report.no_reporters = r.reporter_count == 0;
    result.global = std::move(r.next);
    if (observer) observer(result.global, report);
    result.reports.push_back(std::move(report));
  }
  return result;
}

}  // namespace fvem
