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

#include "fvem/federation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "fvem/checkpoint.hpp"
#include "fvem/error.hpp"
#include "fvem/metrics.hpp"

namespace fvem {
namespace {

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

double get_f64(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= std::uint64_t{in[offset + b]} << (8 * b);
  return std::bit_cast<double>(bits);
}

std::string where(std::size_t round, std::size_t client) {
  return "round " + std::to_string(round) + ", client " + std::to_string(client);
}

void require_finite(std::span<const double> v, std::size_t round, std::size_t client,
                    const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(where(round, client) + ": non-finite " + what);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_upload(const ClientUpload& upload) {
  std::vector<std::uint8_t> out;
  out.reserve(upload_size(upload.mu.size(), upload.theta.size()));
  for (double v : upload.mu) put_f64(out, v);
  put_f64(out, upload.tau);
  for (double v : upload.theta) put_f64(out, v);
  return out;
}

ClientUpload decode_upload(std::span<const std::uint8_t> bytes, std::size_t head_dim,
                           std::size_t base_dim) {
  if (bytes.size() != upload_size(head_dim, base_dim)) {
    throw FormatError("decode_upload: " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(upload_size(head_dim, base_dim)));
  }
  ClientUpload up;
  up.mu.resize(head_dim);
  up.theta.resize(base_dim);
  std::size_t offset = 0;
  for (double& v : up.mu) v = get_f64(bytes, (offset++) * 8);
  up.tau = get_f64(bytes, (offset++) * 8);
  for (double& v : up.theta) v = get_f64(bytes, (offset++) * 8);
  return up;
}

Stream server_stream(std::uint64_t seed, std::size_t round) {
  return Stream(seed, {static_cast<std::uint64_t>(StreamTag::kServer), round});
}

Stream client_stream(std::uint64_t seed, std::size_t client, std::size_t round) {
  return Stream(seed, {static_cast<std::uint64_t>(StreamTag::kClient), client, round});
}

std::vector<std::size_t> select_reporters(std::size_t clients, double s, Stream& rng) {
  if (!(s >= 0.0 && s <= 1.0)) throw InputError("select_reporters: s must be in [0, 1]");
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < clients; ++j) {
    // One draw per client regardless of s keeps the stream layout fixed.
    if (rng.uniform() < s) out.push_back(j);
  }
  return out;
}

std::vector<double> aggregate_heads(std::span<const std::vector<double>> mus,
                                    std::span<const double> taus) {
  if (mus.empty()) throw InputError("aggregate_heads: no reporters");
  if (mus.size() != taus.size()) throw InputError("aggregate_heads: one tau per mean required");
  const std::size_t d = mus.front().size();
  double total = 0.0;
  for (std::size_t j = 0; j < mus.size(); ++j) {
    if (mus[j].size() != d) throw InputError("aggregate_heads: head dimensions differ");
    if (!(taus[j] > 0.0)) throw InputError("aggregate_heads: tau must be positive");
    total += taus[j];
  }
  std::vector<double> w(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    double lo = mus.front()[i];
    double hi = lo;
    for (std::size_t j = 0; j < mus.size(); ++j) {
      acc += taus[j] * mus[j][i];
      lo = std::min(lo, mus[j][i]);
      hi = std::max(hi, mus[j][i]);
    }
    // Clamp away rounding so the result stays a convex combination.
    w[i] = std::clamp(acc / total, lo, hi);
  }
  return w;
}

BaseLayers aggregate_base(std::span<const BaseLayers> thetas, std::span<const std::size_t> sizes) {
  if (thetas.empty()) throw InputError("aggregate_base: no reporters");
  if (thetas.size() != sizes.size()) throw InputError("aggregate_base: one size per base required");
  double total = 0.0;
  for (std::size_t n : sizes) total += static_cast<double>(n);
  if (total == 0.0) throw InputError("aggregate_base: total data size is zero");
  BaseLayers out = thetas.front();
  for (std::size_t k = 0; k < out.size(); ++k) {
    for (const BaseLayers& t : thetas) {
      if (t.size() != out.size() || t[k].weight.shape() != out[k].weight.shape() ||
          t[k].bias.shape() != out[k].bias.shape()) {
        throw DimensionError("aggregate_base: layer " + std::to_string(k) + " shapes differ");
      }
    }
    auto blend = [&](auto member) {
      auto dst = (out[k].*member).values();
      for (std::size_t i = 0; i < dst.size(); ++i) {
        double acc = 0.0;
        double lo = (thetas.front()[k].*member)[i];
        double hi = lo;
        for (std::size_t j = 0; j < thetas.size(); ++j) {
          const double v = (thetas[j][k].*member)[i];
          acc += static_cast<double>(sizes[j]) * v;
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        dst[i] = std::clamp(acc / total, lo, hi);
      }
    };
    blend(&Layer::weight);
    blend(&Layer::bias);
  }
  return out;
}

ClientState client_update(const ClientState& client, const GlobalState& global,
                          const TrainConfig& cfg, Stream& rng, bool train_base) {
  if (!client.data || client.data->size() == 0) {
    throw InputError(where(global.round, client.id) + ": empty dataset");
  }
  if (cfg.mc_samples == 0) throw InputError("client_update: K must be at least 1");
  const ClientData& data = *client.data;
  const std::size_t d = global.w.size();
  if (client.posterior.dim() != d) {
    throw DimensionError(where(global.round, client.id) + ": posterior dimension " +
                         std::to_string(client.posterior.dim()) + " vs head " + std::to_string(d));
  }
  ClientState out = client;

  if (global.round == 0) {
    out.tau = std::clamp(1.0 / cfg.rho0_sq, cfg.tau_bounds.min, cfg.tau_bounds.max);
  } else {
    out.tau = confidence(out.posterior, global.w, cfg.confidence_mode, cfg.tau_bounds).tau;
  }

  const std::size_t feature_dim =
      global.theta.empty() ? data.x.cols() : global.theta.back().out_dim();
  if (d % (feature_dim + 1) != 0) {
    throw DimensionError(where(global.round, client.id) + ": head length " + std::to_string(d) +
                         " does not fit feature dim " + std::to_string(feature_dim));
  }
  const std::size_t classes = d / (feature_dim + 1);

  // Head: the base is fixed while (mu, pi) are trained, so features are
  // computed once.
  {
    Stream head_rng = rng.derive(1);
    const DenseTensor features = base_features(global.theta, data.x);
    const Likelihood nll = head_likelihood(features, data.y, classes);
    const IsotropicPrior prior{global.w, out.tau};
    for (std::size_t e = 0; e < cfg.local_epochs; ++e) {
      const LocalObjective obj = mc_local_loss(out.posterior, prior, nll, cfg.mc_samples, head_rng);
      if (!std::isfinite(obj.value)) {
        throw NumericError(where(global.round, client.id) + ": non-finite local objective");
      }
      descend(out.posterior, obj, cfg.eta);
    }
    require_finite(out.posterior.mu, global.round, client.id, "posterior mean");
    require_finite(out.posterior.pi, global.round, client.id, "posterior scale");
  }

  out.theta_local = global.theta;
  if (!train_base || global.theta.empty() || cfg.base_epochs == 0) return out;

  Stream base_rng = rng.derive(2);
  const std::size_t batch = std::max<std::size_t>(1, cfg.base_batch);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> noise(d);
  MlpParams params{global.theta, Layer{}};
  for (std::size_t e = 0; e < cfg.base_epochs; ++e) {
    base_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const DenseTensor xb = gather_rows(data.x, idx);
      std::vector<int> yb;
      yb.reserve(idx.size());
      for (std::size_t i : idx) yb.push_back(data.y[i]);
      base_rng.fill_normal(noise);
      params.head = unflatten(sample(out.posterior, noise), classes, feature_dim);
      double loss = 0.0;
      const MlpParams grads = backward(params, xb, yb, nullptr, &loss);
      if (!std::isfinite(loss)) {
        throw NumericError(where(global.round, client.id) + ": non-finite base loss");
      }
      try {
        params = sgd_step(params, grads, cfg.base_lr);
      } catch (const NumericError& e) {
        throw NumericError(where(global.round, client.id) + ": " + e.what());
      }
    }
  }
  out.theta_local = std::move(params.base);
  return out;
}

GlobalState initial_global(const MlpSpec& spec, const TrainConfig& cfg) {
  Stream rng(cfg.seed, {static_cast<std::uint64_t>(StreamTag::kInit)});
  MlpParams params = init_params(spec, rng);
  return GlobalState{flatten(params.head), std::move(params.base), 0};
}

std::vector<ClientState> initial_clients(const GlobalState& global,
                                         std::span<const std::shared_ptr<const ClientData>> data,
                                         const TrainConfig& cfg) {
  if (!(cfg.rho0_sq > 0.0)) throw InputError("initial_clients: rho0_sq must be positive");
  const double sigma = cfg.init_sigma.value_or(std::sqrt(cfg.rho0_sq));
  const std::vector<double> sigmas(global.w.size(), sigma);
  const VariationalPosterior start = VariationalPosterior::from_sigma(global.w, sigmas);
  std::vector<ClientState> clients;
  clients.reserve(data.size());
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (!data[j] || data[j]->size() == 0) {
      throw InputError("initial_clients: client " + std::to_string(j) + " has no data");
    }
    clients.push_back(ClientState{j, data[j], start,
                                  std::clamp(1.0 / cfg.rho0_sq, cfg.tau_bounds.min,
                                             cfg.tau_bounds.max),
                                  global.theta});
  }
  return clients;
}

RoundOutput run_round(const GlobalState& global, std::vector<ClientState>& clients,
                      const MlpSpec& spec, const TrainConfig& cfg, const WorkerPool& pool) {
  if (clients.empty()) throw InputError("run_round: no clients");
  const std::size_t t = global.round;
  Stream server = server_stream(cfg.seed, t);
  const std::vector<std::size_t> reporters = select_reporters(clients.size(), cfg.report_prob, server);
  std::vector<char> reports(clients.size(), 0);
  for (std::size_t j : reporters) reports[j] = 1;

  pool.for_each(clients.size(), [&](std::size_t j) {
    if (cfg.train_reporters_only && !reports[j]) return;
    Stream rng = client_stream(cfg.seed, j, t);
    const bool train_base = reports[j] || cfg.straggler_base_training;
    clients[j] = client_update(clients[j], global, cfg, rng, train_base);
  });

  RoundOutput out{global, {}};
  out.next.round = t + 1;
  out.report.round = t;
  out.report.reporter_count = reporters.size();
  out.report.no_reporters = reporters.empty();

  if (!reporters.empty()) {
    const std::size_t head_dim = spec.head_dim();
    const std::size_t base_dim = param_count(global.theta);
    std::vector<std::vector<double>> mus;
    std::vector<double> taus;
    std::vector<BaseLayers> thetas;
    std::vector<std::size_t> sizes;
    for (std::size_t j : reporters) {
      const ClientState& c = clients[j];
      const auto wire = encode_upload({c.posterior.mu, c.tau, flatten(c.theta_local)});
      ClientUpload up = decode_upload(wire, head_dim, base_dim);
      mus.push_back(std::move(up.mu));
      taus.push_back(up.tau);
      thetas.push_back(unflatten(up.theta, global.theta));
      sizes.push_back(c.n());
    }
    out.next.w = aggregate_heads(mus, taus);
    out.next.theta = aggregate_base(thetas, sizes);
  }

  const Snapshot stats = stats_snapshot(clients, out.next.w);
  out.report.confidence_ratios = stats.confidence_ratios;
  out.report.model_deviations = stats.model_deviations;
  return out;
}

TrainingResult run_training(const TrainConfig& cfg,
                            std::span<const std::shared_ptr<const ClientData>> data,
                            const MlpSpec& spec, const WorkerPool& pool,
                            const TrainingOptions& options) {
  TrainingResult result;
  result.global = initial_global(spec, cfg);
  result.clients = initial_clients(result.global, data, cfg);
  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);
  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    RoundOutput out = run_round(result.global, result.clients, spec, cfg, pool);
    if (options.observer) options.observer(out.next, result.clients, out.report);
    result.reports.push_back(std::move(out.report));
    result.global = std::move(out.next);
    if (options.checkpoint_dir) {
      write_checkpoint(*options.checkpoint_dir / checkpoint_name(result.global.round),
                       result.global, result.clients);
    }
  }
  return result;
}

}  // namespace fvem
