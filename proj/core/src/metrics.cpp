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

#include "fvem/metrics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "fvem/error.hpp"

namespace fvem {
namespace {

std::optional<double> head_accuracy(const Layer& head, const DenseTensor& features,
                                    std::span<const std::size_t> rows, std::span<const int> labels) {
  if (rows.empty()) return std::nullopt;
  const DenseTensor logits = head_logits(head, gather_rows(features, rows));
  const std::vector<int> pred = predict(logits);
  std::vector<int> truth;
  truth.reserve(rows.size());
  for (std::size_t i : rows) truth.push_back(labels[i]);
  return accuracy(pred, truth);
}

std::size_t class_count(const std::vector<double>& head, std::size_t feature_dim) {
  return head.size() / (feature_dim + 1);
}

// Posterior-averaged softmax prediction of one client.
std::optional<double> mc_head_accuracy(const VariationalPosterior& post, std::size_t classes,
                                       const DenseTensor& features,
                                       std::span<const std::size_t> rows,
                                       std::span<const int> labels, std::size_t samples,
                                       Stream rng) {
  if (rows.empty()) return std::nullopt;
  const DenseTensor x = gather_rows(features, rows);
  DenseTensor prob = DenseTensor::matrix(rows.size(), classes);
  std::vector<double> noise(post.dim());
  for (std::size_t s = 0; s < samples; ++s) {
    rng.fill_normal(noise);
    const Layer head = unflatten(sample(post, noise), classes, features.cols());
    const DenseTensor logits = head_logits(head, x);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
      const auto z = logits.row(r);
      double m = z[0];
      for (double v : z) m = std::max(m, v);
      double norm = 0.0;
      for (double v : z) norm += std::exp(v - m);
      for (std::size_t c = 0; c < classes; ++c) prob(r, c) += std::exp(z[c] - m) / norm;
    }
  }
  std::vector<int> truth;
  for (std::size_t i : rows) truth.push_back(labels[i]);
  return accuracy(predict(prob), truth);
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

Snapshot stats_snapshot(const std::vector<ClientState>& clients, std::span<const double> w) {
  Snapshot s;
  double total = 0.0;
  for (const ClientState& c : clients) total += c.tau;
  for (const ClientState& c : clients) {
    s.confidence_ratios.push_back(total > 0.0 ? c.tau / total : 0.0);
    if (c.posterior.dim() != w.size()) throw DimensionError("stats_snapshot: head dimension");
    double dev = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double diff = c.posterior.mu[i] - w[i];
      dev += diff * diff;
    }
    s.model_deviations.push_back(w.empty() ? 0.0 : dev / static_cast<double>(w.size()));
  }
  return s;
}

std::optional<double> accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw InputError("accuracy: size mismatch");
  if (labels.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

Evaluator Evaluator::build(const Dataset& test, const Partition& partition) {
  Evaluator e;
  e.test = &test;
  for (std::size_t j = 0; j < partition.num_clients(); ++j) {
    e.client_test.push_back(client_test_indices(test, partition, j));
  }
  return e;
}

std::optional<double> evaluate_pm(const ClientState& client, const BaseLayers& theta,
                                  const Dataset& test, std::span<const std::size_t> test_indices) {
  if (test_indices.empty()) return std::nullopt;
  const DenseTensor features = base_features(theta, gather_rows(test.images, test_indices));
  const Layer head = unflatten(client.posterior.mu, class_count(client.posterior.mu, features.cols()),
                               features.cols());
  std::vector<int> truth;
  for (std::size_t i : test_indices) truth.push_back(test.labels[i]);
  return accuracy(predict(head_logits(head, features)), truth);
}

double evaluate_gm(const GlobalState& global, const Dataset& test) {
  const DenseTensor features = base_features(global.theta, test.images);
  const Layer head = unflatten(global.w, class_count(global.w, features.cols()), features.cols());
  return accuracy(predict(head_logits(head, features)), test.labels).value_or(0.0);
}

void evaluate_round(const GlobalState& global, const std::vector<ClientState>& clients,
                    const Evaluator& eval, RoundReport& report) {
  if (eval.test == nullptr) throw InputError("evaluate_round: no test set");
  const Dataset& test = *eval.test;
  const DenseTensor features = base_features(global.theta, test.images);
  const std::size_t classes = class_count(global.w, features.cols());
  std::vector<std::size_t> all(test.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  report.gm_accuracy =
      head_accuracy(unflatten(global.w, classes, features.cols()), features, all, test.labels);

  report.pm_accuracies.clear();
  for (const ClientState& c : clients) {
    const auto& rows = eval.client_test.at(c.id);
    std::optional<double> acc;
    if (eval.pm_mc_samples == 0) {
      acc = head_accuracy(unflatten(c.posterior.mu, classes, features.cols()), features, rows,
                          test.labels);
    } else {
      Stream rng(eval.seed, {static_cast<std::uint64_t>(StreamTag::kEval), report.round, c.id});
      acc = mc_head_accuracy(c.posterior, classes, features, rows, test.labels,
                             eval.pm_mc_samples, rng);
    }
    report.pm_accuracies.push_back({c.id, c.n(), acc});
  }
}

std::vector<ClientAccuracy> per_client_accuracy(std::span<const int> predictions,
                                                const Evaluator& eval,
                                                std::span<const std::size_t> sizes) {
  const Dataset& test = *eval.test;
  std::vector<ClientAccuracy> out;
  for (std::size_t j = 0; j < eval.client_test.size(); ++j) {
    std::vector<int> pred, truth;
    for (std::size_t i : eval.client_test[j]) {
      pred.push_back(predictions[i]);
      truth.push_back(test.labels[i]);
    }
    out.push_back({j, sizes[j], accuracy(pred, truth)});
  }
  return out;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw InputError("mean: no values");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

std::optional<double> sem(std::span<const double> values) {
  if (values.size() < 2) return std::nullopt;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  const auto n = static_cast<double>(values.size());
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

Summary summarize(std::span<const SeedReports> runs) {
  Summary s;
  s.seeds = runs.size();
  for (const SeedReports& r : runs) {
    if (r.rounds.empty()) continue;
    const RoundReport& last = r.rounds.back();
    if (auto pm = last.mean_pm()) s.pm_final.push_back(*pm);
    if (last.gm_accuracy) s.gm_final.push_back(*last.gm_accuracy);
  }
  if (!s.pm_final.empty()) {
    s.pm_mean = mean(s.pm_final);
    s.pm_sem = sem(s.pm_final);
  }
  if (!s.gm_final.empty()) {
    s.gm_mean = mean(s.gm_final);
    s.gm_sem = sem(s.gm_final);
  }
  return s;
}

nlohmann::json to_json(const RoundReport& r) {
  nlohmann::json pm = nlohmann::json::array();
  for (const auto& c : r.pm_accuracies) {
    pm.push_back({{"client_id", c.client_id}, {"n_j", c.n_j}, {"accuracy", optional_json(c.accuracy)}});
  }
  return {{"round", r.round},
          {"gm_accuracy", optional_json(r.gm_accuracy)},
          {"pm_accuracies", pm},
          {"confidence_ratios", r.confidence_ratios},
          {"model_deviations", r.model_deviations},
          {"reporter_count", r.reporter_count},
          {"no_reporters", r.no_reporters}};
}

RoundReport round_from_json(const nlohmann::json& j) {
  RoundReport r;
  r.round = j.at("round").get<std::size_t>();
  r.gm_accuracy = optional_from(j.at("gm_accuracy"));
  for (const auto& c : j.at("pm_accuracies")) {
    r.pm_accuracies.push_back({c.at("client_id").get<std::size_t>(), c.at("n_j").get<std::size_t>(),
                               optional_from(c.at("accuracy"))});
  }
  r.confidence_ratios = j.at("confidence_ratios").get<std::vector<double>>();
  r.model_deviations = j.at("model_deviations").get<std::vector<double>>();
  r.reporter_count = j.at("reporter_count").get<std::size_t>();
  r.no_reporters = j.at("no_reporters").get<bool>();
  return r;
}

void write_report(std::ostream& out, const nlohmann::json& header,
                  std::span<const SeedReports> runs) {
  nlohmann::json head = header;
  head["record"] = "header";
  out << head.dump() << '\n';
  for (const SeedReports& run : runs) {
    for (const RoundReport& r : run.rounds) {
      nlohmann::json line = to_json(r);
      line["record"] = "round";
      line["seed"] = run.seed;
      out << line.dump() << '\n';
    }
  }
  const Summary s = summarize(runs);
  nlohmann::json seeds = nlohmann::json::array();
  for (const SeedReports& run : runs) seeds.push_back(run.seed);
  nlohmann::json summary = {{"record", "summary"},
                            {"seeds", seeds},
                            {"pm_final", s.pm_final},
                            {"gm_final", s.gm_final},
                            {"pm_mean", optional_json(s.pm_mean)},
                            {"pm_sem", optional_json(s.pm_sem)},
                            {"gm_mean", optional_json(s.gm_mean)},
                            {"gm_sem", optional_json(s.gm_sem)}};
  out << summary.dump() << '\n';
}

void write_report(const std::filesystem::path& path, const nlohmann::json& header,
                  std::span<const SeedReports> runs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open report file " + path.string());
  write_report(out, header, runs);
  if (!out) throw std::runtime_error("failed writing report file " + path.string());
}

ReportFile read_report(std::istream& in) {
  ReportFile file;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    const std::string kind = j.at("record").get<std::string>();
    j.erase("record");
    if (kind == "header") {
      file.header = std::move(j);
    } else if (kind == "summary") {
      file.summary = std::move(j);
    } else if (kind == "round") {
      const auto seed = j.at("seed").get<std::uint64_t>();
      if (file.runs.empty() || file.runs.back().seed != seed) file.runs.push_back({seed, {}});
      file.runs.back().rounds.push_back(round_from_json(j));
    } else {
      throw FormatError("report: unknown record kind '" + kind + "'");
    }
  }
  return file;
}

ReportFile read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report file " + path.string());
  return read_report(in);
}

void write_client_csv(const std::filesystem::path& path, const RoundReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "client_id,n_j,pm_accuracy\n";
  char buf[64];
  for (const auto& c : report.pm_accuracies) {
    out << c.client_id << ',' << c.n_j << ',';
    if (c.accuracy) {
      std::snprintf(buf, sizeof buf, "%.17g", *c.accuracy);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace fvem
