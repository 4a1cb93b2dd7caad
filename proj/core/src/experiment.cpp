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

#include "fvem/experiment.hpp"

#include <memory>
#include <string>

#include "fvem/baselines.hpp"
#include "fvem/error.hpp"
#include "fvem/federation.hpp"
#include "fvem/partition.hpp"

namespace fvem {
namespace {

using DataSlices = std::vector<std::shared_ptr<const ClientData>>;

DataSlices slice(const Dataset& train, const Partition& p) {
  DataSlices out;
  out.reserve(p.num_clients());
  for (const auto& idx : p.clients) out.push_back(std::make_shared<const ClientData>(take(train, idx)));
  return out;
}

void fill_global_report(const MlpParams& model, const Evaluator& eval,
                        const std::vector<std::size_t>& sizes, RoundReport& report) {
  const std::vector<int> pred = predict(forward(model, eval.test->images));
  report.gm_accuracy = accuracy(pred, eval.test->labels);
  report.pm_accuracies = per_client_accuracy(pred, eval, sizes);
}

std::optional<double> model_accuracy(const MlpParams& model, const Dataset& test,
                                     const std::vector<std::size_t>& rows) {
  if (rows.empty()) return std::nullopt;
  std::vector<int> truth;
  for (std::size_t i : rows) truth.push_back(test.labels[i]);
  return accuracy(predict(forward(model, gather_rows(test.images, rows))), truth);
}

}  // namespace

ExperimentData load_data(const ExperimentConfig& cfg) {
  ExperimentData d;
  if (cfg.dataset == DatasetKind::kSynth) {
    d.train = synth_clusters(cfg.synth, SynthSplit::kTrain);
    d.test = synth_clusters(cfg.synth, SynthSplit::kTest);
  } else {
    d.train = load_idx(cfg.idx.train_images, cfg.idx.train_labels);
    d.test = load_idx(cfg.idx.test_images, cfg.idx.test_labels);
  }
  if (d.train.input_dim() != d.test.input_dim()) {
    throw InputError("train and test inputs differ in width");
  }
  return d;
}

MlpSpec model_spec(const ExperimentConfig& cfg, const Dataset& train) {
  return MlpSpec{train.input_dim(), cfg.hidden, train.num_classes};
}

SeedReports run_seed(const ExperimentConfig& cfg, const ExperimentData& data, std::uint64_t seed,
                     const WorkerPool& pool) {
  PartitionSpec pspec = cfg.partition;
  pspec.seed = seed;
  const Partition partition = make_partition(data.train, pspec);
  const DataSlices slices = slice(data.train, partition);
  const std::vector<std::size_t> sizes = partition.sizes();
  Evaluator eval = Evaluator::build(data.test, partition);
  eval.pm_mc_samples = cfg.pm_mc_samples;
  eval.seed = seed;
  const MlpSpec spec = model_spec(cfg, data.train);

  SeedReports out{seed, {}};
  if (cfg.scheme == RunScheme::kPfedvem) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    TrainingOptions options;
    options.observer = [&](const GlobalState& g, const std::vector<ClientState>& clients,
                           RoundReport& r) { evaluate_round(g, clients, eval, r); };
    if (cfg.checkpoint_dir) options.checkpoint_dir = *cfg.checkpoint_dir / ("seed_" + std::to_string(seed));
    out.rounds = run_training(tc, slices, spec, pool, options).reports;
    return out;
  }

  BaselineConfig bc = cfg.baseline;
  bc.seed = seed;
  bc.rounds = cfg.train.rounds;
  bc.report_prob = cfg.train.report_prob;
  bc.scheme = cfg.scheme == RunScheme::kLocal    ? Scheme::kLocal
              : cfg.scheme == RunScheme::kFedAvg ? Scheme::kFedAvg
                                                 : Scheme::kFedProx;
  if (bc.scheme == Scheme::kLocal) {
    const BaselineResult res = run_baseline(bc, slices, spec, pool);
    RoundReport r;
    r.pm_accuracies.resize(res.locals.size());
    pool.for_each(res.locals.size(), [&](std::size_t j) {
      r.pm_accuracies[j] = {j, sizes[j], model_accuracy(res.locals[j], data.test, eval.client_test[j])};
    });
    out.rounds.push_back(std::move(r));
    return out;
  }
  out.rounds = run_baseline(bc, slices, spec, pool, [&](const MlpParams& g, RoundReport& r) {
                 fill_global_report(g, eval, sizes, r);
               }).reports;
  return out;
}

std::vector<SeedReports> run_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                                        const WorkerPool& pool, const SeedCallback& on_seed) {
  std::vector<SeedReports> runs;
  for (std::uint64_t seed : cfg.seeds) {
    runs.push_back(run_seed(cfg, data, seed, pool));
    if (on_seed) on_seed(runs.back());
  }
  return runs;
}

nlohmann::json report_header(const ExperimentConfig& cfg) {
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [k, v] : config_entries(cfg)) config[k] = v;
  return {{"format", "fvem-report"}, {"version", 1}, {"scheme", scheme_name(cfg.scheme)},
          {"config", config}};
}

void write_outputs(const ExperimentConfig& cfg, const std::vector<SeedReports>& runs) {
  if (cfg.out.has_parent_path()) std::filesystem::create_directories(cfg.out.parent_path());
  write_report(cfg.out, report_header(cfg), runs);
  if (!cfg.client_csv) return;
  for (const SeedReports& run : runs) {
    if (run.rounds.empty()) continue;
    std::filesystem::path p = *cfg.client_csv;
    p.replace_filename(p.stem().string() + "_seed" + std::to_string(run.seed) + p.extension().string());
    write_client_csv(p, run.rounds.back());
  }
}

}  // namespace fvem
