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

#include "fvem/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <stdexcept>

#include "fvem/error.hpp"

namespace fvem {
namespace {

using Path = std::filesystem::path;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw std::invalid_argument("expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_size(const std::string& v) { return static_cast<std::size_t>(to_u64(v)); }

double to_double(const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw std::invalid_argument("expected a finite number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

template <class T>
std::vector<T> to_list(const std::string& v, T (*one)(const std::string&)) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const std::string item = trim(v.substr(start, comma == std::string::npos ? comma : comma - start));
    if (item.empty()) {
      if (!trim(v).empty()) throw std::invalid_argument("empty list item in '" + v + "'");
    } else {
      out.push_back(one(item));
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (const auto& x : v) out += (out.empty() ? "" : ",") + std::to_string(x);
  return out;
}

Path resolve(const std::string& v, const Path& base) {
  Path p(v);
  return p.is_relative() && !base.empty() ? base / p : p;
}

template <class E>
struct Names {
  E value;
  const char* name;
};

constexpr Names<DatasetKind> kDatasets[] = {{DatasetKind::kSynth, "synth"},
                                            {DatasetKind::kFmnist, "fmnist"}};
constexpr Names<RunScheme> kSchemes[] = {{RunScheme::kPfedvem, "pfedvem"},
                                         {RunScheme::kLocal, "local"},
                                         {RunScheme::kFedAvg, "fedavg"},
                                         {RunScheme::kFedProx, "fedprox"}};
constexpr Names<Scenario> kScenarios[] = {{Scenario::kLabelSkew, "label_skew"},
                                          {Scenario::kConceptDrift, "concept_drift"},
                                          {Scenario::kQuantityOnly, "quantity_only"},
                                          {Scenario::kIidEqual, "iid_equal"}};
constexpr Names<ConfidenceMode> kModes[] = {{ConfidenceMode::kFull, "full"},
                                            {ConfidenceMode::kUncertaintyOnly, "uncertainty_only"},
                                            {ConfidenceMode::kDeviationOnly, "deviation_only"}};

template <class E, std::size_t N>
E to_enum(const std::string& v, const Names<E> (&names)[N]) {
  for (const auto& n : names) {
    if (v == n.name) return n.value;
  }
  std::string options;
  for (const auto& n : names) options += (options.empty() ? "" : ", ") + std::string(n.name);
  throw std::invalid_argument("expected one of " + options + ", got '" + v + "'");
}

template <class E, std::size_t N>
std::string enum_name(E v, const Names<E> (&names)[N]) {
  for (const auto& n : names) {
    if (v == n.value) return n.name;
  }
  return "?";
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&, const Path&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define FVEM_SIZE(KEY, MEMBER)                                                              \
  Field {                                                                                   \
    KEY, [](ExperimentConfig& c, const std::string& v, const Path&) { c.MEMBER = to_size(v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }                  \
  }
#define FVEM_REAL(KEY, MEMBER)                                                                \
  Field {                                                                                     \
    KEY, [](ExperimentConfig& c, const std::string& v, const Path&) { c.MEMBER = to_double(v); }, \
        [](const ExperimentConfig& c) { return fmt_double(c.MEMBER); }                        \
  }
#define FVEM_BOOL(KEY, MEMBER)                                                              \
  Field {                                                                                   \
    KEY, [](ExperimentConfig& c, const std::string& v, const Path&) { c.MEMBER = to_bool(v); }, \
        [](const ExperimentConfig& c) { return std::string(c.MEMBER ? "true" : "false"); }  \
  }
#define FVEM_PATH(KEY, MEMBER)                                                         \
  Field {                                                                              \
    KEY,                                                                               \
        [](ExperimentConfig& c, const std::string& v, const Path& b) {                 \
          c.MEMBER = resolve(v, b);                                                    \
        },                                                                             \
        [](const ExperimentConfig& c) { return c.MEMBER.generic_string(); }            \
  }
#define FVEM_ENUM(KEY, MEMBER, TABLE)                                                           \
  Field {                                                                                       \
    KEY,                                                                                        \
        [](ExperimentConfig& c, const std::string& v, const Path&) { c.MEMBER = to_enum(v, TABLE); }, \
        [](const ExperimentConfig& c) { return enum_name(c.MEMBER, TABLE); }                    \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      FVEM_ENUM("dataset.kind", dataset, kDatasets),
      FVEM_PATH("dataset.train_images", idx.train_images),
      FVEM_PATH("dataset.train_labels", idx.train_labels),
      FVEM_PATH("dataset.test_images", idx.test_images),
      FVEM_PATH("dataset.test_labels", idx.test_labels),
      FVEM_SIZE("synth.superclasses", synth.superclasses),
      FVEM_SIZE("synth.subclasses_per_class", synth.subclasses_per_class),
      FVEM_SIZE("synth.dim", synth.dim),
      FVEM_REAL("synth.slot_spacing", synth.slot_spacing),
      FVEM_SIZE("synth.points_per_subclass", synth.points_per_subclass),
      FVEM_SIZE("synth.test_points_per_subclass", synth.test_points_per_subclass),
      FVEM_REAL("synth.separation", synth.separation),
      FVEM_REAL("synth.noise", synth.noise),
      FVEM_SIZE("synth.seed", synth.seed),
      FVEM_ENUM("partition.scenario", partition.scenario, kScenarios),
      FVEM_SIZE("partition.clients", partition.clients),
      FVEM_SIZE("partition.labels_per_client", partition.labels_per_client),
      Field{"model.hidden",
            [](ExperimentConfig& c, const std::string& v, const Path&) {
              c.hidden = to_list<std::size_t>(v, &to_size);
            },
            [](const ExperimentConfig& c) { return join(c.hidden); }},
      FVEM_ENUM("experiment.scheme", scheme, kSchemes),
      Field{"experiment.seeds",
            [](ExperimentConfig& c, const std::string& v, const Path&) {
              c.seeds = to_list<std::uint64_t>(v, &to_u64);
            },
            [](const ExperimentConfig& c) { return join(c.seeds); }},
      FVEM_PATH("experiment.out", out),
      Field{"experiment.client_csv",
            [](ExperimentConfig& c, const std::string& v, const Path& b) {
              c.client_csv = v.empty() ? std::nullopt : std::optional<Path>(resolve(v, b));
            },
            [](const ExperimentConfig& c) {
              return c.client_csv ? c.client_csv->generic_string() : std::string();
            }},
      Field{"experiment.checkpoint_dir",
            [](ExperimentConfig& c, const std::string& v, const Path& b) {
              c.checkpoint_dir = v.empty() ? std::nullopt : std::optional<Path>(resolve(v, b));
            },
            [](const ExperimentConfig& c) {
              return c.checkpoint_dir ? c.checkpoint_dir->generic_string() : std::string();
            }},
      FVEM_SIZE("train.rounds", train.rounds),
      FVEM_SIZE("train.local_epochs", train.local_epochs),
      FVEM_SIZE("train.mc_samples", train.mc_samples),
      FVEM_REAL("train.eta", train.eta),
      FVEM_REAL("train.base_lr", train.base_lr),
      FVEM_SIZE("train.base_epochs", train.base_epochs),
      FVEM_SIZE("train.base_batch", train.base_batch),
      FVEM_REAL("train.report_prob", train.report_prob),
      FVEM_REAL("train.rho0_sq", train.rho0_sq),
      Field{"train.init_sigma",
            [](ExperimentConfig& c, const std::string& v, const Path&) {
              c.train.init_sigma = v.empty() ? std::nullopt : std::optional<double>(to_double(v));
            },
            [](const ExperimentConfig& c) {
              return c.train.init_sigma ? fmt_double(*c.train.init_sigma) : std::string();
            }},
      FVEM_ENUM("train.confidence_mode", train.confidence_mode, kModes),
      FVEM_REAL("train.tau_min", train.tau_bounds.min),
      FVEM_REAL("train.tau_max", train.tau_bounds.max),
      FVEM_BOOL("train.train_reporters_only", train.train_reporters_only),
      FVEM_BOOL("train.straggler_base_training", train.straggler_base_training),
      FVEM_REAL("baseline.lr", baseline.lr),
      FVEM_SIZE("baseline.epochs", baseline.epochs),
      FVEM_SIZE("baseline.batch", baseline.batch),
      FVEM_REAL("baseline.mu_prox", baseline.mu_prox),
      FVEM_SIZE("eval.pm_mc_samples", pm_mc_samples),
  };
  return table;
}

#undef FVEM_SIZE
#undef FVEM_REAL
#undef FVEM_BOOL
#undef FVEM_PATH
#undef FVEM_ENUM

const Field* find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

}  // namespace

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                      const Path& base_dir) {
  const Field* f = find_field(key);
  if (f == nullptr) throw ConfigError({"unknown key '" + key + "'"});
  try {
    f->set(cfg, value, base_dir);
  } catch (const std::invalid_argument& e) {
    throw ConfigError({key + ": " + e.what()});
  }
}

ExperimentConfig parse_config(std::istream& in, const Path& base_dir) {
  ExperimentConfig cfg;
  std::vector<std::string> errors;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(line_no) + ": expected key=value");
      continue;
    }
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), base_dir);
    } catch (const ConfigError& e) {
      errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

ExperimentConfig load_config(const Path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file " + path.string()});
  return parse_config(in, path.parent_path());
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

std::string scheme_name(RunScheme scheme) { return enum_name(scheme, kSchemes); }

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> v;
  auto bad = [&v](const std::string& field, const std::string& key, const std::string& why) {
    v.push_back(field + " (" + key + "): " + why);
  };
  const TrainConfig& t = c.train;
  if (!(t.report_prob > 0.0 && t.report_prob <= 1.0)) {
    bad("TrainConfig.s", "train.report_prob", "must be in (0, 1], got " + fmt_double(t.report_prob));
  }
  if (t.mc_samples < 1) bad("TrainConfig.K", "train.mc_samples", "must be at least 1");
  if (t.local_epochs < 1) bad("TrainConfig.R", "train.local_epochs", "must be at least 1");
  if (!(t.rho0_sq > 0.0)) bad("TrainConfig.rho0_sq", "train.rho0_sq", "must be positive");
  if (t.eta < 0.0) bad("TrainConfig.eta", "train.eta", "must be nonnegative");
  if (t.base_lr < 0.0) bad("TrainConfig.base_lr", "train.base_lr", "must be nonnegative");
  if (t.base_batch < 1) bad("TrainConfig.base_batch", "train.base_batch", "must be at least 1");
  if (t.init_sigma && !(*t.init_sigma > 0.0)) {
    bad("TrainConfig.init_sigma", "train.init_sigma", "must be positive");
  }
  if (!(t.tau_bounds.min > 0.0 && t.tau_bounds.min <= t.tau_bounds.max)) {
    bad("TrainConfig.tau_bounds", "train.tau_min", "need 0 < tau_min <= tau_max");
  }

  const BaselineConfig& b = c.baseline;
  if (b.lr < 0.0) bad("BaselineConfig.lr", "baseline.lr", "must be nonnegative");
  if (b.batch < 1) bad("BaselineConfig.B", "baseline.batch", "must be at least 1");
  if (b.epochs < 1) bad("BaselineConfig.R", "baseline.epochs", "must be at least 1");
  if (b.mu_prox < 0.0) bad("BaselineConfig.mu_prox", "baseline.mu_prox", "must be nonnegative");

  std::size_t classes = 10;
  if (c.dataset == DatasetKind::kSynth) {
    const SynthSpec& s = c.synth;
    classes = s.superclasses;
    if (s.superclasses < 1) bad("SynthSpec.superclasses", "synth.superclasses", "must be at least 1");
    if (s.subclasses_per_class < 1) {
      bad("SynthSpec.subclasses_per_class", "synth.subclasses_per_class", "must be at least 1");
    }
    if (s.dim < 1) bad("SynthSpec.dim", "synth.dim", "must be at least 1");
    if (s.dim < s.superclasses + s.subclasses_per_class) {
      bad("SynthSpec.dim", "synth.dim", "must be at least synth.superclasses + synth.subclasses_per_class");
    }
    if (!(s.slot_spacing > 0.0)) bad("SynthSpec.slot_spacing", "synth.slot_spacing", "must be > 0");
    if (s.points_per_subclass < 1) {
      bad("SynthSpec.points_per_subclass", "synth.points_per_subclass", "must be at least 1");
    }
    if (s.test_points_per_subclass < 1) {
      bad("SynthSpec.test_points_per_subclass", "synth.test_points_per_subclass",
          "must be at least 1");
    }
    if (!(s.separation > 0.0)) bad("SynthSpec.separation", "synth.separation", "must be positive");
    if (s.noise < 0.0) bad("SynthSpec.noise", "synth.noise", "must be nonnegative");
  } else {
    auto need = [&](const Path& p, const char* field, const char* key) {
      if (p.empty()) {
        bad(field, key, "not set");
      } else if (!std::filesystem::is_regular_file(p)) {
        bad(field, key, "no such file " + p.string());
      }
    };
    need(c.idx.train_images, "ExperimentConfig.dataset.train_images", "dataset.train_images");
    need(c.idx.train_labels, "ExperimentConfig.dataset.train_labels", "dataset.train_labels");
    need(c.idx.test_images, "ExperimentConfig.dataset.test_images", "dataset.test_images");
    need(c.idx.test_labels, "ExperimentConfig.dataset.test_labels", "dataset.test_labels");
  }

  const PartitionSpec& p = c.partition;
  if (p.clients < 1) bad("PartitionSpec.J", "partition.clients", "must be at least 1");
  if (p.scenario == Scenario::kLabelSkew) {
    const std::size_t k = p.labels_per_client;
    if (k < 1 || k > classes) {
      bad("PartitionSpec.k", "partition.labels_per_client",
          "must be in [1, " + std::to_string(classes) + "]");
    } else if (p.clients * k < classes) {
      bad("PartitionSpec.k", "partition.labels_per_client",
          "clients * k must reach the label count so every label is held");
    }
  }
  if (p.scenario == Scenario::kConceptDrift && c.dataset != DatasetKind::kSynth) {
    bad("PartitionSpec.scenario", "partition.scenario", "concept_drift needs subclass labels (synth)");
  }

  for (std::size_t h : c.hidden) {
    if (h < 1) bad("MlpSpec.hidden", "model.hidden", "widths must be positive");
  }
  if (c.seeds.empty()) bad("ExperimentConfig.seeds", "experiment.seeds", "must list at least one seed");
  if (c.out.empty()) bad("ExperimentConfig.out", "experiment.out", "must be set");
  return v;
}

}  // namespace fvem
