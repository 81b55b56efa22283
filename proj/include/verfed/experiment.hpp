// Copyright 2026 The VerFedSV Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "verfed/async.hpp"
#include "verfed/shapley.hpp"
#include "verfed/trace_io.hpp"

namespace verfed {

// Extra client appended after partitioning: either a (possibly noised) copy
// of an existing client or a freshly generated random-feature client.
struct SyntheticClientSpec {
  enum class Kind { kClone, kRandom };
  Kind kind = Kind::kClone;
  int base_client = 0;    // clone source
  double fraction = 0.0;  // clone: share of columns that receive noise
  double noise_std = 1.0; // clone: noise standard deviation
  double mean = 0.0;      // random: feature mean
  double stddev = 1.0;    // random: feature standard deviation
  double period = 0.0;    // async period override; 0 = config default
  std::string kind_label; // report kind; derived when empty
};

// One declarative manifest drives every command; CLI flags override fields.
struct ExperimentConfig {
  // dataset
  std::string dataset = "synthetic";  // LIBSVM path or the builtin generator
  std::optional<int> expected_dim;
  int synth_samples = 1200;
  int synth_dim = 123;
  int synth_classes = 2;
  double synth_label_flip = 0.02;
  int subsample = 0;  // 0 = keep all rows
  double test_fraction = 0.2;
  bool normalize = true;
  std::vector<int> splits;  // empty = near-equal blocks over default_clients
  int default_clients = 3;
  std::optional<uint64_t> column_shuffle_seed;

  std::string mode = "sync";  // sync | async
  uint64_t seed = 42;

  // synchronous trainer
  int rounds = 200;
  int batch_size = 64;  // 0 = full batch
  double learning_rate = 1.0;
  std::string lr_schedule = "constant";  // constant | one_over_t
  double l2 = 0.0;
  int full_eval_every = 10;

  // asynchronous trainer
  double total_time = 2.0;
  double valuation_interval = 0.01;
  double client_period = 0.01;
  int client_tau = 64;
  double async_learning_rate = 1.0;
  double participation_prob = 1.0;

  // valuation
  std::string valuation = "exact";  // exact | mc
  int64_t mc_permutations = 2000;
  bool antithetic = false;
  int completion_rank = 0;  // 0 = auto
  double completion_lambda = 1e-2;
  int completion_iters = 200;
  double completion_tol = 1e-9;

  double clone_noise_std = 1.0;  // preset clones
  std::vector<SyntheticClientSpec> extra_clients;

  std::string output = "out";
};

ExperimentConfig load_config_file(const std::filesystem::path& path);
// Sets one config field by its manifest key; throws ConfigError on unknown
// keys or unparsable values.
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);
void validate(const ExperimentConfig& cfg);

// Valuation report row (one per client).
struct ReportRow {
  int client_id = 0;
  std::string kind;
  double value = 0.0;
  double share_pct = 0.0;
  std::string method;
  int64_t K = 0;
  uint64_t seed = 0;
  double error_bound = 0.0;
};

std::string report_rows_csv(const std::vector<ReportRow>& rows);
std::vector<ReportRow> parse_report_rows(const std::filesystem::path& file);

// Dataset assembled per config: partitioned, extended with synthetic
// clients, normalized, and row-split into train/test.
struct PreparedData {
  VerticalDataset train;
  VerticalDataset test;
  std::vector<ClientInfo> clients;
};
PreparedData prepare_data(const ExperimentConfig& cfg);

struct TrainOutcome {
  std::filesystem::path dir;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double final_loss = 0.0;
};

// train: run the configured trainer and write the checkpoint directory
// (meta/labels/clients/trace/norms/loss CSVs, plus events.csv in async mode)
// and summary_train.txt.
TrainOutcome cmd_train(const ExperimentConfig& cfg);

struct ValueOutcome {
  std::filesystem::path csv;
  ValuationResult valuation;
  std::vector<ReportRow> rows;
  std::optional<ErrorBudget> budget;  // synchronous (completion) runs only
};

// value: load a checkpoint, run completion when synchronous, compute
// VerFedSV per the config, and write valuation.csv + summary_value.txt
// into the checkpoint directory.
ValueOutcome cmd_value(const std::filesystem::path& trace_dir,
                       const ExperimentConfig& cfg);

enum class Preset {
  kHeterogeneity,
  kRandomFeatureSync,
  kFrequency,
  kRandomFeatureAsync,
  kRankReport,
};
Preset parse_preset(const std::string& name);
std::string preset_name(Preset preset);

struct ExperimentOutcome {
  std::filesystem::path dir;
  std::vector<ReportRow> rows;
  // heterogeneity: (level_pct, client_id, value, rel_diff vs base client)
  std::vector<std::tuple<double, int, double, double>> heterogeneity;
  // frequency: (client_id, period, share_pct)
  std::vector<std::tuple<int, double, double>> frequency;
  // rank report: (client_id, channel, d_m, approx eps-rank, rank bound)
  std::vector<std::tuple<int, int, int, int, int>> ranks;
  double regular_share_pct = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

// experiment: construct the preset's synthetic clients, train, value and
// write the preset's result CSV + summary.txt under the output directory.
ExperimentOutcome cmd_experiment(Preset preset, const ExperimentConfig& cfg);

}  // namespace verfed
