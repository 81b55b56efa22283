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

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "verfed/experiment.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string output;
  std::string mode;
  std::string dataset;
  int64_t seed = -1;
  int subsample = -1;
  int64_t K = -1;
  bool exact = false;
};

void add_common(CLI::App* app, CommonFlags& flags) {
  app->add_option("--config", flags.config, "experiment manifest (key = value lines)");
  app->add_option("--output", flags.output, "output directory");
  app->add_option("--mode", flags.mode, "sync or async");
  app->add_option("--dataset", flags.dataset, "LIBSVM path or 'synthetic'");
  app->add_option("--seed", flags.seed, "top-level seed");
  app->add_option("--subsample", flags.subsample, "keep this many rows (0 = all)");
  app->add_option("--K", flags.K, "Monte-Carlo permutation count (implies mc)");
  app->add_flag("--exact", flags.exact, "force exact coalition enumeration");
}

verfed::ExperimentConfig resolve(const CommonFlags& flags) {
  verfed::ExperimentConfig cfg;
  if (!flags.config.empty()) cfg = verfed::load_config_file(flags.config);
  if (!flags.output.empty()) cfg.output = flags.output;
  if (!flags.mode.empty()) cfg.mode = flags.mode;
  if (!flags.dataset.empty()) cfg.dataset = flags.dataset;
  if (flags.seed >= 0) cfg.seed = static_cast<uint64_t>(flags.seed);
  if (flags.subsample >= 0) cfg.subsample = flags.subsample;
  if (flags.K >= 0) {
    cfg.valuation = "mc";
    cfg.mc_permutations = flags.K;
  }
  if (flags.exact) cfg.valuation = "exact";
  return cfg;
}

void print_rows(const std::vector<verfed::ReportRow>& rows) {
  std::printf("%-10s %-16s %14s %10s\n", "client", "kind", "value", "share%");
  for (const auto& row : rows) {
    std::printf("%-10d %-16s %14.6g %10.4f\n", row.client_id, row.kind.c_str(),
                row.value, row.share_pct);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vertical federated training and VerFedSV valuation"};
  app.require_subcommand(1);

  CommonFlags train_flags, value_flags, exp_flags, rank_flags;
  std::string trace_dir, preset_name;

  CLI::App* train = app.add_subcommand("train", "run a training simulation and "
                                                "write a trace checkpoint");
  add_common(train, train_flags);

  CLI::App* value = app.add_subcommand("value", "compute VerFedSV from a checkpoint");
  add_common(value, value_flags);
  value->add_option("--trace", trace_dir, "checkpoint directory written by train")
      ->required();

  CLI::App* experiment = app.add_subcommand("experiment", "run an experiment preset "
                                                          "end to end");
  add_common(experiment, exp_flags);
  experiment
      ->add_option("--preset", preset_name,
                   "heterogeneity | random_feature_sync | frequency | "
                   "random_feature_async | rank_report")
      ->required();

  CLI::App* rank = app.add_subcommand("rank-report", "approximated eps-rank of the "
                                                     "embedding matrices");
  add_common(rank, rank_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto out = verfed::cmd_train(resolve(train_flags));
      std::printf("checkpoint: %s\n", out.dir.string().c_str());
      std::printf("train_accuracy: %.4f\n", out.train_accuracy);
      std::printf("test_accuracy:  %.4f\n", out.test_accuracy);
      std::printf("final_loss:     %.6g\n", out.final_loss);
    } else if (value->parsed()) {
      const auto out = verfed::cmd_value(trace_dir, resolve(value_flags));
      print_rows(out.rows);
      if (out.budget) {
        std::printf("completion epsilon: %.6g (2G*eps bound %.6g)\n",
                    out.budget->epsilon, out.budget->bound);
      }
      if (out.valuation.mc_epsilon) {
        std::printf("mc epsilon: %.6g at delta %.2f (K=%lld)\n",
                    *out.valuation.mc_epsilon, *out.valuation.mc_delta,
                    static_cast<long long>(out.valuation.permutations));
      }
      std::printf("written: %s\n", out.csv.string().c_str());
    } else if (experiment->parsed()) {
      const auto out = verfed::cmd_experiment(verfed::parse_preset(preset_name),
                                              resolve(exp_flags));
      if (!out.rows.empty()) print_rows(out.rows);
      for (const auto& [level, id, v, diff] : out.heterogeneity) {
        std::printf("heterogeneity %3.0f%%: client %d value %.6g rel_diff %.6g\n",
                    level, id, v, diff);
      }
      for (const auto& [id, period, share] : out.frequency) {
        std::printf("frequency client %d period %.3f share %.4f%%\n", id, period,
                    share);
      }
      for (const auto& [m, c, dm, r, bound] : out.ranks) {
        std::printf("client %d channel %d: eps-rank %d (d_m=%d, bound %d)\n", m, c,
                    r, dm, bound);
      }
      std::printf("results: %s\n", out.dir.string().c_str());
    } else if (rank->parsed()) {
      const auto out = verfed::cmd_experiment(verfed::Preset::kRankReport,
                                              resolve(rank_flags));
      for (const auto& [m, c, dm, r, bound] : out.ranks) {
        std::printf("client %d channel %d: eps-rank %d (d_m=%d, bound %d)\n", m, c,
                    r, dm, bound);
      }
      std::printf("results: %s\n", out.dir.string().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
