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

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "verfed/completion.hpp"
#include "verfed/model.hpp"
#include "verfed/sync.hpp"

namespace verfed {

// Client subsets as bitmasks; bit m set means client m is in the coalition.
using CoalitionMask = uint32_t;

// Full embedding states at valuation points 0..T for every client.
struct SnapshotSeries {
  std::vector<std::vector<Eigen::MatrixXd>> snaps;  // [t][m]: N x C

  int rounds() const { return static_cast<int>(snaps.size()) - 1; }
  int clients() const { return snaps.empty() ? 0 : static_cast<int>(snaps[0].size()); }
  int samples() const {
    return clients() == 0 ? 0 : static_cast<int>(snaps[0][0].rows());
  }
  int channels() const {
    return clients() == 0 ? 0 : static_cast<int>(snaps[0][0].cols());
  }

  // Asynchronous runs record full server states directly.
  static SnapshotSeries from_async(std::vector<std::vector<Eigen::MatrixXd>> snapshots);

  // Synchronous valuation path: completed matrices with observed entries
  // overwritten, plus the exact round-0 row.
  static SnapshotSeries from_completed(const EmbeddingTrace& trace,
                                       const CompletedEmbeddings& completed);

  // Fully observed trace (batch size N); no completion involved.
  static SnapshotSeries from_full_trace(const EmbeddingTrace& trace);

  // Debug rows recorded with SyncConfig::record_dense_rows (ground truth).
  static SnapshotSeries from_dense_rows(const EmbeddingTrace& trace);
};

// Evaluates the per-round coalition utility
//   U_t(S) = mean_i f(sum_m h_i^m at t-1) - mean_i f(mixed coalition scores)
// where members of S contribute their time-t embeddings and everyone else
// stays at t-1. Pure; safe to share across threads.
class UtilityEvaluator {
 public:
  UtilityEvaluator(SnapshotSeries series, std::vector<int> labels,
                   LossFn custom_loss = {});

  int rounds() const { return series_.rounds(); }
  int clients() const { return series_.clients(); }
  int samples() const { return series_.samples(); }
  int channels() const { return series_.channels(); }

  double utility(int t, CoalitionMask coalition) const;

  // Mean loss of a mixed score matrix under this evaluator's labels/loss.
  double mean_loss(const Eigen::MatrixXd& mixed) const;

  const Eigen::MatrixXd& snapshot(int t, int m) const { return series_.snaps[t][m]; }

 private:
  SnapshotSeries series_;
  std::vector<int> labels_;
  LossFn custom_;
};

struct ValuationResult {
  std::vector<double> values;  // s_m per client
  std::string method;          // "exact", "mc" or "mc_exhaustive"
  int64_t permutations = 0;    // K for the Monte-Carlo methods
  uint64_t seed = 0;
  double avg_full_utility = 0.0;  // (1/T) sum_t U_t([M])
  // Monte-Carlo extras: empirical utility range and the (eps, delta) implied
  // by K through the sample-count bound.
  std::optional<double> empirical_range;
  std::optional<double> mc_epsilon;
  std::optional<double> mc_delta;
  // Optional 2^M x T utility log (exact mode with store_utilities).
  std::vector<std::vector<double>> per_round_utilities;  // [t-1][mask]
};

struct ExactOptions {
  int enumeration_cap = 20;
  bool store_utilities = false;
};

// Exact VerFedSV by coalition enumeration with per-round memoization: each
// coalition's utility is evaluated once per round (Gray-code sweep), giving
// O(2^M T N C) total work.
ValuationResult exact_verfedsv(const UtilityEvaluator& eval,
                               const ExactOptions& opts = {});

struct McOptions {
  int64_t permutations = 1000;  // ignored in exhaustive mode
  uint64_t seed = 0;
  bool antithetic = false;  // pair each permutation with its reverse
  bool exhaustive = false;  // enumerate all M! permutations (M <= 8)
  double delta = 0.05;      // confidence level for the implied eps
};

// Permutation-sampling estimator. Each permutation costs M utility deltas
// per round via incremental coalition sums.
ValuationResult mc_verfedsv(const UtilityEvaluator& eval, const McOptions& opts);

// Permutation count prescribed by the Hoeffding-style bound
//   K = ceil((2 R^2 M / eps^2) * ln(2 M / delta)),
// with R the utility range over coalitions. R = 0 returns 0.
int64_t hoeffding_K(double R, int M, double eps, double delta);

struct ErrorBudget {
  double bound = 0.0;    // 2 G eps
  double epsilon = 0.0;  // mean over clients of the max-abs residual
  bool from_ground_truth = false;
};

// Valuation error budget implied by the completion residuals.
ErrorBudget completion_error_budget(const CompletedEmbeddings& completed, double G);

}  // namespace verfed
