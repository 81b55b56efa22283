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
#include <optional>
#include <vector>

#include "verfed/sync.hpp"

namespace verfed {

struct CompletionConfig {
  int rank = 0;          // 0 = auto from rank_bound, capped at min(T, N, 50)
  double lambda = 1e-2;  // ridge weight; 0 only works with full row/col coverage
  int max_iters = 200;
  double tol = 1e-9;     // relative objective decrease stopping criterion
  uint64_t seed = 0;
};

// Observed entries of one T x N matrix as aligned triplet arrays.
struct SparseObservations {
  int rows = 0;  // T
  int cols = 0;  // N
  std::vector<int> row;
  std::vector<int> col;
  std::vector<double> value;

  size_t size() const { return value.size(); }
};

// Result of factorizing one channel's embedding matrix.
struct ChannelCompletion {
  Eigen::MatrixXd W;  // T x r
  Eigen::MatrixXd H;  // N x r
  double observed_rmse = 0.0;
  double observed_max_abs = 0.0;  // eps-hat on the observed entries
  int iterations = 0;
  std::vector<double> objective;  // per accepted iteration, non-increasing
  std::vector<int> empty_rows;    // rows/cols driven by the regularizer alone
  std::vector<int> empty_cols;

  // Filled against ground truth via evaluate_completion (tests/diagnostics).
  std::optional<double> holdout_rmse;
  std::optional<double> holdout_max_abs;  // max |truth - filled| off-support
  std::optional<double> full_max_abs;     // max |truth - filled| anywhere

  Eigen::MatrixXd reconstruct() const { return W * H.transpose(); }

  // W H^T with the observed entries overwritten by their exact values.
  Eigen::MatrixXd filled(const SparseObservations& obs) const;
};

// Alternating ridge least-squares on the observed entries. Each half-sweep
// solves every row (column) factor exactly via an r x r system, so the
// objective never increases. Deterministic for a fixed seed.
ChannelCompletion complete_matrix(const SparseObservations& obs,
                                  const CompletionConfig& cfg);

// Per-client, per-channel completions of a synchronous trace.
struct CompletedEmbeddings {
  std::vector<std::vector<ChannelCompletion>> fits;     // [m][c]
  std::vector<std::vector<Eigen::MatrixXd>> filled;     // [m][c]: T x N

  // (1/M) sum_m max_c residual. Prefers ground-truth residuals when every
  // fit carries them; the used flavor is reported through used_ground_truth.
  double mean_max_abs_residual(bool* used_ground_truth = nullptr) const;
};

CompletedEmbeddings complete_trace(const EmbeddingTrace& trace,
                                   const CompletionConfig& cfg);

// Scores a completion against the true matrix: held-out RMSE/max-abs over
// unobserved entries plus the max-abs residual of the filled matrix.
void evaluate_completion(ChannelCompletion& fit, const SparseObservations& obs,
                         const Eigen::MatrixXd& truth);

// Count of singular values >= eps * sigma_1 (0 for the zero matrix).
int approx_epsilon_rank(const Eigen::MatrixXd& matrix, double eps);

// min(d_m, ceil(L * ln(T) / eps)): the computable part of the embedding
// matrix rank bound under the 1/t learning-rate schedule.
int rank_bound(int d_m, double L, int T, double eps);

}  // namespace verfed
