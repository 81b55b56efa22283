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
#include <vector>

#include "verfed/model.hpp"

namespace verfed {

enum class LrSchedule { kConstant, kOneOverT };

struct SyncConfig {
  int rounds = 100;           // T; 0 is allowed and leaves the models untouched
  int batch_size = 0;         // tau = min_m tau_m; 0 means full batch (N)
  double learning_rate = 0.5; // eta (base rate; kOneOverT uses eta / t)
  LrSchedule schedule = LrSchedule::kConstant;
  double l2 = 0.0;            // optional ridge term on the local models
  uint64_t seed = 0;
  int full_eval_every = 1;    // full-dataset loss cadence in rounds; 0 = never
  bool record_dense_rows = false;  // debug: also keep every round's full rows
  int channels_override = 0;  // 0 = n_classes; 1 = scalar margin mode (2-class data)
};

// Per-client record of what the server saw. Valuation row t holds the
// embeddings uploaded during round t, i.e. the model state after t-1
// updates; row 0 is the complete pre-training state. This matches the
// asynchronous server semantics, where pushed embeddings always predate the
// push's own model update.
struct EmbeddingTrace {
  int num_clients = 0;   // M
  int num_samples = 0;   // N
  int n_channels = 0;    // C
  int rounds = 0;        // T
  std::vector<int> client_dims;                      // [m]: d_m

  std::vector<std::vector<int>> batches;             // [t-1]: sorted B^(t)
  std::vector<Eigen::MatrixXd> initial;              // [m]: N x C, row 0
  std::vector<std::vector<Eigen::MatrixXd>> observed;  // [m][t-1]: |B| x C
  std::vector<std::vector<double>> model_norms;      // [m][t-1]: ||theta|| after round t

  // Optional debug channel (SyncConfig::record_dense_rows): the full N x C
  // embedding rows per round, used as ground truth in completion tests.
  std::vector<std::vector<Eigen::MatrixXd>> dense_rows;  // [m][t-1]: N x C

  // Sparse observations for one client/channel as (row, col, value) with
  // row = t-1 in the T x N embedding matrix.
  struct Triplet {
    int t_row;
    int sample;
    double value;
  };
  std::vector<Triplet> observations(int client, int channel) const;
};

// True where an embedding was recorded at rounds t >= 1 (T x N).
Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed_mask(
    const EmbeddingTrace& trace, int client);

struct SyncRunResult {
  std::vector<LocalModel> models;
  EmbeddingTrace trace;
  std::vector<double> batch_loss;               // [t-1]: batch loss before update
  std::vector<std::pair<int, double>> full_loss;  // (t, loss after t rounds)
};

// Synchronous FedSGD: the server draws one mini-batch per round, every
// client uploads that batch's embeddings, downloads the loss gradients and
// takes a local step. Deterministic for a fixed seed.
SyncRunResult run_fedsgd(const VerticalDataset& data, const SyncConfig& cfg);

// Mean loss of the summed per-client scores over all samples.
double full_dataset_loss(const std::vector<LocalModel>& models,
                         const VerticalDataset& data);

}  // namespace verfed
