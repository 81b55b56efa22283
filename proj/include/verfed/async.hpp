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

struct ClientProfile {
  int client_id = 0;
  int tau = 1;                     // batch capacity per push
  double period = 0.01;            // simulated seconds between update cycles
  double learning_rate = 0.5;
  uint64_t seed = 0;               // per-client batch/participation stream
  double participation_prob = 1.0; // < 1 enables Bernoulli participation
};

struct AsyncConfig {
  double total_time = 5.0;
  double valuation_interval = 0.01;  // T = total_time / valuation_interval
  std::vector<ClientProfile> profiles;
  double l2 = 0.0;
  bool record_snapshots = true;
  int channels_override = 0;  // 0 = n_classes; 1 = scalar margin mode
};

// Latest embeddings the server holds, one N x C block per client. All zeros
// at simulation start.
struct ServerState {
  std::vector<Eigen::MatrixXd> latest;  // [m]: N x C

  static ServerState zeros(int clients, Eigen::Index n, int channels);
};

struct AsyncEvent {
  double time = 0.0;
  int client_id = 0;
  long seq = 0;              // per-client event counter
  bool participated = true;  // false when the Bernoulli draw skipped the cycle
  std::vector<int> batch;    // sorted sample ids (empty when skipped)
};

struct AsyncRunResult {
  std::vector<LocalModel> models;
  // snapshots[t][m]: server embedding state at valuation point t (0..T);
  // empty when record_snapshots is off.
  std::vector<std::vector<Eigen::MatrixXd>> snapshots;
  std::vector<double> snapshot_loss;  // [t]: mean loss of server state at point t
  std::vector<AsyncEvent> events;
  int valuation_points = 0;  // T
};

// Discrete-event VAFL simulation: each client pushes fresh batch embeddings
// and pulls partial gradients against the server's current (possibly stale)
// state on its own period. The full embedding state is snapshotted at every
// valuation time-stamp. Client events at a shared timestamp run before the
// snapshot, ordered by client id. Deterministic for fixed seeds.
AsyncRunResult run_vafl(const VerticalDataset& data, const AsyncConfig& cfg);

// Sample indices whose embeddings changed for client m between two snapshots.
std::vector<int> snapshot_delta(const std::vector<Eigen::MatrixXd>& prev,
                                const std::vector<Eigen::MatrixXd>& curr,
                                int client);

}  // namespace verfed
