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
#include <string>
#include <vector>

#include "verfed/async.hpp"
#include "verfed/sync.hpp"

namespace verfed {

// Client metadata carried through checkpoints into reports.
struct ClientInfo {
  int client_id = 0;
  std::string kind = "regular";  // regular | clone(..%) | random | frequency(..)
  int dim = 0;
  double period = 0.0;  // async only
  int tau = 0;          // async only
};

// On-disk checkpoint: a directory of CSV files (meta, labels, clients,
// trace, norms, loss, events). trace.csv rows are
//   client_id,t,sample_id,v0[,v1,...]
// with a complete row block at t = 0. Synchronous checkpoints carry batch
// observations for t >= 1; asynchronous ones carry full snapshots.
struct Checkpoint {
  std::string mode;  // "sync" | "async"
  int n_classes = 0;
  uint64_t seed = 0;
  std::vector<int> labels;
  std::vector<ClientInfo> clients;

  EmbeddingTrace trace;  // sync payload
  std::vector<std::vector<Eigen::MatrixXd>> snapshots;  // async payload [t][m]
  int valuation_points = 0;                             // async T

  std::vector<std::pair<double, double>> loss_history;  // (round or time, loss)
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

void save_events_csv(const std::filesystem::path& file,
                     const std::vector<AsyncEvent>& events);

// Shortest exact decimal round-trip formatting used for every CSV value.
std::string format_double(double v);

// Whole-file write through a temp file + rename.
void atomic_write_file(const std::filesystem::path& file, const std::string& content);

// Minimal CSV reader (no quoting; our schemas never emit commas in fields).
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& file);

}  // namespace verfed
