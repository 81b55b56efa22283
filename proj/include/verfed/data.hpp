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
#include <string>
#include <vector>

#include "verfed/common.hpp"

namespace verfed {

// Labeled dense dataset. Labels are remapped to contiguous 0..C-1 at load
// time; label_values keeps the original value for each class index.
struct DenseDataset {
  Eigen::MatrixXd features;  // N x d
  std::vector<int> labels;   // each in [0, n_classes)
  int n_classes = 0;
  std::vector<double> label_values;

  Eigen::Index num_samples() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

// One client's vertical slice. Rows stay aligned with the global sample index.
struct ClientData {
  int client_id = 0;
  Eigen::MatrixXd features;  // N x d_m

  Eigen::Index num_samples() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

// Feature-partitioned dataset: clients share sample IDs, labels live with
// the server.
struct VerticalDataset {
  std::vector<ClientData> clients;
  std::vector<int> labels;
  int n_classes = 0;

  int num_clients() const { return static_cast<int>(clients.size()); }
  Eigen::Index num_samples() const {
    return clients.empty() ? 0 : clients.front().num_samples();
  }
};

// Parses LIBSVM text (label followed by 1-based index:value pairs).
// Malformed lines raise ParseError with the line number; an index above
// expected_dim raises DimensionError.
DenseDataset load_libsvm(const std::string& path,
                         std::optional<int> expected_dim = std::nullopt);

// Splits feature columns into contiguous blocks, one per client. splits must
// sum to d. When column_shuffle_seed is set, columns are permuted (seeded)
// before the split.
VerticalDataset partition_vertical(const DenseDataset& ds,
                                   const std::vector<int>& splits,
                                   std::optional<uint64_t> column_shuffle_seed = std::nullopt);

struct NormalizeResult {
  ClientData data;
  std::vector<int> zero_rows;  // rows left untouched because their norm is 0
};

// Rescales every nonzero row to unit Euclidean norm.
NormalizeResult normalize_client_features(const ClientData& cd);

// Copy of cd with seeded Gaussian noise added to floor(fraction * d_m)
// uniformly chosen feature columns.
ClientData make_noisy_clone(const ClientData& cd, double fraction,
                            double noise_std, uint64_t seed);

// n x d_m matrix of i.i.d. Gaussian(mean, stddev^2) features.
ClientData make_random_client(int n, int d_m, double mean, double stddev,
                              uint64_t seed);

// Seeded lower-level helpers used by the CLI and tests.

// Keeps n uniformly chosen rows (without replacement, original order).
DenseDataset subsample_rows(const DenseDataset& ds, int n, uint64_t seed);

// Seeded shuffle split into (train, test) with the given test fraction.
std::pair<DenseDataset, DenseDataset> train_test_split(const DenseDataset& ds,
                                                       double test_fraction,
                                                       uint64_t seed);

// Synthetic multi-class dataset: Gaussian features, labels from the argmax
// of a hidden linear scorer, with an optional label-flip fraction. Used by
// experiment presets when no real dataset path is configured.
DenseDataset make_synthetic_classification(int n, int d, int n_classes,
                                           uint64_t seed,
                                           double label_flip = 0.0);

}  // namespace verfed
