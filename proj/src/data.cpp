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

#include "verfed/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace verfed {

namespace {

struct SparseRow {
  double label;
  std::vector<std::pair<int, double>> entries;  // 0-based column, value
};

// One line: "<label> <idx>:<val> <idx>:<val> ...". Indices are 1-based.
SparseRow parse_libsvm_line(const std::string& line, size_t line_no) {
  SparseRow row;
  const char* p = line.c_str();
  char* end = nullptr;

  row.label = std::strtod(p, &end);
  if (end == p) {
    throw ParseError("libsvm parse error at line " + std::to_string(line_no) +
                     ": missing label token");
  }
  p = end;

  while (true) {
    while (*p == ' ' || *p == '\t') ++p;
    if (*p == '\0' || *p == '\n' || *p == '\r' || *p == '#') break;

    const long idx = std::strtol(p, &end, 10);
    if (end == p || *end != ':') {
      throw ParseError("libsvm parse error at line " + std::to_string(line_no) +
                       ": expected index:value, got '" + std::string(p) + "'");
    }
    if (idx < 1) {
      throw ParseError("libsvm parse error at line " + std::to_string(line_no) +
                       ": feature indices are 1-based, got " + std::to_string(idx));
    }
    p = end + 1;
    const double val = std::strtod(p, &end);
    if (end == p) {
      throw ParseError("libsvm parse error at line " + std::to_string(line_no) +
                       ": missing value after ':'");
    }
    p = end;
    row.entries.emplace_back(static_cast<int>(idx - 1), val);
  }
  return row;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

DenseDataset load_libsvm(const std::string& path, std::optional<int> expected_dim) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path);

  std::vector<SparseRow> rows;
  std::string line;
  size_t line_no = 0;
  int max_col = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line) || line[0] == '#') continue;
    SparseRow row = parse_libsvm_line(line, line_no);
    for (const auto& [col, _] : row.entries) {
      if (expected_dim && col >= *expected_dim) {
        throw DimensionError("libsvm line " + std::to_string(line_no) +
                             ": feature index " + std::to_string(col + 1) +
                             " exceeds expected dimension " +
                             std::to_string(*expected_dim));
      }
      max_col = std::max(max_col, col);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("dataset file has no data rows: " + path);

  const int d = expected_dim ? *expected_dim : max_col + 1;
  if (d < 1) throw DimensionError("dataset has no features: " + path);

  // Label values sorted ascending define the class indices.
  std::map<double, int> label_map;
  for (const auto& r : rows) label_map.emplace(r.label, 0);
  int next_id = 0;
  for (auto& [value, id] : label_map) id = next_id++;

  DenseDataset ds;
  ds.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), d);
  ds.labels.resize(rows.size());
  ds.n_classes = next_id;
  ds.label_values.resize(next_id);
  for (const auto& [value, id] : label_map) ds.label_values[id] = value;

  for (size_t i = 0; i < rows.size(); ++i) {
    ds.labels[i] = label_map.at(rows[i].label);
    for (const auto& [col, val] : rows[i].entries) {
      ds.features(static_cast<Eigen::Index>(i), col) = val;
    }
  }
  return ds;
}

VerticalDataset partition_vertical(const DenseDataset& ds,
                                   const std::vector<int>& splits,
                                   std::optional<uint64_t> column_shuffle_seed) {
  const Eigen::Index d = ds.dim();
  long long total = 0;
  for (int s : splits) {
    if (s < 1) throw DimensionError("partition_vertical: every split must be >= 1");
    total += s;
  }
  if (total != static_cast<long long>(d)) {
    throw DimensionError("partition_vertical: splits sum to " + std::to_string(total) +
                         " but dataset has " + std::to_string(d) + " features");
  }

  std::vector<int> cols(static_cast<size_t>(d));
  std::iota(cols.begin(), cols.end(), 0);
  if (column_shuffle_seed) {
    Rng rng(*column_shuffle_seed);
    cols = rng.permutation(static_cast<int>(d));
  }

  VerticalDataset out;
  out.labels = ds.labels;
  out.n_classes = ds.n_classes;
  out.clients.reserve(splits.size());
  int offset = 0;
  for (size_t m = 0; m < splits.size(); ++m) {
    ClientData cd;
    cd.client_id = static_cast<int>(m);
    cd.features.resize(ds.num_samples(), splits[m]);
    for (int j = 0; j < splits[m]; ++j) {
      cd.features.col(j) = ds.features.col(cols[offset + j]);
    }
    offset += splits[m];
    out.clients.push_back(std::move(cd));
  }
  return out;
}

NormalizeResult normalize_client_features(const ClientData& cd) {
  NormalizeResult res;
  res.data.client_id = cd.client_id;
  res.data.features = cd.features;
  for (Eigen::Index i = 0; i < cd.features.rows(); ++i) {
    const double norm = res.data.features.row(i).norm();
    if (norm > 0.0) {
      res.data.features.row(i) /= norm;
    } else {
      res.zero_rows.push_back(static_cast<int>(i));
    }
  }
  return res;
}

ClientData make_noisy_clone(const ClientData& cd, double fraction,
                            double noise_std, uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw std::invalid_argument("make_noisy_clone: fraction must be in [0,1]");
  }
  ClientData out = cd;
  const int d_m = static_cast<int>(cd.dim());
  const int k = static_cast<int>(std::floor(fraction * d_m));
  if (k == 0) return out;

  Rng rng(seed);
  const std::vector<int> cols = rng.sample_without_replacement(d_m, k);
  for (int col : cols) {
    for (Eigen::Index i = 0; i < out.features.rows(); ++i) {
      out.features(i, col) += rng.gaussian(0.0, noise_std);
    }
  }
  return out;
}

ClientData make_random_client(int n, int d_m, double mean, double stddev,
                              uint64_t seed) {
  if (n < 1 || d_m < 1) {
    throw std::invalid_argument("make_random_client: n and d_m must be >= 1");
  }
  ClientData cd;
  cd.features.resize(n, d_m);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d_m; ++j) {
      cd.features(i, j) = rng.gaussian(mean, stddev);
    }
  }
  return cd;
}

DenseDataset subsample_rows(const DenseDataset& ds, int n, uint64_t seed) {
  if (n <= 0 || n >= ds.num_samples()) return ds;
  Rng rng(seed);
  const std::vector<int> keep =
      rng.sample_without_replacement(static_cast<int>(ds.num_samples()), n);
  DenseDataset out;
  out.n_classes = ds.n_classes;
  out.label_values = ds.label_values;
  out.features.resize(n, ds.dim());
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    out.features.row(i) = ds.features.row(keep[i]);
    out.labels[i] = ds.labels[keep[i]];
  }
  return out;
}

std::pair<DenseDataset, DenseDataset> train_test_split(const DenseDataset& ds,
                                                       double test_fraction,
                                                       uint64_t seed) {
  const int n = static_cast<int>(ds.num_samples());
  const int n_test = static_cast<int>(std::floor(test_fraction * n));
  Rng rng(seed);
  std::vector<int> test_ids = rng.sample_without_replacement(n, n_test);
  std::vector<char> in_test(n, 0);
  for (int id : test_ids) in_test[id] = 1;

  auto take = [&](bool test_part) {
    DenseDataset part;
    part.n_classes = ds.n_classes;
    part.label_values = ds.label_values;
    const int rows = test_part ? n_test : n - n_test;
    part.features.resize(rows, ds.dim());
    part.labels.resize(rows);
    int r = 0;
    for (int i = 0; i < n; ++i) {
      if (static_cast<bool>(in_test[i]) != test_part) continue;
      part.features.row(r) = ds.features.row(i);
      part.labels[r] = ds.labels[i];
      ++r;
    }
    return part;
  };
  return {take(false), take(true)};
}

DenseDataset make_synthetic_classification(int n, int d, int n_classes,
                                           uint64_t seed, double label_flip) {
  if (n < 1 || d < 1 || n_classes < 2) {
    throw std::invalid_argument("make_synthetic_classification: bad shape");
  }
  Rng rng(seed);
  Eigen::MatrixXd scorer(n_classes, d);
  for (int c = 0; c < n_classes; ++c) {
    for (int j = 0; j < d; ++j) scorer(c, j) = rng.gaussian();
  }

  DenseDataset ds;
  ds.n_classes = n_classes;
  ds.features.resize(n, d);
  ds.labels.resize(n);
  ds.label_values.resize(n_classes);
  std::iota(ds.label_values.begin(), ds.label_values.end(), 0.0);

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) ds.features(i, j) = rng.gaussian();
    const Eigen::VectorXd scores = scorer * ds.features.row(i).transpose();
    Eigen::Index label = 0;
    scores.maxCoeff(&label);
    if (label_flip > 0.0 && rng.uniform01() < label_flip) {
      label = static_cast<Eigen::Index>(rng.uniform_index(static_cast<size_t>(n_classes)));
    }
    ds.labels[i] = static_cast<int>(label);
  }
  return ds;
}

}  // namespace verfed
