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

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace verfed {

// Error taxonomy. Parse errors carry line numbers, dimension errors carry
// the offending shapes, divergence errors name the round / timestamp.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Derives an independent stream seed from a base seed and a tag
// (splitmix64 finalizer). Used everywhere a component needs its own RNG
// so that sub-streams never alias.
uint64_t derive_seed(uint64_t base, uint64_t tag);

// Deterministic RNG wrapper. Bounded draws use rejection sampling so the
// consumed bit stream is fully specified by this code, not by the standard
// library's uniform_int_distribution.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform draw in [0, n). n must be > 0.
  size_t uniform_index(size_t n);

  // Uniform in [0, 1).
  double uniform01();

  double gaussian(double mean = 0.0, double stddev = 1.0);

  // k distinct indices from [0, n), returned sorted ascending.
  std::vector<int> sample_without_replacement(int n, int k);

  // Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Fixed-order pairwise summation. Independent of thread count by
// construction: callers fill a buffer in parallel and reduce it here.
double pairwise_sum(std::span<const double> values);

inline double pairwise_mean(std::span<const double> values) {
  return values.empty() ? 0.0 : pairwise_sum(values) / static_cast<double>(values.size());
}

}  // namespace verfed
