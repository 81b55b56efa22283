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

#include "verfed/shapley.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace verfed {

SnapshotSeries SnapshotSeries::from_async(
    std::vector<std::vector<Eigen::MatrixXd>> snapshots) {
  if (snapshots.size() < 2) {
    throw DimensionError("SnapshotSeries: need at least snapshots 0 and 1");
  }
  return SnapshotSeries{std::move(snapshots)};
}

SnapshotSeries SnapshotSeries::from_completed(const EmbeddingTrace& trace,
                                              const CompletedEmbeddings& completed) {
  const int M = trace.num_clients;
  const int N = trace.num_samples;
  const int C = trace.n_channels;
  const int T = trace.rounds;
  if (static_cast<int>(completed.filled.size()) != M) {
    throw DimensionError("from_completed: client count mismatch");
  }
  SnapshotSeries s;
  s.snaps.resize(T + 1);
  s.snaps[0] = trace.initial;
  for (int t = 1; t <= T; ++t) {
    s.snaps[t].resize(M);
    for (int m = 0; m < M; ++m) {
      Eigen::MatrixXd snap(N, C);
      for (int c = 0; c < C; ++c) {
        snap.col(c) = completed.filled[m][c].row(t - 1).transpose();
      }
      s.snaps[t][m] = std::move(snap);
    }
  }
  return s;
}

SnapshotSeries SnapshotSeries::from_full_trace(const EmbeddingTrace& trace) {
  for (int t = 0; t < trace.rounds; ++t) {
    if (static_cast<int>(trace.batches[t].size()) != trace.num_samples) {
      throw DimensionError(
          "from_full_trace: round " + std::to_string(t + 1) +
          " does not observe every sample; complete the trace instead");
    }
  }
  SnapshotSeries s;
  s.snaps.resize(trace.rounds + 1);
  s.snaps[0] = trace.initial;
  for (int t = 1; t <= trace.rounds; ++t) {
    s.snaps[t].resize(trace.num_clients);
    for (int m = 0; m < trace.num_clients; ++m) {
      s.snaps[t][m] = trace.observed[m][t - 1];  // batch rows are 0..N-1
    }
  }
  return s;
}

SnapshotSeries SnapshotSeries::from_dense_rows(const EmbeddingTrace& trace) {
  if (trace.dense_rows.empty()) {
    throw ConfigError("from_dense_rows: trace lacks dense rows; rerun with "
                      "record_dense_rows");
  }
  SnapshotSeries s;
  s.snaps.resize(trace.rounds + 1);
  s.snaps[0] = trace.initial;
  for (int t = 1; t <= trace.rounds; ++t) {
    s.snaps[t].resize(trace.num_clients);
    for (int m = 0; m < trace.num_clients; ++m) {
      s.snaps[t][m] = trace.dense_rows[m][t - 1];
    }
  }
  return s;
}

UtilityEvaluator::UtilityEvaluator(SnapshotSeries series, std::vector<int> labels,
                                   LossFn custom_loss)
    : series_(std::move(series)), labels_(std::move(labels)),
      custom_(std::move(custom_loss)) {
  if (series_.rounds() < 1) {
    throw DimensionError("UtilityEvaluator: need at least one valuation round");
  }
  if (static_cast<int>(labels_.size()) != series_.samples()) {
    throw DimensionError("UtilityEvaluator: label count does not match samples");
  }
  for (int t = 0; t <= series_.rounds(); ++t) {
    if (static_cast<int>(series_.snaps[t].size()) != series_.clients()) {
      throw DimensionError("UtilityEvaluator: ragged snapshot series");
    }
  }
}

double UtilityEvaluator::mean_loss(const Eigen::MatrixXd& mixed) const {
  const Eigen::Index n = mixed.rows();
  const int C = static_cast<int>(mixed.cols());
  const std::ptrdiff_t stride = mixed.outerStride();
  static thread_local std::vector<double> losses;
  losses.resize(static_cast<size_t>(n));
  if (custom_) {
    // Custom handles are test-scale; keep the per-sample vector copy.
    if (omp_in_parallel()) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd h = mixed.row(i).transpose();
        losses[static_cast<size_t>(i)] = custom_(h, labels_[i]);
      }
    } else {
#pragma omp parallel for schedule(static)
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd h = mixed.row(i).transpose();
        losses[static_cast<size_t>(i)] = custom_(h, labels_[i]);
      }
    }
  } else if (omp_in_parallel()) {
    for (Eigen::Index i = 0; i < n; ++i) {
      losses[static_cast<size_t>(i)] =
          loss_strided(mixed.data() + i, stride, C, labels_[i]);
    }
  } else {
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      losses[static_cast<size_t>(i)] =
          loss_strided(mixed.data() + i, stride, C, labels_[i]);
    }
  }
  return pairwise_mean(losses);
}

double UtilityEvaluator::utility(int t, CoalitionMask coalition) const {
  const int M = clients();
  if (t < 1 || t > rounds()) {
    throw std::out_of_range("utility: round " + std::to_string(t) +
                            " outside [1, " + std::to_string(rounds()) + "]");
  }
  if (M >= 32 || coalition >= (CoalitionMask{1} << M)) {
    throw std::out_of_range("utility: coalition mask has unknown clients");
  }
  Eigen::MatrixXd base = series_.snaps[t - 1][0];
  for (int m = 1; m < M; ++m) base += series_.snaps[t - 1][m];
  Eigen::MatrixXd mixed = base;
  for (int m = 0; m < M; ++m) {
    if (coalition & (CoalitionMask{1} << m)) {
      mixed += series_.snaps[t][m] - series_.snaps[t - 1][m];
    }
  }
  return mean_loss(base) - mean_loss(mixed);
}

namespace {

// 1 / (M * binom(M-1, k)) for k = 0..M-1, exact binomials.
std::vector<double> shapley_weights(int M) {
  std::vector<double> w(M);
  double binom = 1.0;  // binom(M-1, 0)
  for (int k = 0; k < M; ++k) {
    w[k] = 1.0 / (static_cast<double>(M) * binom);
    binom = binom * static_cast<double>(M - 1 - k) / static_cast<double>(k + 1);
  }
  return w;
}

struct RoundContext {
  Eigen::MatrixXd base;
  std::vector<Eigen::MatrixXd> deltas;
  double loss_prev = 0.0;
  double loss_full = 0.0;
};

RoundContext make_round_context(const UtilityEvaluator& eval, int t) {
  const int M = eval.clients();
  RoundContext ctx;
  ctx.base = eval.snapshot(t - 1, 0);
  for (int m = 1; m < M; ++m) ctx.base += eval.snapshot(t - 1, m);
  ctx.deltas.reserve(M);
  for (int m = 0; m < M; ++m) {
    ctx.deltas.push_back(eval.snapshot(t, m) - eval.snapshot(t - 1, m));
  }
  ctx.loss_prev = eval.mean_loss(ctx.base);
  Eigen::MatrixXd full = ctx.base;
  for (int m = 0; m < M; ++m) full += ctx.deltas[m];
  ctx.loss_full = eval.mean_loss(full);
  return ctx;
}

}  // namespace

ValuationResult exact_verfedsv(const UtilityEvaluator& eval, const ExactOptions& opts) {
  const int M = eval.clients();
  const int T = eval.rounds();
  if (M > opts.enumeration_cap || M > 25) {
    throw ConfigError("exact_verfedsv: " + std::to_string(M) +
                      " clients exceed the enumeration cap (" +
                      std::to_string(opts.enumeration_cap) +
                      "); use mc_verfedsv instead");
  }
  const std::vector<double> weights = shapley_weights(M);
  const CoalitionMask n_masks = CoalitionMask{1} << M;

  ValuationResult res;
  res.method = "exact";
  res.values.assign(M, 0.0);
  std::vector<double> utable(n_masks);
  double full_sum = 0.0;

  for (int t = 1; t <= T; ++t) {
    RoundContext ctx = make_round_context(eval, t);
    full_sum += ctx.loss_prev - ctx.loss_full;

    // Gray-code walk: one delta toggle per coalition, so each utility costs
    // a single pass over the samples.
    Eigen::MatrixXd mixed = ctx.base;
    utable[0] = 0.0;
    for (CoalitionMask g = 1; g < n_masks; ++g) {
      const CoalitionMask gray = g ^ (g >> 1);
      const int bit = std::countr_zero(g);
      if (gray & (CoalitionMask{1} << bit)) {
        mixed += ctx.deltas[bit];
      } else {
        mixed -= ctx.deltas[bit];
      }
      utable[gray] = ctx.loss_prev - eval.mean_loss(mixed);
    }

    for (CoalitionMask mask = 0; mask < n_masks; ++mask) {
      const int size = std::popcount(mask);
      const double u = utable[mask];
      for (int m = 0; m < M; ++m) {
        if (mask & (CoalitionMask{1} << m)) {
          res.values[m] += weights[size - 1] * u;  // U_t(S u {m}) term
        } else {
          res.values[m] -= weights[size] * u;  // -U_t(S) term
        }
      }
    }

    if (opts.store_utilities) res.per_round_utilities.push_back(utable);
  }

  for (double& v : res.values) v /= static_cast<double>(T);
  res.avg_full_utility = full_sum / static_cast<double>(T);
  return res;
}

ValuationResult mc_verfedsv(const UtilityEvaluator& eval, const McOptions& opts) {
  const int M = eval.clients();
  const int T = eval.rounds();
  const int N = eval.samples();
  const int C = eval.channels();

  // Materialize the permutation list up front (flat, M entries per row).
  std::vector<int> perms;
  if (opts.exhaustive) {
    if (M > 8) {
      throw ConfigError("mc_verfedsv: exhaustive mode is limited to M <= 8");
    }
    std::vector<int> p(M);
    std::iota(p.begin(), p.end(), 0);
    do {
      perms.insert(perms.end(), p.begin(), p.end());
    } while (std::next_permutation(p.begin(), p.end()));
  } else {
    if (opts.permutations < 1) {
      throw ConfigError("mc_verfedsv: permutations must be >= 1");
    }
    if (opts.antithetic && opts.permutations % 2 != 0) {
      throw ConfigError("mc_verfedsv: antithetic sampling needs an even count");
    }
    Rng rng(opts.seed);
    perms.reserve(static_cast<size_t>(opts.permutations) * M);
    const int64_t draws = opts.antithetic ? opts.permutations / 2 : opts.permutations;
    for (int64_t k = 0; k < draws; ++k) {
      const std::vector<int> p = rng.permutation(M);
      perms.insert(perms.end(), p.begin(), p.end());
      if (opts.antithetic) perms.insert(perms.end(), p.rbegin(), p.rend());
    }
  }
  const int64_t K = static_cast<int64_t>(perms.size()) / M;

  // Per-round contexts are shared by every permutation.
  std::vector<RoundContext> rounds;
  rounds.reserve(static_cast<size_t>(T));
  double full_sum = 0.0;
  for (int t = 1; t <= T; ++t) {
    rounds.push_back(make_round_context(eval, t));
    full_sum += rounds.back().loss_prev - rounds.back().loss_full;
  }

  // Permutations are processed in fixed blocks; block partials are combined
  // in block order afterwards, so results do not depend on the thread count.
  constexpr int64_t kBlock = 64;
  const int64_t n_blocks = (K + kBlock - 1) / kBlock;
  std::vector<std::vector<double>> block_values(
      static_cast<size_t>(n_blocks), std::vector<double>(M, 0.0));
  std::vector<double> block_min(static_cast<size_t>(n_blocks), 0.0);
  std::vector<double> block_max(static_cast<size_t>(n_blocks), 0.0);

#pragma omp parallel for schedule(dynamic)
  for (int64_t b = 0; b < n_blocks; ++b) {
    std::vector<double>& vals = block_values[static_cast<size_t>(b)];
    double lo = 0.0, hi = 0.0;  // empty coalition has zero avg utility
    Eigen::MatrixXd mixed(N, C);
    std::vector<double> prefix_avg(static_cast<size_t>(M) + 1);
    for (int64_t k = b * kBlock; k < std::min(K, (b + 1) * kBlock); ++k) {
      const int* perm = perms.data() + k * M;
      std::fill(prefix_avg.begin(), prefix_avg.end(), 0.0);
      for (int t = 0; t < T; ++t) {
        const RoundContext& ctx = rounds[static_cast<size_t>(t)];
        mixed = ctx.base;
        double cur_loss = ctx.loss_prev;
        for (int j = 0; j < M; ++j) {
          mixed += ctx.deltas[perm[j]];
          const double new_loss = eval.mean_loss(mixed);
          vals[perm[j]] += cur_loss - new_loss;
          prefix_avg[static_cast<size_t>(j) + 1] += ctx.loss_prev - new_loss;
          cur_loss = new_loss;
        }
      }
      for (int j = 1; j <= M; ++j) {
        const double avg = prefix_avg[static_cast<size_t>(j)] / static_cast<double>(T);
        lo = std::min(lo, avg);
        hi = std::max(hi, avg);
      }
    }
    block_min[static_cast<size_t>(b)] = lo;
    block_max[static_cast<size_t>(b)] = hi;
  }

  ValuationResult res;
  res.method = opts.exhaustive ? "mc_exhaustive" : "mc";
  res.permutations = K;
  res.seed = opts.exhaustive ? 0 : opts.seed;
  res.values.assign(M, 0.0);
  for (int m = 0; m < M; ++m) {
    std::vector<double> parts(static_cast<size_t>(n_blocks));
    for (int64_t b = 0; b < n_blocks; ++b) {
      parts[static_cast<size_t>(b)] = block_values[static_cast<size_t>(b)][m];
    }
    res.values[m] = pairwise_sum(parts) / (static_cast<double>(K) * T);
  }
  res.avg_full_utility = full_sum / static_cast<double>(T);

  const double lo = *std::min_element(block_min.begin(), block_min.end());
  const double hi = *std::max_element(block_max.begin(), block_max.end());
  res.empirical_range = hi - lo;
  res.mc_delta = opts.delta;
  if (*res.empirical_range > 0.0) {
    res.mc_epsilon = *res.empirical_range *
                     std::sqrt(2.0 * M * std::log(2.0 * M / opts.delta) /
                               static_cast<double>(K));
  } else {
    res.mc_epsilon = 0.0;
  }
  return res;
}

int64_t hoeffding_K(double R, int M, double eps, double delta) {
  if (R < 0.0) throw std::invalid_argument("hoeffding_K: R must be >= 0");
  if (M < 1) throw std::invalid_argument("hoeffding_K: M must be >= 1");
  if (eps <= 0.0) throw std::invalid_argument("hoeffding_K: eps must be positive");
  if (delta <= 0.0 || delta >= 1.0) {
    throw std::invalid_argument("hoeffding_K: delta must be in (0,1)");
  }
  if (R == 0.0) return 0;
  const double k = std::ceil(2.0 * R * R * M / (eps * eps) *
                             std::log(2.0 * M / delta));
  return static_cast<int64_t>(k);
}

ErrorBudget completion_error_budget(const CompletedEmbeddings& completed, double G) {
  ErrorBudget out;
  out.epsilon = completed.mean_max_abs_residual(&out.from_ground_truth);
  out.bound = 2.0 * G * out.epsilon;
  return out;
}

}  // namespace verfed
