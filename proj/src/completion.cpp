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

#include "verfed/completion.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace verfed {

namespace {

// Observation lists grouped by row and by column.
struct Grouped {
  std::vector<std::vector<std::pair<int, double>>> by_row;  // row -> (col, v)
  std::vector<std::vector<std::pair<int, double>>> by_col;  // col -> (row, v)
};

Grouped group(const SparseObservations& obs) {
  Grouped g;
  g.by_row.resize(obs.rows);
  g.by_col.resize(obs.cols);
  for (size_t k = 0; k < obs.size(); ++k) {
    g.by_row[obs.row[k]].emplace_back(obs.col[k], obs.value[k]);
    g.by_col[obs.col[k]].emplace_back(obs.row[k], obs.value[k]);
  }
  return g;
}

// Solves one side of the alternation: for every row index of `target`,
// minimize sum over its observations (v - w^T fixed_f)^2 + lambda ||w||^2.
void ridge_half_sweep(const std::vector<std::vector<std::pair<int, double>>>& groups,
                      const Eigen::MatrixXd& fixed, double lambda,
                      Eigen::MatrixXd& target) {
  const int r = static_cast<int>(fixed.cols());
  const Eigen::Index rows = target.rows();
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index idx = 0; idx < rows; ++idx) {
    const auto& entries = groups[static_cast<size_t>(idx)];
    if (entries.empty()) {
      target.row(idx).setZero();  // regularizer-only row
      continue;
    }
    Eigen::MatrixXd gram = lambda * Eigen::MatrixXd::Identity(r, r);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(r);
    for (const auto& [other, v] : entries) {
      const auto f = fixed.row(other);
      gram.noalias() += f.transpose() * f;
      rhs.noalias() += v * f.transpose();
    }
    target.row(idx) = gram.ldlt().solve(rhs).transpose();
  }
}

double objective_value(const Grouped& g, const Eigen::MatrixXd& W,
                       const Eigen::MatrixXd& H, double lambda,
                       std::vector<double>& scratch) {
  scratch.assign(g.by_row.size(), 0.0);
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(g.by_row.size()); ++t) {
    double s = 0.0;
    for (const auto& [i, v] : g.by_row[static_cast<size_t>(t)]) {
      const double resid = v - W.row(t).dot(H.row(i));
      s += resid * resid;
    }
    scratch[static_cast<size_t>(t)] = s;
  }
  return pairwise_sum(scratch) +
         lambda * (W.squaredNorm() + H.squaredNorm());
}

}  // namespace

Eigen::MatrixXd ChannelCompletion::filled(const SparseObservations& obs) const {
  Eigen::MatrixXd out = reconstruct();
  for (size_t k = 0; k < obs.size(); ++k) {
    out(obs.row[k], obs.col[k]) = obs.value[k];
  }
  return out;
}

ChannelCompletion complete_matrix(const SparseObservations& obs,
                                  const CompletionConfig& cfg) {
  if (obs.rows < 1 || obs.cols < 1) {
    throw DimensionError("complete_matrix: empty matrix shape");
  }
  if (cfg.rank < 1) throw ConfigError("complete_matrix: rank must be >= 1");
  if (cfg.tol <= 0.0) throw ConfigError("complete_matrix: tol must be positive");
  if (cfg.lambda < 0.0) throw ConfigError("complete_matrix: lambda must be >= 0");

  const Grouped g = group(obs);

  ChannelCompletion fit;
  for (int t = 0; t < obs.rows; ++t) {
    if (g.by_row[t].empty()) fit.empty_rows.push_back(t);
  }
  for (int i = 0; i < obs.cols; ++i) {
    if (g.by_col[i].empty()) fit.empty_cols.push_back(i);
  }
  if (cfg.lambda == 0.0 && (!fit.empty_rows.empty() || !fit.empty_cols.empty())) {
    throw ConfigError(
        "complete_matrix: lambda = 0 with an unobserved row or column leaves "
        "the system singular");
  }

  const int r = cfg.rank;
  Rng rng(cfg.seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(r));
  fit.W.resize(obs.rows, r);
  fit.H.resize(obs.cols, r);
  for (Eigen::Index t = 0; t < fit.W.rows(); ++t) {
    for (int j = 0; j < r; ++j) fit.W(t, j) = rng.gaussian(0.0, scale);
  }
  for (Eigen::Index i = 0; i < fit.H.rows(); ++i) {
    for (int j = 0; j < r; ++j) fit.H(i, j) = rng.gaussian(0.0, scale);
  }

  std::vector<double> scratch;
  double prev = objective_value(g, fit.W, fit.H, cfg.lambda, scratch);
  fit.objective.push_back(prev);
  for (int it = 0; it < cfg.max_iters; ++it) {
    ridge_half_sweep(g.by_row, fit.H, cfg.lambda, fit.W);
    ridge_half_sweep(g.by_col, fit.W, cfg.lambda, fit.H);
    const double cur = objective_value(g, fit.W, fit.H, cfg.lambda, scratch);
    fit.objective.push_back(cur);
    fit.iterations = it + 1;
    if (prev - cur <= cfg.tol * std::max(std::abs(prev), 1e-300)) {
      prev = cur;
      break;
    }
    prev = cur;
  }

  // Fit quality on the observed entries.
  double sq = 0.0, max_abs = 0.0;
  for (size_t k = 0; k < obs.size(); ++k) {
    const double resid =
        obs.value[k] - fit.W.row(obs.row[k]).dot(fit.H.row(obs.col[k]));
    sq += resid * resid;
    max_abs = std::max(max_abs, std::abs(resid));
  }
  fit.observed_rmse = obs.size() ? std::sqrt(sq / static_cast<double>(obs.size())) : 0.0;
  fit.observed_max_abs = max_abs;
  return fit;
}

void evaluate_completion(ChannelCompletion& fit, const SparseObservations& obs,
                         const Eigen::MatrixXd& truth) {
  if (truth.rows() != obs.rows || truth.cols() != obs.cols) {
    throw DimensionError("evaluate_completion: truth shape mismatch");
  }
  std::vector<char> observed(static_cast<size_t>(obs.rows) * obs.cols, 0);
  for (size_t k = 0; k < obs.size(); ++k) {
    observed[static_cast<size_t>(obs.row[k]) * obs.cols + obs.col[k]] = 1;
  }
  const Eigen::MatrixXd approx = fit.reconstruct();
  double sq = 0.0, hold_max = 0.0, full_max = 0.0;
  long holdout = 0;
  for (int t = 0; t < obs.rows; ++t) {
    for (int i = 0; i < obs.cols; ++i) {
      const bool seen = observed[static_cast<size_t>(t) * obs.cols + i];
      // The filled matrix keeps exact values on the support.
      const double resid = seen ? 0.0 : truth(t, i) - approx(t, i);
      full_max = std::max(full_max, std::abs(resid));
      if (!seen) {
        sq += resid * resid;
        hold_max = std::max(hold_max, std::abs(resid));
        ++holdout;
      }
    }
  }
  fit.holdout_rmse = holdout ? std::sqrt(sq / static_cast<double>(holdout)) : 0.0;
  fit.holdout_max_abs = hold_max;
  fit.full_max_abs = full_max;
}

double CompletedEmbeddings::mean_max_abs_residual(bool* used_ground_truth) const {
  bool all_truth = true;
  for (const auto& per_client : fits) {
    for (const auto& fit : per_client) {
      if (!fit.full_max_abs.has_value()) all_truth = false;
    }
  }
  double sum = 0.0;
  for (const auto& per_client : fits) {
    double client_max = 0.0;
    for (const auto& fit : per_client) {
      client_max = std::max(client_max, all_truth ? *fit.full_max_abs
                                                  : fit.observed_max_abs);
    }
    sum += client_max;
  }
  if (used_ground_truth) *used_ground_truth = all_truth;
  return fits.empty() ? 0.0 : sum / static_cast<double>(fits.size());
}

CompletedEmbeddings complete_trace(const EmbeddingTrace& trace,
                                   const CompletionConfig& cfg) {
  if (trace.rounds < 1) {
    throw ConfigError("complete_trace: trace has no training rounds");
  }
  CompletedEmbeddings out;
  out.fits.resize(trace.num_clients);
  out.filled.resize(trace.num_clients);

  for (int m = 0; m < trace.num_clients; ++m) {
    CompletionConfig channel_cfg = cfg;
    if (cfg.rank == 0) {
      const int d_m = trace.client_dims.empty() ? trace.num_samples
                                                : trace.client_dims[m];
      channel_cfg.rank =
          std::clamp(rank_bound(d_m, 1.0, trace.rounds, 0.1), 1,
                     std::min({trace.rounds, trace.num_samples, 50}));
    }
    for (int c = 0; c < trace.n_channels; ++c) {
      SparseObservations obs;
      obs.rows = trace.rounds;
      obs.cols = trace.num_samples;
      for (const auto& trip : trace.observations(m, c)) {
        obs.row.push_back(trip.t_row);
        obs.col.push_back(trip.sample);
        obs.value.push_back(trip.value);
      }
      // Same init stream across clients: identical observation sets then
      // complete identically, which keeps valuation symmetry intact.
      channel_cfg.seed = derive_seed(cfg.seed, static_cast<uint64_t>(c));
      ChannelCompletion fit = complete_matrix(obs, channel_cfg);
      out.filled[m].push_back(fit.filled(obs));
      out.fits[m].push_back(std::move(fit));
    }
  }
  return out;
}

int approx_epsilon_rank(const Eigen::MatrixXd& matrix, double eps) {
  if (eps <= 0.0 || eps >= 1.0) {
    throw std::invalid_argument("approx_epsilon_rank: eps must be in (0,1)");
  }
  if (matrix.size() == 0) return 0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix);
  const Eigen::VectorXd& sigma = svd.singularValues();
  if (sigma.size() == 0 || sigma(0) <= 0.0) return 0;
  const double cutoff = eps * sigma(0);
  int r = 0;
  for (Eigen::Index k = 0; k < sigma.size(); ++k) {
    if (sigma(k) >= cutoff) ++r;
  }
  return r;
}

int rank_bound(int d_m, double L, int T, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("rank_bound: eps must be positive");
  if (T < 1) throw std::invalid_argument("rank_bound: T must be >= 1");
  const double drift = std::ceil(L * std::log(static_cast<double>(T)) / eps);
  return static_cast<int>(std::min(static_cast<double>(d_m), drift));
}

}  // namespace verfed
