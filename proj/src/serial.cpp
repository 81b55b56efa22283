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

#include "verfed/serial.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace verfed::serial {

Eigen::MatrixXd embed_rows(const LocalModel& model,
                           Eigen::Ref<const Eigen::MatrixXd> X) {
  const Eigen::Index n = X.rows();
  const int C = model.channels();
  Eigen::MatrixXd out(n, C);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < X.cols(); ++j) {
        s += model.theta(c, j) * X(i, j);
      }
      out(i, c) = s;
    }
  }
  return out;
}

double mean_loss(const Eigen::MatrixXd& mixed, const std::vector<int>& labels) {
  const Eigen::Index n = mixed.rows();
  const int C = static_cast<int>(mixed.cols());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    sum += loss_strided(mixed.data() + i, mixed.outerStride(), C, labels[i]);
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::vector<double> utility_table(const UtilityEvaluator& eval, int t) {
  const int M = eval.clients();
  const CoalitionMask n_masks = CoalitionMask{1} << M;
  std::vector<double> utable(n_masks);
  for (CoalitionMask mask = 0; mask < n_masks; ++mask) {
    utable[mask] = eval.utility(t, mask);
  }
  return utable;
}

ChannelCompletion complete_matrix(const SparseObservations& obs,
                                  const CompletionConfig& cfg) {
  if (cfg.rank < 1) throw ConfigError("serial::complete_matrix: rank must be >= 1");

  std::vector<std::vector<std::pair<int, double>>> by_row(obs.rows), by_col(obs.cols);
  for (size_t k = 0; k < obs.size(); ++k) {
    by_row[obs.row[k]].emplace_back(obs.col[k], obs.value[k]);
    by_col[obs.col[k]].emplace_back(obs.row[k], obs.value[k]);
  }

  ChannelCompletion fit;
  for (int t = 0; t < obs.rows; ++t) {
    if (by_row[t].empty()) fit.empty_rows.push_back(t);
  }
  for (int i = 0; i < obs.cols; ++i) {
    if (by_col[i].empty()) fit.empty_cols.push_back(i);
  }
  if (cfg.lambda == 0.0 && (!fit.empty_rows.empty() || !fit.empty_cols.empty())) {
    throw ConfigError("serial::complete_matrix: singular system at lambda = 0");
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

  auto solve_side = [&](const std::vector<std::vector<std::pair<int, double>>>& groups,
                        const Eigen::MatrixXd& fixed, Eigen::MatrixXd& target) {
    for (Eigen::Index idx = 0; idx < target.rows(); ++idx) {
      const auto& entries = groups[static_cast<size_t>(idx)];
      if (entries.empty()) {
        target.row(idx).setZero();
        continue;
      }
      Eigen::MatrixXd gram = cfg.lambda * Eigen::MatrixXd::Identity(r, r);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(r);
      for (const auto& [other, v] : entries) {
        const auto f = fixed.row(other);
        gram.noalias() += f.transpose() * f;
        rhs.noalias() += v * f.transpose();
      }
      target.row(idx) = gram.ldlt().solve(rhs).transpose();
    }
  };

  auto objective = [&]() {
    double s = 0.0;
    for (size_t k = 0; k < obs.size(); ++k) {
      const double resid =
          obs.value[k] - fit.W.row(obs.row[k]).dot(fit.H.row(obs.col[k]));
      s += resid * resid;
    }
    return s + cfg.lambda * (fit.W.squaredNorm() + fit.H.squaredNorm());
  };

  double prev = objective();
  fit.objective.push_back(prev);
  for (int it = 0; it < cfg.max_iters; ++it) {
    solve_side(by_row, fit.H, fit.W);
    solve_side(by_col, fit.W, fit.H);
    const double cur = objective();
    fit.objective.push_back(cur);
    fit.iterations = it + 1;
    if (prev - cur <= cfg.tol * std::max(std::abs(prev), 1e-300)) {
      prev = cur;
      break;
    }
    prev = cur;
  }

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

}  // namespace verfed::serial
