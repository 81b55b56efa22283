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

// Test-only oracles, kept independent of the library paths they check:
// brute-force Shapley enumeration with no memoization, centralized gradient
// descent, finite differences, and random instance builders.

#include <cmath>
#include <vector>

#include "verfed/model.hpp"
#include "verfed/shapley.hpp"

namespace oracles {

// Centralized full-batch gradient descent on the summed-score loss.
// Returns the loss at theta_0 (zeros), theta_1, ..., theta_iters.
inline std::vector<double> centralized_gd_losses(const Eigen::MatrixXd& X,
                                                 const std::vector<int>& y, int C,
                                                 int iters, double eta) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(C, X.cols());
  std::vector<double> losses;
  for (int it = 0; it <= iters; ++it) {
    double loss = 0.0;
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(C, X.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd h = theta * X.row(i).transpose();
      loss += verfed::loss_value(h, y[i]);
      grad.noalias() += verfed::grad_h(h, y[i]) * X.row(i);
    }
    losses.push_back(loss / static_cast<double>(n));
    theta -= (eta / static_cast<double>(n)) * grad;
  }
  return losses;
}

// Central finite differences of the loss with respect to h.
inline Eigen::VectorXd fd_grad(const Eigen::VectorXd& h, int y, double step) {
  Eigen::VectorXd g(h.size());
  for (Eigen::Index c = 0; c < h.size(); ++c) {
    Eigen::VectorXd hp = h, hm = h;
    hp(c) += step;
    hm(c) -= step;
    g(c) = (verfed::loss_value(hp, y) - verfed::loss_value(hm, y)) / (2.0 * step);
  }
  return g;
}

// Direct double-loop VerFedSV with no memoization: every coalition utility
// is recomputed from scratch through UtilityEvaluator::utility.
inline std::vector<double> naive_verfedsv(const verfed::UtilityEvaluator& eval) {
  const int M = eval.clients();
  const int T = eval.rounds();
  // Pascal-triangle binomials binom(M-1, k).
  std::vector<double> binom(M, 1.0);
  for (int k = 1; k < M; ++k) {
    binom[k] = binom[k - 1] * static_cast<double>(M - k) / static_cast<double>(k);
  }
  std::vector<double> values(M, 0.0);
  for (int m = 0; m < M; ++m) {
    double acc = 0.0;
    for (int t = 1; t <= T; ++t) {
      for (verfed::CoalitionMask S = 0; S < (verfed::CoalitionMask{1} << M); ++S) {
        if (S & (verfed::CoalitionMask{1} << m)) continue;
        const int size = std::popcount(S);
        acc += (eval.utility(t, S | (verfed::CoalitionMask{1} << m)) -
                eval.utility(t, S)) /
               binom[size];
      }
    }
    values[m] = acc / (static_cast<double>(M) * static_cast<double>(T));
  }
  return values;
}

// Random embedding histories: snapshot 0 is zero, later snapshots follow a
// per-client random walk. client_scale lets tests give clients distinct
// influence so exact values are well separated.
inline verfed::SnapshotSeries random_series(int T, int M, int N, int C,
                                            uint64_t seed,
                                            const std::vector<double>& client_scale = {}) {
  verfed::Rng rng(seed);
  verfed::SnapshotSeries series;
  series.snaps.resize(T + 1);
  series.snaps[0].assign(M, Eigen::MatrixXd::Zero(N, C));
  for (int t = 1; t <= T; ++t) {
    series.snaps[t].resize(M);
    for (int m = 0; m < M; ++m) {
      const double scale =
          client_scale.empty() ? 1.0 : client_scale[static_cast<size_t>(m)];
      Eigen::MatrixXd step(N, C);
      for (int i = 0; i < N; ++i) {
        for (int c = 0; c < C; ++c) step(i, c) = rng.gaussian(0.0, 0.3 * scale);
      }
      series.snaps[t][m] = series.snaps[t - 1][m] + step;
    }
  }
  return series;
}

inline std::vector<int> random_labels(int N, int n_classes, uint64_t seed) {
  verfed::Rng rng(seed);
  std::vector<int> labels(N);
  for (int i = 0; i < N; ++i) {
    labels[i] = static_cast<int>(rng.uniform_index(static_cast<size_t>(n_classes)));
  }
  return labels;
}

}  // namespace oracles
