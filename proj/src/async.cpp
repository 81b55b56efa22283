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

#include "verfed/async.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace verfed {

ServerState ServerState::zeros(int clients, Eigen::Index n, int channels) {
  ServerState s;
  s.latest.reserve(clients);
  for (int m = 0; m < clients; ++m) {
    s.latest.push_back(Eigen::MatrixXd::Zero(n, channels));
  }
  return s;
}

namespace {

double server_mean_loss(const ServerState& state, const std::vector<int>& labels,
                        int n_channels) {
  const Eigen::Index n = state.latest.front().rows();
  Eigen::MatrixXd mixed = state.latest.front();
  for (size_t m = 1; m < state.latest.size(); ++m) mixed += state.latest[m];
  std::vector<double> losses(static_cast<size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd h = mixed.row(i).transpose();
    losses[static_cast<size_t>(i)] = loss_raw(h.data(), n_channels, labels[i]);
  }
  return pairwise_mean(losses);
}

}  // namespace

AsyncRunResult run_vafl(const VerticalDataset& data, const AsyncConfig& cfg) {
  const int M = data.num_clients();
  const Eigen::Index n = data.num_samples();
  if (M == 0 || n == 0) throw DimensionError("run_vafl: empty dataset");
  if (static_cast<int>(cfg.profiles.size()) != M) {
    throw ConfigError("run_vafl: one profile per client required");
  }
  if (cfg.valuation_interval <= 0.0 || cfg.total_time <= 0.0) {
    throw ConfigError("run_vafl: times must be positive");
  }
  const double ratio = cfg.total_time / cfg.valuation_interval;
  const int T = static_cast<int>(std::lround(ratio));
  if (T < 1 || std::abs(ratio - T) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("run_vafl: valuation_interval must divide total_time");
  }
  for (const auto& p : cfg.profiles) {
    if (p.period <= 0.0) throw ConfigError("run_vafl: period must be positive");
    if (p.tau < 1 || p.tau > n) throw ConfigError("run_vafl: tau must be in [1, N]");
  }
  int C = data.n_classes;
  if (cfg.channels_override == 1) {
    if (data.n_classes != 2) {
      throw ConfigError("run_vafl: scalar margin mode needs 2-class data");
    }
    C = 1;
  } else if (data.n_classes < 2) {
    throw ConfigError("run_vafl: dataset must have at least 2 classes");
  }

  AsyncRunResult res;
  res.valuation_points = T;
  res.models.reserve(M);
  std::vector<Rng> rngs;
  rngs.reserve(M);
  for (int m = 0; m < M; ++m) {
    res.models.push_back(LocalModel::zeros(C, data.clients[m].dim()));
    rngs.emplace_back(cfg.profiles[m].seed);
  }

  ServerState server = ServerState::zeros(M, n, C);
  if (cfg.record_snapshots) res.snapshots.push_back(server.latest);
  res.snapshot_loss.push_back(server_mean_loss(server, data.labels, C));

  // Event times are computed as seq * period (not accumulated) so repeated
  // pushes never drift. Client events at a tied timestamp precede the
  // snapshot and are ordered by client id.
  struct Pending {
    double time;
    int kind;  // 0 = client cycle, 1 = snapshot
    int client_id;
    long seq;
    bool operator>(const Pending& o) const {
      if (time != o.time) return time > o.time;
      if (kind != o.kind) return kind > o.kind;
      if (client_id != o.client_id) return client_id > o.client_id;
      return seq > o.seq;
    }
  };
  std::priority_queue<Pending, std::vector<Pending>, std::greater<Pending>> queue;
  for (int m = 0; m < M; ++m) {
    const double t0 = cfg.profiles[m].period;
    if (t0 <= cfg.total_time) queue.push({t0, 0, m, 1});
  }
  for (int k = 1; k <= T; ++k) {
    queue.push({static_cast<double>(k) * cfg.valuation_interval, 1, -1, k});
  }

  while (!queue.empty()) {
    const Pending ev = queue.top();
    queue.pop();

    if (ev.kind == 1) {
      if (cfg.record_snapshots) res.snapshots.push_back(server.latest);
      const double loss = server_mean_loss(server, data.labels, C);
      if (!std::isfinite(loss)) {
        throw DivergenceError("run_vafl: non-finite loss at simulated time " +
                              std::to_string(ev.time));
      }
      res.snapshot_loss.push_back(loss);
      continue;
    }

    const ClientProfile& prof = cfg.profiles[ev.client_id];
    AsyncEvent log;
    log.time = ev.time;
    log.client_id = ev.client_id;
    log.seq = ev.seq;

    Rng& rng = rngs[ev.client_id];
    bool participate = true;
    if (prof.participation_prob < 1.0) {
      participate = rng.uniform01() < prof.participation_prob;
    }
    log.participated = participate;

    if (participate) {
      const int tau = prof.tau;
      std::vector<int> batch =
          rng.sample_without_replacement(static_cast<int>(n), tau);
      log.batch = batch;

      Eigen::MatrixXd Xb(tau, data.clients[ev.client_id].dim());
      for (int j = 0; j < tau; ++j) {
        Xb.row(j) = data.clients[ev.client_id].features.row(batch[j]);
      }

      // update: push fresh embeddings for the batch.
      const Eigen::MatrixXd H = embed_rows(res.models[ev.client_id], Xb);
      for (int j = 0; j < tau; ++j) {
        server.latest[ev.client_id].row(batch[j]) = H.row(j);
      }

      // query: partial gradients against the server's current mixed state.
      Eigen::MatrixXd grads(tau, C);
      for (int j = 0; j < tau; ++j) {
        Eigen::VectorXd h = Eigen::VectorXd::Zero(C);
        for (int m = 0; m < M; ++m) {
          h += server.latest[m].row(batch[j]).transpose();
        }
        grads.row(j) = grad_h(h, data.labels[batch[j]]).transpose();
      }

      Eigen::MatrixXd& theta = res.models[ev.client_id].theta;
      theta.noalias() -= (prof.learning_rate / tau) * (grads.transpose() * Xb);
      if (cfg.l2 > 0.0) theta -= (prof.learning_rate * cfg.l2) * theta;
    }
    res.events.push_back(std::move(log));

    const double next = static_cast<double>(ev.seq + 1) * prof.period;
    if (next <= cfg.total_time) queue.push({next, 0, ev.client_id, ev.seq + 1});
  }
  return res;
}

std::vector<int> snapshot_delta(const std::vector<Eigen::MatrixXd>& prev,
                                const std::vector<Eigen::MatrixXd>& curr,
                                int client) {
  if (client < 0 || client >= static_cast<int>(prev.size()) ||
      prev.size() != curr.size()) {
    throw std::out_of_range("snapshot_delta: bad client id or mismatched snapshots");
  }
  const Eigen::MatrixXd& a = prev[client];
  const Eigen::MatrixXd& b = curr[client];
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("snapshot_delta: snapshot shapes differ");
  }
  std::vector<int> changed;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if ((a.row(i).array() != b.row(i).array()).any()) {
      changed.push_back(static_cast<int>(i));
    }
  }
  return changed;
}

}  // namespace verfed
