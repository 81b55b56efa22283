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

#include "verfed/sync.hpp"

#include <cmath>

namespace verfed {

std::vector<EmbeddingTrace::Triplet> EmbeddingTrace::observations(
    int client, int channel) const {
  std::vector<Triplet> out;
  for (int t = 0; t < rounds; ++t) {
    const auto& batch = batches[t];
    const Eigen::MatrixXd& H = observed[client][t];
    for (size_t j = 0; j < batch.size(); ++j) {
      out.push_back({t, batch[j], H(static_cast<Eigen::Index>(j), channel)});
    }
  }
  return out;
}

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed_mask(
    const EmbeddingTrace& trace, int client) {
  if (client < 0 || client >= trace.num_clients) {
    throw std::out_of_range("observed_mask: bad client id");
  }
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask(trace.rounds,
                                                          trace.num_samples);
  mask.setConstant(false);
  for (int t = 0; t < trace.rounds; ++t) {
    for (int i : trace.batches[t]) mask(t, i) = true;
  }
  return mask;
}

double full_dataset_loss(const std::vector<LocalModel>& models,
                         const VerticalDataset& data) {
  const Eigen::Index n = data.num_samples();
  const int C = models.front().channels();
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n, C);
  for (size_t m = 0; m < models.size(); ++m) {
    scores += embed_rows(models[m], data.clients[m].features);
  }
  std::vector<double> losses(static_cast<size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd h = scores.row(i).transpose();
    losses[static_cast<size_t>(i)] = loss_raw(h.data(), C, data.labels[i]);
  }
  return pairwise_mean(losses);
}

SyncRunResult run_fedsgd(const VerticalDataset& data, const SyncConfig& cfg) {
  const int M = data.num_clients();
  const Eigen::Index n = data.num_samples();
  if (M == 0 || n == 0) throw DimensionError("run_fedsgd: empty dataset");
  if (cfg.rounds < 0) throw ConfigError("run_fedsgd: rounds must be >= 0");
  const int tau = cfg.batch_size == 0 ? static_cast<int>(n) : cfg.batch_size;
  if (tau < 1 || tau > n) {
    throw ConfigError("run_fedsgd: batch_size must be in [1, N]");
  }
  int C = data.n_classes;
  if (cfg.channels_override == 1) {
    if (data.n_classes != 2) {
      throw ConfigError("run_fedsgd: scalar margin mode needs 2-class data");
    }
    C = 1;
  } else if (data.n_classes < 2) {
    throw ConfigError("run_fedsgd: dataset must have at least 2 classes");
  }

  SyncRunResult res;
  res.models.reserve(M);
  for (int m = 0; m < M; ++m) {
    res.models.push_back(LocalModel::zeros(C, data.clients[m].dim()));
  }

  EmbeddingTrace& trace = res.trace;
  trace.num_clients = M;
  trace.num_samples = static_cast<int>(n);
  trace.n_channels = C;
  trace.rounds = cfg.rounds;
  trace.client_dims.resize(M);
  for (int m = 0; m < M; ++m) {
    trace.client_dims[m] = static_cast<int>(data.clients[m].dim());
  }
  trace.batches.resize(cfg.rounds);
  trace.observed.assign(M, {});
  trace.model_norms.assign(M, {});
  trace.initial.reserve(M);
  for (int m = 0; m < M; ++m) {
    trace.initial.push_back(embed_rows(res.models[m], data.clients[m].features));
    trace.observed[m].resize(cfg.rounds);
    trace.model_norms[m].resize(cfg.rounds);
  }
  if (cfg.record_dense_rows) {
    trace.dense_rows.assign(M, std::vector<Eigen::MatrixXd>(cfg.rounds));
  }

  Rng rng(cfg.seed);
  std::vector<double> losses(static_cast<size_t>(tau));

  for (int t = 1; t <= cfg.rounds; ++t) {
    // Step 1: server picks the shared mini-batch.
    std::vector<int> batch = rng.sample_without_replacement(static_cast<int>(n), tau);
    trace.batches[t - 1] = batch;

    // Step 2: clients embed the batch with their current models and upload.
    Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(tau, C);
    std::vector<Eigen::MatrixXd> batch_features(M);
    for (int m = 0; m < M; ++m) {
      Eigen::MatrixXd Xb(tau, data.clients[m].dim());
      for (int j = 0; j < tau; ++j) {
        Xb.row(j) = data.clients[m].features.row(batch[j]);
      }
      Eigen::MatrixXd H = embed_rows(res.models[m], Xb);
      mixed += H;
      trace.observed[m][t - 1] = std::move(H);
      batch_features[m] = std::move(Xb);
      if (cfg.record_dense_rows) {
        trace.dense_rows[m][t - 1] =
            embed_rows(res.models[m], data.clients[m].features);
      }
    }

    // Step 3: server-side loss gradients for the batch.
    Eigen::MatrixXd grads(tau, C);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < tau; ++j) {
      const Eigen::VectorXd h = mixed.row(j).transpose();
      grads.row(j) = grad_h(h, data.labels[batch[j]]).transpose();
      losses[static_cast<size_t>(j)] = loss_raw(h.data(), C, data.labels[batch[j]]);
    }
    const double batch_loss = pairwise_mean(losses);
    if (!std::isfinite(batch_loss)) {
      throw DivergenceError("run_fedsgd: non-finite loss at round " + std::to_string(t));
    }
    res.batch_loss.push_back(batch_loss);

    // Step 4: local updates.
    const double eta = cfg.schedule == LrSchedule::kOneOverT
                           ? cfg.learning_rate / static_cast<double>(t)
                           : cfg.learning_rate;
    for (int m = 0; m < M; ++m) {
      Eigen::MatrixXd& theta = res.models[m].theta;
      theta.noalias() -= (eta / tau) * (grads.transpose() * batch_features[m]);
      if (cfg.l2 > 0.0) theta -= (eta * cfg.l2) * theta;
      trace.model_norms[m][t - 1] = theta.norm();
    }

    if (cfg.full_eval_every > 0 &&
        (t % cfg.full_eval_every == 0 || t == cfg.rounds)) {
      res.full_loss.emplace_back(t, full_dataset_loss(res.models, data));
    }
  }
  return res;
}

}  // namespace verfed
