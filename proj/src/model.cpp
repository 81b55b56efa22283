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

#include "verfed/model.hpp"

#include <cmath>

namespace verfed {

namespace {

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Embedding embed(const LocalModel& model, Eigen::Ref<const Eigen::VectorXd> x) {
  if (x.size() != model.theta.cols()) {
    throw DimensionError("embed: feature length " + std::to_string(x.size()) +
                         " does not match model dimension " +
                         std::to_string(model.theta.cols()));
  }
  return model.theta * x;
}

Eigen::MatrixXd embed_rows(const LocalModel& model,
                           Eigen::Ref<const Eigen::MatrixXd> X) {
  if (X.cols() != model.theta.cols()) {
    throw DimensionError("embed_rows: feature dim " + std::to_string(X.cols()) +
                         " does not match model dimension " +
                         std::to_string(model.theta.cols()));
  }
  const Eigen::Index n = X.rows();
  const int C = model.channels();
  Eigen::MatrixXd out(n, C);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    out.row(i).noalias() = X.row(i) * model.theta.transpose();
  }
  return out;
}

double loss_strided(const double* h, std::ptrdiff_t stride, int n_channels, int y) {
  if (y < 0 || (n_channels == 1 ? y > 1 : y >= n_channels)) {
    throw std::out_of_range("loss: label " + std::to_string(y) +
                            " out of range for " + std::to_string(n_channels) +
                            " channels");
  }
  if (n_channels == 1) {
    const double sign = y == 1 ? 1.0 : -1.0;
    return softplus(-sign * h[0]);
  }
  double hmax = h[0];
  for (int c = 1; c < n_channels; ++c) hmax = std::max(hmax, h[c * stride]);
  double sum = 0.0;
  for (int c = 0; c < n_channels; ++c) sum += std::exp(h[c * stride] - hmax);
  return hmax + std::log(sum) - h[y * stride];
}

double loss_raw(const double* h, int n_channels, int y) {
  return loss_strided(h, 1, n_channels, y);
}

double loss_value(const Eigen::VectorXd& h, int y) {
  return loss_raw(h.data(), static_cast<int>(h.size()), y);
}

Eigen::VectorXd grad_h(const Eigen::VectorXd& h, int y) {
  const int C = static_cast<int>(h.size());
  if (y < 0 || (C == 1 ? y > 1 : y >= C)) {
    throw std::out_of_range("grad_h: label out of range");
  }
  Eigen::VectorXd g(C);
  if (C == 1) {
    g(0) = sigmoid(h(0)) - static_cast<double>(y);
    return g;
  }
  const double hmax = h.maxCoeff();
  double sum = 0.0;
  for (int c = 0; c < C; ++c) {
    g(c) = std::exp(h(c) - hmax);
    sum += g(c);
  }
  g /= sum;
  g(y) -= 1.0;
  return g;
}

double lipschitz_G(int n_channels) {
  return n_channels == 1 ? 1.0 : std::sqrt(2.0);
}

double accuracy(const std::vector<LocalModel>& models, const VerticalDataset& data) {
  const int M = data.num_clients();
  if (static_cast<int>(models.size()) != M) {
    throw DimensionError("accuracy: model count does not match client count");
  }
  const Eigen::Index n = data.num_samples();
  if (n == 0) return 0.0;
  const int C = models.front().channels();

  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n, C);
  for (int m = 0; m < M; ++m) {
    scores += embed_rows(models[m], data.clients[m].features);
  }

  long correct = 0;
#pragma omp parallel for schedule(static) reduction(+ : correct)
  for (Eigen::Index i = 0; i < n; ++i) {
    int pred = 0;
    if (C == 1) {
      pred = scores(i, 0) > 0.0 ? 1 : 0;
    } else {
      double best = scores(i, 0);
      for (int c = 1; c < C; ++c) {
        if (scores(i, c) > best) {
          best = scores(i, c);
          pred = c;
        }
      }
    }
    if (pred == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace verfed
