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
#include <functional>
#include <vector>

#include "verfed/data.hpp"

namespace verfed {

// Linear per-client model. One row of parameters per class channel; with a
// single channel this is the plain scalar-score case.
struct LocalModel {
  Eigen::MatrixXd theta;  // C x d_m

  int channels() const { return static_cast<int>(theta.rows()); }
  static LocalModel zeros(int n_channels, Eigen::Index d_m) {
    return LocalModel{Eigen::MatrixXd::Zero(n_channels, d_m)};
  }
};

// Per-sample score vector, one entry per class channel.
using Embedding = Eigen::VectorXd;

// Custom per-sample loss hook: f(h, y) with h of length C.
using LossFn = std::function<double(const Eigen::VectorXd& h, int y)>;

Embedding embed(const LocalModel& model, Eigen::Ref<const Eigen::VectorXd> x);

// Embeds every row of X. Rows are independent; this is one of the parallel
// kernels (see serial.hpp for the reference loop).
Eigen::MatrixXd embed_rows(const LocalModel& model,
                           Eigen::Ref<const Eigen::MatrixXd> X);

// Loss on a summed score vector. C >= 2: multinomial logistic
// logsumexp(h) - h_y, max-stabilized. C == 1: binary margin loss
// log(1 + exp(-sign(y) h)) with sign(y) = 2y - 1.
double loss_value(const Eigen::VectorXd& h, int y);

// Same, over a raw channel pointer (hot path).
double loss_raw(const double* h, int n_channels, int y);

// Strided variant: channel c lives at h[c * stride]. Lets callers evaluate
// one row of a column-major score matrix without copying it out.
double loss_strided(const double* h, std::ptrdiff_t stride, int n_channels, int y);

// Gradient of loss_value with respect to h. C >= 2: softmax(h) - onehot(y)
// (entries sum to 0). C == 1: sigmoid(h) - y.
Eigen::VectorXd grad_h(const Eigen::VectorXd& h, int y);

// Global bound on ||grad_h||: sqrt(2) for the multinomial loss, 1 for the
// single-channel margin loss.
double lipschitz_G(int n_channels);

// Fraction of samples whose summed score vector argmax matches the label.
// Ties break toward the smallest class index; a single channel predicts
// class 1 iff the score is strictly positive.
double accuracy(const std::vector<LocalModel>& models, const VerticalDataset& data);

}  // namespace verfed
