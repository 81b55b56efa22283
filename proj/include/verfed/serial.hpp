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

// Single-threaded reference implementations of the parallel kernels. Kept
// deliberately naive: tests compare them against the production paths and
// the benchmark target measures the gap.

#include <Eigen/Core>
#include <vector>

#include "verfed/completion.hpp"
#include "verfed/model.hpp"
#include "verfed/shapley.hpp"

namespace verfed::serial {

// Plain loop version of verfed::embed_rows.
Eigen::MatrixXd embed_rows(const LocalModel& model,
                           Eigen::Ref<const Eigen::MatrixXd> X);

// Linear-accumulation mean loss over summed scores.
double mean_loss(const Eigen::MatrixXd& mixed, const std::vector<int>& labels);

// Per-round utility for every coalition mask, each one rebuilt from scratch
// (no Gray-code reuse). utable[mask] = U_t(mask).
std::vector<double> utility_table(const UtilityEvaluator& eval, int t);

// Alternating ridge least-squares without OpenMP; same math as
// verfed::complete_matrix.
ChannelCompletion complete_matrix(const SparseObservations& obs,
                                  const CompletionConfig& cfg);

}  // namespace verfed::serial
