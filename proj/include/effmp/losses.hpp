// Copyright 2026 The effmp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "effmp/geometry.hpp"
#include "effmp/model.hpp"
#include "effmp/tensor.hpp"

namespace effmp
{

struct LossWeights
{
  double alpha = 0.75;  // NLL
  double beta = 1.0;    // ADE
  double gamma = 0.5;   // FDE
};

// Differentiable path. Predictions are k tensors of shape [n, 2]; confidences
// is a [k] probability vector (softmax output upstream).

/// Negative log-likelihood of the ground truth under a mixture of
/// unit-covariance Gaussians: -log sum_k exp(log c_k - 0.5 * sq_err_k),
/// computed through logsumexp for stability.
Tensor nll(const std::vector<Tensor> & pred_modes, const Tensor & confidences, const Mat & gt);

/// Mean per-step Euclidean distance.
Tensor ade_loss(const Tensor & pred, const Mat & gt);

/// Euclidean distance between final points.
Tensor fde_loss(const Tensor & pred, const Mat & gt);

struct TotalLossParts
{
  Tensor total;
  Tensor nll_term;
  Tensor ade_term;  // of the best mode
  Tensor fde_term;
  int best_mode = 0;  // argmin FDE (winner-take-all)
};

/// alpha*NLL + beta*ADE + gamma*FDE, with the displacement regularizers
/// applied to the FDE-best mode only.
TotalLossParts total_loss(
  const std::vector<Tensor> & pred_modes, const Tensor & confidences, const Mat & gt,
  const LossWeights & w);

// Plain metric path over point sequences (used by evaluation and oracles).
double ade(const std::vector<Point2> & pred, const std::vector<Point2> & gt);
double fde(const std::vector<Point2> & pred, const std::vector<Point2> & gt);

/// Minimum metric over modes, with the argmin index. min_fde_k selects by
/// final-point distance, min_ade_k by average distance.
std::pair<double, int> min_ade_k(
  const std::vector<std::vector<Point2>> & preds, const std::vector<Point2> & gt);
std::pair<double, int> min_fde_k(
  const std::vector<std::vector<Point2>> & preds, const std::vector<Point2> & gt);

struct SceneMetrics
{
  double ade = 0.0;  // of the top-confidence mode
  double fde = 0.0;
  double min_ade = 0.0;
  double min_fde = 0.0;
};

SceneMetrics score_prediction(const PredictionSet & pred, const std::vector<Point2> & gt);

struct MetricReport
{
  double ade = 0.0;
  double fde = 0.0;
  double min_ade = 0.0;
  double min_fde = 0.0;
  int k = 0;
  int scenes = 0;

  std::string eval_line() const;  // EVAL scenes=... ade=... fde=... minade<k>=... minfde<k>=...
};

MetricReport aggregate_metrics(const std::vector<SceneMetrics> & per_scene, int k);

}  // namespace effmp
