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

#include "effmp/losses.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "effmp/errors.hpp"

namespace effmp
{

namespace
{

void check_prediction_shapes(const std::vector<Tensor> & pred_modes, const Mat & gt)
{
  if (pred_modes.empty()) {
    throw ShapeError("at least one prediction mode is required");
  }
  for (const auto & p : pred_modes) {
    if (p.rank() != 2 || p.shape()[1] != 2) {
      throw ShapeError("prediction modes must have shape [n, 2]");
    }
    if (p.shape()[0] != gt.rows()) {
      throw ShapeError("prediction length " + std::to_string(p.shape()[0]) +
                       " != ground-truth length " + std::to_string(gt.rows()));
    }
  }
  if (gt.cols() != 2) {
    throw ShapeError("ground truth must have shape [n, 2]");
  }
}

void check_confidences(const std::vector<Tensor> & pred_modes, const Tensor & confidences)
{
  if (confidences.rank() != 1 ||
      confidences.shape()[0] != static_cast<Eigen::Index>(pred_modes.size())) {
    throw ShapeError("confidences must be a [k] vector matching the mode count");
  }
  const double total = confidences.value().sum();
  if (std::abs(total - 1.0) > 1e-6) {
    throw ValidationError("confidences must sum to 1 (got " + std::to_string(total) + ")");
  }
}

}  // namespace

Tensor nll(const std::vector<Tensor> & pred_modes, const Tensor & confidences, const Mat & gt)
{
  check_prediction_shapes(pred_modes, gt);
  check_confidences(pred_modes, confidences);
  const Tensor gt_t = Tensor::from_matrix(gt);
  std::vector<Tensor> exponents;
  exponents.reserve(pred_modes.size());
  const Tensor log_c = log(confidences);
  for (std::size_t j = 0; j < pred_modes.size(); ++j) {
    const Tensor diff = sub(pred_modes[j], gt_t);
    const Tensor sq_err = sum(mul(diff, diff));
    exponents.push_back(add(slice(log_c, 0, static_cast<Eigen::Index>(j), 1),
                            scale(sq_err, -0.5)));
  }
  return neg(logsumexp(concat(exponents, 0), 0));
}

Tensor ade_loss(const Tensor & pred, const Mat & gt)
{
  check_prediction_shapes({pred}, gt);
  const Tensor diff = sub(pred, Tensor::from_matrix(gt));
  const Tensor per_step = sqrt(sum(mul(diff, diff), 1));
  return mean(per_step);
}

Tensor fde_loss(const Tensor & pred, const Mat & gt)
{
  check_prediction_shapes({pred}, gt);
  const Eigen::Index n = gt.rows();
  const Tensor diff = sub(slice(pred, 0, n - 1, 1), Tensor::from_matrix(Mat(gt.row(n - 1))));
  return sqrt(sum(mul(diff, diff)));
}

TotalLossParts total_loss(
  const std::vector<Tensor> & pred_modes, const Tensor & confidences, const Mat & gt,
  const LossWeights & w)
{
  check_prediction_shapes(pred_modes, gt);
  check_confidences(pred_modes, confidences);
  if (w.alpha < 0.0 || w.beta < 0.0 || w.gamma < 0.0) {
    throw ValidationError("loss weights must be >= 0");
  }
  TotalLossParts parts;
  parts.nll_term = nll(pred_modes, confidences, gt);

  // Winner-take-all: the displacement regularizers touch only the mode whose
  // final point lands closest.
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < pred_modes.size(); ++j) {
    const Mat & p = pred_modes[j].value();
    const Eigen::Index last = p.rows() - 1;
    const double dx = p(last, 0) - gt(last, 0);
    const double dy = p(last, 1) - gt(last, 1);
    const double d = std::hypot(dx, dy);
    if (d < best) {
      best = d;
      parts.best_mode = static_cast<int>(j);
    }
  }
  const Tensor & winner = pred_modes[static_cast<std::size_t>(parts.best_mode)];
  parts.ade_term = ade_loss(winner, gt);
  parts.fde_term = fde_loss(winner, gt);
  parts.total = add(add(scale(parts.nll_term, w.alpha), scale(parts.ade_term, w.beta)),
                    scale(parts.fde_term, w.gamma));
  return parts;
}

double ade(const std::vector<Point2> & pred, const std::vector<Point2> & gt)
{
  if (pred.size() != gt.size() || pred.empty()) {
    throw ShapeError("ade requires equal nonzero lengths");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    total += distance(pred[i], gt[i]);
  }
  return total / static_cast<double>(pred.size());
}

double fde(const std::vector<Point2> & pred, const std::vector<Point2> & gt)
{
  if (pred.size() != gt.size() || pred.empty()) {
    throw ShapeError("fde requires equal nonzero lengths");
  }
  return distance(pred.back(), gt.back());
}

std::pair<double, int> min_ade_k(
  const std::vector<std::vector<Point2>> & preds, const std::vector<Point2> & gt)
{
  if (preds.empty()) {
    throw ShapeError("min_ade_k requires at least one mode");
  }
  double best = std::numeric_limits<double>::infinity();
  int arg = 0;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    const double v = ade(preds[j], gt);
    if (v < best) {
      best = v;
      arg = static_cast<int>(j);
    }
  }
  return {best, arg};
}

std::pair<double, int> min_fde_k(
  const std::vector<std::vector<Point2>> & preds, const std::vector<Point2> & gt)
{
  if (preds.empty()) {
    throw ShapeError("min_fde_k requires at least one mode");
  }
  double best = std::numeric_limits<double>::infinity();
  int arg = 0;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    const double v = fde(preds[j], gt);
    if (v < best) {
      best = v;
      arg = static_cast<int>(j);
    }
  }
  return {best, arg};
}

SceneMetrics score_prediction(const PredictionSet & pred, const std::vector<Point2> & gt)
{
  pred.validate();
  std::size_t top = 0;
  for (std::size_t j = 1; j < pred.confidences.size(); ++j) {
    if (pred.confidences[j] > pred.confidences[top]) {
      top = j;
    }
  }
  SceneMetrics out;
  out.ade = ade(pred.trajectories[top], gt);
  out.fde = fde(pred.trajectories[top], gt);
  out.min_ade = min_ade_k(pred.trajectories, gt).first;
  out.min_fde = min_fde_k(pred.trajectories, gt).first;
  return out;
}

std::string MetricReport::eval_line() const
{
  char buf[256];
  std::snprintf(buf, sizeof(buf), "EVAL scenes=%d ade=%.6f fde=%.6f minade%d=%.6f minfde%d=%.6f",
                scenes, ade, fde, k, min_ade, k, min_fde);
  return buf;
}

MetricReport aggregate_metrics(const std::vector<SceneMetrics> & per_scene, int k)
{
  if (per_scene.empty()) {
    throw ValidationError("no scenes to aggregate");
  }
  MetricReport report;
  report.k = k;
  report.scenes = static_cast<int>(per_scene.size());
  for (const auto & s : per_scene) {
    report.ade += s.ade;
    report.fde += s.fde;
    report.min_ade += s.min_ade;
    report.min_fde += s.min_fde;
  }
  const double count = static_cast<double>(per_scene.size());
  report.ade /= count;
  report.fde /= count;
  report.min_ade /= count;
  report.min_fde /= count;
  return report;
}

}  // namespace effmp
