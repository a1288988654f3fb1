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

// Test-only utilities: finite-difference gradient checks, brute-force metric
// oracles, and small scene builders. Everything here is independent of the
// library code paths it is used to verify.

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "effmp/map_features.hpp"
#include "effmp/rng.hpp"
#include "effmp/scene.hpp"
#include "effmp/tensor.hpp"

namespace effmp::testing
{

struct GradCheckResult
{
  bool ok = true;
  std::string detail;
  double worst_gap = 0.0;
};

/// Central finite differences against the analytic gradient of a scalar loss.
/// `make_loss` must rebuild the graph from the current leaf values. Checks
/// every coordinate when samples_per_leaf <= 0, otherwise a deterministic
/// random subset per leaf.
inline GradCheckResult gradcheck(
  std::vector<Tensor> leaves, const std::function<Tensor()> & make_loss,
  int samples_per_leaf = -1, double eps = 1e-4, double tol = 1e-4, double floor = 0.01,
  std::uint64_t seed = 0)
{
  GradCheckResult result;
  for (auto & leaf : leaves) {
    leaf.zero_grad();
  }
  const Tensor loss = make_loss();
  backward(loss);

  Rng rng(mix_seed(seed, 0x67726164));
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor & leaf = leaves[li];
    if (!leaf.requires_grad()) {
      continue;
    }
    const Mat analytic = leaf.has_grad() ? leaf.grad()
                                         : Mat(Mat::Zero(leaf.value().rows(), leaf.value().cols()));
    const Eigen::Index total = leaf.value().size();
    std::vector<Eigen::Index> picks;
    if (samples_per_leaf <= 0 || samples_per_leaf >= total) {
      for (Eigen::Index i = 0; i < total; ++i) {
        picks.push_back(i);
      }
    } else {
      for (int i = 0; i < samples_per_leaf; ++i) {
        picks.push_back(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(total))));
      }
    }
    for (const Eigen::Index flat : picks) {
      const Eigen::Index r = flat / leaf.value().cols();
      const Eigen::Index col = flat % leaf.value().cols();
      const double an = analytic(r, col);
      double fd = 0.0;
      bool coord_ok = false;
      // A difference straddling a relu kink shrinks as eps does; a real
      // gradient bug stays. Refine eps before declaring a mismatch.
      for (const double e : {eps, eps / 8.0, eps / 64.0, eps / 512.0, eps / 4096.0}) {
        Mat v = leaf.value();
        const double original = v(r, col);
        v(r, col) = original + e;
        leaf.assign_value(v);
        const double f_plus = make_loss().scalar_value();
        v(r, col) = original - e;
        leaf.assign_value(v);
        const double f_minus = make_loss().scalar_value();
        v(r, col) = original;
        leaf.assign_value(v);

        fd = (f_plus - f_minus) / (2.0 * e);
        const double gap = std::abs(fd - an);
        const double denom = std::fmax(std::fmax(std::abs(fd), std::abs(an)), floor);
        if (gap <= tol * denom) {
          result.worst_gap = std::fmax(result.worst_gap, gap / denom);
          coord_ok = true;
          break;
        }
      }
      if (!coord_ok) {
        result.ok = false;
        result.detail = "leaf " + std::to_string(li) + " coord (" + std::to_string(r) + "," +
                        std::to_string(col) + "): analytic " + std::to_string(an) + " vs fd " +
                        std::to_string(fd);
        return result;
      }
    }
  }
  return result;
}

// Brute-force metric oracles: direct double loops over points and modes,
// no shared code with the library implementations.

inline double oracle_ade(const std::vector<Point2> & pred, const std::vector<Point2> & gt)
{
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dx = pred[i].x - gt[i].x;
    const double dy = pred[i].y - gt[i].y;
    total += std::sqrt(dx * dx + dy * dy);
  }
  return total / static_cast<double>(pred.size());
}

inline double oracle_fde(const std::vector<Point2> & pred, const std::vector<Point2> & gt)
{
  const double dx = pred.back().x - gt.back().x;
  const double dy = pred.back().y - gt.back().y;
  return std::sqrt(dx * dx + dy * dy);
}

inline double oracle_min_ade(
  const std::vector<std::vector<Point2>> & preds, const std::vector<Point2> & gt)
{
  double best = oracle_ade(preds[0], gt);
  for (std::size_t j = 1; j < preds.size(); ++j) {
    best = std::fmin(best, oracle_ade(preds[j], gt));
  }
  return best;
}

inline double oracle_min_fde(
  const std::vector<std::vector<Point2>> & preds, const std::vector<Point2> & gt)
{
  double best = oracle_fde(preds[0], gt);
  for (std::size_t j = 1; j < preds.size(); ++j) {
    best = std::fmin(best, oracle_fde(preds[j], gt));
  }
  return best;
}

/// Literal mixture NLL: -log sum_k c_k * exp(-0.5 * sq_err_k). Valid for the
/// moderate magnitudes the random tests draw (no underflow handling).
inline double oracle_nll(
  const std::vector<std::vector<Point2>> & preds, const std::vector<double> & confidences,
  const std::vector<Point2> & gt)
{
  double mixture = 0.0;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    double sq = 0.0;
    for (std::size_t t = 0; t < gt.size(); ++t) {
      const double dx = preds[j][t].x - gt[t].x;
      const double dy = preds[j][t].y - gt[t].y;
      sq += dx * dx + dy * dy;
    }
    mixture += confidences[j] * std::exp(-0.5 * sq);
  }
  return -std::log(mixture);
}

// Scene builders.

inline AgentTrack make_track(
  const std::string & id, AgentRole role, std::vector<Point2> observed)
{
  AgentTrack t;
  t.agent_id = id;
  t.role = role;
  t.valid_mask.assign(observed.size(), true);
  t.observed = std::move(observed);
  return normalize_track(std::move(t));
}

/// Track moving from `start` with constant velocity, m points.
inline AgentTrack make_linear_track(
  const std::string & id, AgentRole role, Point2 start, Point2 step, int m)
{
  std::vector<Point2> pts;
  for (int i = 0; i < m; ++i) {
    pts.push_back({start.x + step.x * i, start.y + step.y * i});
  }
  return make_track(id, role, pts);
}

/// Small scene: target along +x at 10 m/s, ego trailing, optional others.
inline Scene make_simple_scene(int others = 1, int m = 20, int n = 30)
{
  Scene scene;
  scene.scene_id = "test_scene";
  scene.m = m;
  scene.n = n;
  scene.sample_rate_hz = 10;
  scene.target_id = "target";
  scene.tracks.push_back(make_linear_track("ego", AgentRole::kEgo, {-12.0, -2.0}, {1.0, 0.0}, m));
  scene.tracks.push_back(
    make_linear_track("target", AgentRole::kTarget, {-10.0, 0.0}, {1.0, 0.0}, m));
  for (int i = 0; i < others; ++i) {
    scene.tracks.push_back(make_linear_track(
      "agent" + std::to_string(i + 2), AgentRole::kOther, {-8.0 + i, 2.0 + i}, {0.9, 0.1}, m));
  }
  const Point2 last = scene.target().last_observed();
  for (int i = 1; i <= n; ++i) {
    scene.future.push_back({last.x + i * 1.0, last.y});
  }
  return scene;
}

/// Grid with every cell feasible, centered near the origin.
inline FeasibleGrid make_full_grid(double half_extent = 60.0, double res = 1.0)
{
  const int cells = static_cast<int>(2.0 * half_extent / res);
  return FeasibleGrid({-half_extent, -half_extent}, res, cells, cells,
                      std::vector<bool>(static_cast<std::size_t>(cells) * cells, true));
}

inline SceneBundle make_simple_bundle(int others = 1)
{
  return {make_simple_scene(others), make_full_grid()};
}

}  // namespace effmp::testing
