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

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "effmp/losses.hpp"
#include "effmp/model.hpp"
#include "effmp/rng.hpp"
#include "effmp/scene.hpp"

namespace effmp
{

struct AugmentConfig
{
  double point_dropout_p = 0.1;  // per observed point, the last one never drops
  double rotate90_p = 0.5;
  double jitter_sigma_m = 0.2;   // resampled beyond 6 sigma
};

struct TrainConfig
{
  int batch_size = 64;
  double lr = 0.001;
  int max_steps = 1000;
  int eval_every = 50;
  int patience = 3;
  double scheduler_factor = 0.5;
  int early_stop_evals = 5;  // non-improving validations before stopping
  AugmentConfig aug;
  LossWeights weights;
  std::uint64_t seed = 0;

  void validate() const;
};

/// (i) point dropout with forward-fill, (ii) 90-degree rotation of scene and
/// grid about the target's last observed point, (iii) Gaussian jitter of
/// observed points. The ground-truth future receives rotation only.
std::pair<Scene, FeasibleGrid> augment(
  const Scene & scene, const FeasibleGrid & grid, const AugmentConfig & cfg, Rng & rng);

struct TrainState
{
  long step = 0;
  double lr = 0.0;
  double best_val = std::numeric_limits<double>::infinity();
  double final_train_ade = 0.0;
  double final_train_fde = 0.0;
  std::filesystem::path checkpoint_path;       // best-validation parameters
  std::filesystem::path last_checkpoint_path;  // full state for resume
};

/// Runs minibatch Adam on the composite loss with a deterministic 90/10
/// train/val split. Writes the best-validation checkpoint to `checkpoint_out`
/// and the resumable last-step state to `checkpoint_out` + ".last".
/// Randomness is derived statelessly from (seed, step), so resuming from the
/// .last file reproduces an uninterrupted run exactly.
TrainState train(
  const std::vector<SceneBundle> & dataset, const ModelConfig & model_cfg,
  const TrainConfig & train_cfg, const std::filesystem::path & checkpoint_out, std::ostream & log,
  const std::optional<std::filesystem::path> & resume = std::nullopt);

/// Forward passes over scenes (no augmentation) with per-scene goal seeds
/// derived from scene ids; aggregation is order-independent. k_override
/// keeps only the top-k modes by confidence (0 = model's k). threads > 1
/// processes scenes on a worker pool.
MetricReport evaluate_model(
  const Model & model, const std::vector<const SceneBundle *> & scenes, std::uint64_t goal_seed,
  int k_override = 0, int threads = 1,
  std::vector<std::pair<std::string, SceneMetrics>> * per_scene_out = nullptr);

/// Top-k modes by confidence, confidences renormalized.
PredictionSet select_top_k(const PredictionSet & pred, int k);

}  // namespace effmp
