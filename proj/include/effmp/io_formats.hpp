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

#include "effmp/map_features.hpp"
#include "effmp/model.hpp"
#include "effmp/training.hpp"

namespace effmp
{

/// `PRED <scene_id> k=<k>`, then per mode `MODE <i> c=<f>` followed by n
/// `x y` lines (6 fractional digits).
void write_prediction_file(const PredictionSet & pred, const std::filesystem::path & path);
PredictionSet read_prediction_file(const std::filesystem::path & path);

/// `GOALS center_x center_y radius heading r` followed by r `x y` lines.
void write_goals_file(const GoalSet & goals, const std::filesystem::path & path);
GoalSet read_goals_file(const std::filesystem::path & path);

struct FileConfig
{
  ModelConfig model;
  TrainConfig train;
};

/// Flat key=value text; model keys plus training keys (batch_size, lr,
/// max_steps, eval_every, patience, scheduler_factor, early_stop_evals,
/// point_dropout_p, rotate90_p, jitter_sigma_m, alpha, beta, gamma,
/// train_seed). Whitespace and newlines both separate entries; `#` starts a
/// comment line.
FileConfig load_config_file(const std::filesystem::path & path);

/// Loads every *.bundle under a directory, sorted by filename.
std::vector<SceneBundle> load_dataset(const std::filesystem::path & dir);

}  // namespace effmp
