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

#include <optional>
#include <string>
#include <vector>

#include "effmp/attention.hpp"
#include "effmp/checkpoint.hpp"
#include "effmp/map_features.hpp"
#include "effmp/scene.hpp"
#include "effmp/tensor.hpp"

namespace effmp
{

enum class ModelVariant { kLstmMhsa, kSetTransformer };

std::string to_string(ModelVariant v);
ModelVariant variant_from_string(const std::string & s);

struct ModelConfig
{
  ModelVariant variant = ModelVariant::kSetTransformer;
  int model_dim = 48;
  int heads = 4;
  int encoder_blocks = 2;  // b
  int decoder_blocks = 2;  // s
  int modes = 6;           // k
  bool use_goal_features = true;
  bool goals_as_queries = false;  // feed goal embeddings as decoder queries instead of context
  int goal_embed_dim = 8;
  int goal_hidden_dim = 64;
  int ff_hidden_dim = 128;
  double lambda = 0.9;            // forgetting factor for heading/speed smoothing
  int goal_points = 32;           // r
  double forward_cone_deg = 180.0;
  std::uint64_t seed = 0;
  int m = 20;
  int n = 30;

  /// Width of the decoder stream; goal context widens it unless goals ride
  /// in as queries.
  int decoder_dim() const
  {
    return model_dim + (use_goal_features && !goals_as_queries ? goal_embed_dim : 0);
  }
  void validate() const;
};

/// key=value serialization used by config files and checkpoint headers.
std::string to_config_line(const ModelConfig & cfg);
ModelConfig model_config_from_line(const std::string & line);

struct NormalizedScene
{
  std::vector<Mat> displacements;  // per agent, (m-1) x 2, target-centric frame
  std::size_t target_index = 0;
  FrameTransform frame;
};

/// Translates so the target's last observed point is the origin, rotates so
/// its smoothed heading is +x, and converts positions to per-step
/// displacements.
NormalizedScene normalize_scene(const Scene & scene, double lambda = 0.9);

/// k candidate futures in world frame with normalized confidences.
struct PredictionSet
{
  std::string scene_id;
  std::vector<std::vector<Point2>> trajectories;  // k x n
  std::vector<double> confidences;                // k, nonnegative, sums to 1

  void validate() const;
};

struct ForwardResult
{
  std::vector<Tensor> trajectories;  // k tensors of shape [n, 2], world frame
  Tensor confidences;                // [k] softmax probabilities

  PredictionSet to_prediction_set(const std::string & scene_id) const;
};

/// Cumulative sum down the rows of an [n, 2] displacement tensor.
Tensor cumsum_rows(const Tensor & d);

class Model
{
public:
  Model(const ModelConfig & cfg, std::uint64_t init_seed);

  const ModelConfig & config() const { return cfg_; }

  ForwardResult forward(const Scene & scene, const std::optional<GoalSet> & goals) const;

  /// Shared two-layer map over goal offsets, max-pooled across offsets
  /// (permutation-invariant). No offsets gives the zero vector.
  Tensor embed_goals(const std::vector<Point2> & offsets) const;

  NamedParams named_parameters() const;
  std::vector<Tensor> parameters() const;

  Checkpoint to_checkpoint() const;
  void load_parameters(const Checkpoint & ckpt);
  static Model from_checkpoint(const Checkpoint & ckpt);

private:
  ForwardResult forward_lstm_mhsa(const NormalizedScene & ns,
                                  const std::optional<GoalSet> & goals) const;
  ForwardResult forward_set_transformer(const NormalizedScene & ns,
                                        const std::optional<GoalSet> & goals) const;
  ForwardResult finish(std::vector<Tensor> mode_displacements, const Tensor & conf_logits,
                       const FrameTransform & frame) const;

  ModelConfig cfg_;

  // goal feature path (both variants)
  LinearParams goal_in_;
  LinearParams goal_out_;

  // lstm_mhsa
  LstmParams enc_lstm_;
  std::vector<AttentionParams> lstm_blocks_;
  LinearParams ctx_h0_;
  LinearParams ctx_c0_;
  LstmParams dec_lstm_;
  LinearParams dec_out_;
  LinearParams conf_head_;

  // set_transformer
  LinearParams seq_embed_;
  std::vector<SetBlockParams> enc_blocks_;
  Tensor seeds_;  // [k, decoder_dim], absent when goals are the queries
  LinearParams goal_query_;
  AttentionParams cross_;
  std::vector<SetBlockParams> dec_blocks_;
  // one trajectory head and one confidence head per query, so each mode
  // keeps an identity of its own (the decoder carries no residual stream)
  std::vector<LinearParams> head_out_;
  std::vector<LinearParams> head_conf_;
};

long long count_params(const ModelConfig & cfg);

/// Analytic multiply-accumulate count of one forward pass (2 FLOPs per MAC).
struct FlopReport
{
  long long total_macs = 0;
  long long encoder_attention_quadratic_macs = 0;  // the agents^2 score/value term

  double gmacs() const { return static_cast<double>(total_macs) / 1e9; }
  double gflops() const { return 2.0 * gmacs(); }  // GMACs = 0.5 * GFLOPs
  double quadratic_gmacs() const
  {
    return static_cast<double>(encoder_attention_quadratic_macs) / 1e9;
  }
};

FlopReport count_flops(const ModelConfig & cfg, int agent_count, int goal_points);

/// Goal extraction as the models consume it: smoothed dynamic state of the
/// target, then feasible-cell sampling. Returns nullopt when the model does
/// not use goal features or the region is empty.
std::optional<GoalSet> compute_goals(
  const ModelConfig & cfg, const Scene & scene, const FeasibleGrid & grid, std::uint64_t seed);

PredictionSet predict(const Model & model, const SceneBundle & bundle, std::uint64_t goal_seed);

}  // namespace effmp
