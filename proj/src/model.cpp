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

#include "effmp/model.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "effmp/errors.hpp"

namespace effmp
{

namespace
{

std::string format_g17(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool parse_bool(const std::string & v, const std::string & key)
{
  if (v == "1" || v == "true") {
    return true;
  }
  if (v == "0" || v == "false") {
    return false;
  }
  throw ParseError("bad boolean '" + v + "' for " + key);
}

long long linear_params(long long in, long long out)
{
  return in * out + out;
}

long long attention_params(long long dim)
{
  return 4 * linear_params(dim, dim);
}

long long set_block_params(long long dim, long long hidden)
{
  return attention_params(dim) + linear_params(dim, hidden) + linear_params(hidden, dim);
}

long long lstm_params(long long in, long long hidden)
{
  return in * 4 * hidden + hidden * 4 * hidden + 4 * hidden;
}

// MAC counts: one MAC per weight multiply in linear maps, attention
// score/value products and LSTM gates; nonlinearities are not counted.
long long linear_macs(long long rows, long long in, long long out)
{
  return rows * in * out;
}

long long attention_linear_macs(long long q_rows, long long kv_rows, long long dim)
{
  return (q_rows + 2 * kv_rows) * dim * dim + q_rows * dim * dim;
}

long long attention_quadratic_macs(long long q_rows, long long kv_rows, long long dim)
{
  return 2 * q_rows * kv_rows * dim;  // scores + weighted values, all heads
}

long long feed_forward_macs(long long rows, long long dim, long long hidden)
{
  return rows * (dim * hidden + hidden * dim);
}

long long lstm_step_macs(long long batch, long long in, long long hidden)
{
  return batch * (in * 4 * hidden + hidden * 4 * hidden);
}

}  // namespace

std::string to_string(ModelVariant v)
{
  return v == ModelVariant::kLstmMhsa ? "lstm_mhsa" : "set_transformer";
}

ModelVariant variant_from_string(const std::string & s)
{
  if (s == "lstm_mhsa") {
    return ModelVariant::kLstmMhsa;
  }
  if (s == "set_transformer") {
    return ModelVariant::kSetTransformer;
  }
  throw ParseError("unknown model variant '" + s + "'");
}

void ModelConfig::validate() const
{
  if (modes < 1) {
    throw ValidationError("modes k must be >= 1");
  }
  if (model_dim < 1 || heads < 1 || model_dim % heads != 0) {
    throw ValidationError("model_dim must be a positive multiple of heads");
  }
  if (use_goal_features) {
    if (goal_embed_dim < 1 || goal_hidden_dim < 1) {
      throw ValidationError("goal embedding dims must be >= 1");
    }
    if (decoder_dim() % heads != 0) {
      throw ValidationError("model_dim + goal_embed_dim must stay divisible by heads");
    }
  }
  if (goals_as_queries && (!use_goal_features || variant != ModelVariant::kSetTransformer)) {
    throw ValidationError("goals_as_queries requires the set transformer with goal features");
  }
  if (encoder_blocks < 1 || decoder_blocks < 1 || ff_hidden_dim < 1) {
    throw ValidationError("block counts and hidden dims must be >= 1");
  }
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw ValidationError("lambda must be in (0, 1)");
  }
  if (goal_points < 1) {
    throw ValidationError("goal point count r must be >= 1");
  }
  if (!(forward_cone_deg > 0.0 && forward_cone_deg <= 360.0)) {
    throw ValidationError("forward cone must be in (0, 360] degrees");
  }
  if (m < 2 || n < 1) {
    throw ValidationError("m must be >= 2 and n >= 1");
  }
}

std::string to_config_line(const ModelConfig & cfg)
{
  std::ostringstream out;
  out << "variant=" << to_string(cfg.variant) << " model_dim=" << cfg.model_dim
      << " heads=" << cfg.heads << " b=" << cfg.encoder_blocks << " s=" << cfg.decoder_blocks
      << " k=" << cfg.modes << " use_goal_features=" << (cfg.use_goal_features ? 1 : 0)
      << " goals_as_queries=" << (cfg.goals_as_queries ? 1 : 0)
      << " goal_embed_dim=" << cfg.goal_embed_dim << " goal_hidden_dim=" << cfg.goal_hidden_dim
      << " ff_hidden_dim=" << cfg.ff_hidden_dim << " lambda=" << format_g17(cfg.lambda)
      << " r=" << cfg.goal_points << " forward_cone_deg=" << format_g17(cfg.forward_cone_deg)
      << " seed=" << cfg.seed << " m=" << cfg.m << " n=" << cfg.n;
  return out.str();
}

ModelConfig model_config_from_line(const std::string & line)
{
  ModelConfig cfg;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected key=value, got '" + tok + "'");
    }
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    try {
      if (key == "variant") {
        cfg.variant = variant_from_string(val);
      } else if (key == "model_dim") {
        cfg.model_dim = std::stoi(val);
      } else if (key == "heads") {
        cfg.heads = std::stoi(val);
      } else if (key == "b") {
        cfg.encoder_blocks = std::stoi(val);
      } else if (key == "s") {
        cfg.decoder_blocks = std::stoi(val);
      } else if (key == "k") {
        cfg.modes = std::stoi(val);
      } else if (key == "use_goal_features") {
        cfg.use_goal_features = parse_bool(val, key);
      } else if (key == "goals_as_queries") {
        cfg.goals_as_queries = parse_bool(val, key);
      } else if (key == "goal_embed_dim") {
        cfg.goal_embed_dim = std::stoi(val);
      } else if (key == "goal_hidden_dim") {
        cfg.goal_hidden_dim = std::stoi(val);
      } else if (key == "ff_hidden_dim") {
        cfg.ff_hidden_dim = std::stoi(val);
      } else if (key == "lambda") {
        cfg.lambda = std::stod(val);
      } else if (key == "r") {
        cfg.goal_points = std::stoi(val);
      } else if (key == "forward_cone_deg") {
        cfg.forward_cone_deg = std::stod(val);
      } else if (key == "seed") {
        cfg.seed = std::stoull(val);
      } else if (key == "m") {
        cfg.m = std::stoi(val);
      } else if (key == "n") {
        cfg.n = std::stoi(val);
      } else {
        throw ParseError("unknown model config key '" + key + "'");
      }
    } catch (const ParseError &) {
      throw;
    } catch (const std::exception &) {
      throw ParseError("bad value '" + val + "' for " + key);
    }
  }
  cfg.validate();
  return cfg;
}

NormalizedScene normalize_scene(const Scene & scene, double lambda)
{
  validate_scene(scene);
  NormalizedScene ns;
  ns.target_index = scene.target_index();
  const AgentTrack & target = scene.tracks[ns.target_index];
  const SmoothingConfig smoothing{lambda, true};
  ns.frame.translation = target.last_observed();
  ns.frame.rotation = smooth_last_circular(heading_sequence(target), smoothing);
  for (const auto & t : scene.tracks) {
    Mat d(scene.m - 1, 2);
    Point2 prev = ns.frame.to_local(t.observed[0]);
    for (int i = 1; i < scene.m; ++i) {
      const Point2 cur = ns.frame.to_local(t.observed[i]);
      d(i - 1, 0) = cur.x - prev.x;
      d(i - 1, 1) = cur.y - prev.y;
      prev = cur;
    }
    ns.displacements.push_back(std::move(d));
  }
  return ns;
}

void PredictionSet::validate() const
{
  if (trajectories.size() != confidences.size() || trajectories.empty()) {
    throw ValidationError("prediction set must pair each trajectory with a confidence");
  }
  double total = 0.0;
  for (const double c : confidences) {
    if (!(c >= 0.0)) {
      throw ValidationError("confidences must be nonnegative");
    }
    total += c;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw ValidationError("confidences must sum to 1");
  }
  for (const auto & traj : trajectories) {
    if (traj.size() != trajectories.front().size()) {
      throw ValidationError("all modes must have the same length");
    }
    for (const auto & p : traj) {
      if (!p.finite()) {
        throw ValidationError("non-finite predicted coordinate");
      }
    }
  }
}

PredictionSet ForwardResult::to_prediction_set(const std::string & scene_id) const
{
  PredictionSet out;
  out.scene_id = scene_id;
  for (const auto & t : trajectories) {
    std::vector<Point2> traj;
    for (Eigen::Index i = 0; i < t.value().rows(); ++i) {
      traj.push_back({t.value()(i, 0), t.value()(i, 1)});
    }
    out.trajectories.push_back(std::move(traj));
  }
  for (Eigen::Index i = 0; i < confidences.numel(); ++i) {
    out.confidences.push_back(confidences.at(i));
  }
  out.validate();
  return out;
}

Tensor cumsum_rows(const Tensor & d)
{
  if (d.rank() != 2) {
    throw ShapeError("cumsum_rows requires rank 2, got " + shape_to_string(d.shape()));
  }
  const Eigen::Index rows = d.shape()[0];
  std::vector<Tensor> acc;
  acc.reserve(static_cast<std::size_t>(rows));
  acc.push_back(slice(d, 0, 0, 1));
  for (Eigen::Index t = 1; t < rows; ++t) {
    acc.push_back(add(acc.back(), slice(d, 0, t, 1)));
  }
  return rows == 1 ? acc.front() : concat(acc, 0);
}

Model::Model(const ModelConfig & cfg, std::uint64_t init_seed) : cfg_(cfg)
{
  cfg_.validate();
  Rng rng(init_seed);
  const int d = cfg_.model_dim;
  const int k = cfg_.modes;

  if (cfg_.variant == ModelVariant::kLstmMhsa) {
    enc_lstm_ = LstmParams::init(2, d, rng);
    for (int i = 0; i < cfg_.encoder_blocks; ++i) {
      lstm_blocks_.push_back(AttentionParams::init(d, rng));
    }
    if (cfg_.use_goal_features) {
      goal_in_ = LinearParams::init(2, cfg_.goal_hidden_dim, rng);
      goal_out_ = LinearParams::init(cfg_.goal_hidden_dim, cfg_.goal_embed_dim, rng);
    }
    const int ctx = d + (cfg_.use_goal_features ? cfg_.goal_embed_dim : 0);
    ctx_h0_ = LinearParams::init(ctx, d, rng);
    ctx_c0_ = LinearParams::init(ctx, d, rng);
    dec_lstm_ = LstmParams::init(2, d, rng);
    dec_out_ = LinearParams::init(d, 2 * k, rng);
    conf_head_ = LinearParams::init(ctx, k, rng);
    return;
  }

  seq_embed_ = LinearParams::init((cfg_.m - 1) * 2, d, rng);
  const SetBlockConfig enc_cfg{d, cfg_.heads, cfg_.ff_hidden_dim};
  for (int i = 0; i < cfg_.encoder_blocks; ++i) {
    enc_blocks_.push_back(SetBlockParams::init(enc_cfg, rng));
  }
  if (cfg_.use_goal_features) {
    goal_in_ = LinearParams::init(2, cfg_.goal_hidden_dim, rng);
    goal_out_ = LinearParams::init(cfg_.goal_hidden_dim, cfg_.goal_embed_dim, rng);
  }
  const int dd = cfg_.decoder_dim();
  if (cfg_.goals_as_queries) {
    goal_query_ = LinearParams::init(2, dd, rng);
  } else {
    const double s = 1.0 / std::sqrt(static_cast<double>(dd));
    std::vector<double> seed_values(static_cast<std::size_t>(k) * dd);
    for (auto & v : seed_values) {
      v = uniform_in(rng, -s, s);
    }
    seeds_ = Tensor::from_values({k, dd}, std::move(seed_values), true);
  }
  cross_ = AttentionParams::init(dd, rng);
  const SetBlockConfig dec_cfg{dd, cfg_.heads, cfg_.ff_hidden_dim};
  for (int i = 0; i < cfg_.decoder_blocks; ++i) {
    dec_blocks_.push_back(SetBlockParams::init(dec_cfg, rng));
  }
  for (int j = 0; j < k; ++j) {
    head_out_.push_back(LinearParams::init(dd, 2 * cfg_.n, rng));
  }
  for (int j = 0; j < k; ++j) {
    head_conf_.push_back(LinearParams::init(dd, 1, rng));
  }
}

Tensor Model::embed_goals(const std::vector<Point2> & offsets) const
{
  if (!cfg_.use_goal_features) {
    throw ValidationError("goal embedding requested but use_goal_features is off");
  }
  if (offsets.empty()) {
    return Tensor::zeros({1, cfg_.goal_embed_dim});
  }
  Mat m(static_cast<Eigen::Index>(offsets.size()), 2);
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = offsets[i].x;
    m(static_cast<Eigen::Index>(i), 1) = offsets[i].y;
  }
  const Tensor hidden = relu(linear(Tensor::from_matrix(m), goal_in_));
  const Tensor embedded = linear(hidden, goal_out_);
  return reshape(max(embedded, 0), {1, cfg_.goal_embed_dim});
}

ForwardResult Model::forward(const Scene & scene, const std::optional<GoalSet> & goals) const
{
  if (scene.m != cfg_.m || scene.n != cfg_.n) {
    throw ValidationError("scene m/n does not match the model configuration");
  }
  const NormalizedScene ns = normalize_scene(scene, cfg_.lambda);
  if (cfg_.variant == ModelVariant::kLstmMhsa) {
    return forward_lstm_mhsa(ns, goals);
  }
  return forward_set_transformer(ns, goals);
}

ForwardResult Model::finish(std::vector<Tensor> mode_displacements, const Tensor & conf_logits,
                            const FrameTransform & frame) const
{
  const double cr = std::cos(frame.rotation);
  const double sr = std::sin(frame.rotation);
  // Row-vector convention: world = local * R^T + t.
  const Tensor rot_t = Tensor::from_values({2, 2}, {cr, sr, -sr, cr});
  const Tensor translation = Tensor::vector({frame.translation.x, frame.translation.y});
  ForwardResult out;
  for (auto & d : mode_displacements) {
    out.trajectories.push_back(add(matmul(cumsum_rows(d), rot_t), translation));
  }
  out.confidences = softmax(conf_logits, 0);
  return out;
}

ForwardResult Model::forward_lstm_mhsa(const NormalizedScene & ns,
                                       const std::optional<GoalSet> & goals) const
{
  const int agents = static_cast<int>(ns.displacements.size());
  const int d = cfg_.model_dim;
  const int k = cfg_.modes;
  const int steps = cfg_.m - 1;

  Tensor h = Tensor::zeros({agents, d});
  Tensor c = Tensor::zeros({agents, d});
  for (int t = 0; t < steps; ++t) {
    Mat x(agents, 2);
    for (int a = 0; a < agents; ++a) {
      x(a, 0) = ns.displacements[static_cast<std::size_t>(a)](t, 0);
      x(a, 1) = ns.displacements[static_cast<std::size_t>(a)](t, 1);
    }
    std::tie(h, c) = lstm_step(Tensor::from_matrix(x), h, c, enc_lstm_);
  }

  Tensor feats = h;
  const MhsaConfig attn_cfg{d, cfg_.heads};
  for (const auto & block : lstm_blocks_) {
    feats = mhsa(feats, attn_cfg, block);
  }
  Tensor ctx = slice(feats, 0, static_cast<Eigen::Index>(ns.target_index), 1);
  if (cfg_.use_goal_features) {
    const std::vector<Point2> offsets = goals.has_value() ? goal_offsets(*goals)
                                                          : std::vector<Point2>{};
    ctx = concat({ctx, embed_goals(offsets)}, 1);
  }

  Tensor dh = tanh(linear(ctx, ctx_h0_));
  Tensor dc = linear(ctx, ctx_c0_);
  const Mat & target_disp = ns.displacements[ns.target_index];
  Mat last_disp(1, 2);
  last_disp << target_disp(steps - 1, 0), target_disp(steps - 1, 1);
  const Tensor dec_in = Tensor::from_matrix(last_disp);

  std::vector<std::vector<Tensor>> mode_rows(static_cast<std::size_t>(k));
  for (int t = 0; t < cfg_.n; ++t) {
    std::tie(dh, dc) = lstm_step(dec_in, dh, dc, dec_lstm_);
    const Tensor step_out = linear(dh, dec_out_);  // [1, 2k]
    for (int j = 0; j < k; ++j) {
      mode_rows[static_cast<std::size_t>(j)].push_back(slice(step_out, 1, 2 * j, 2));
    }
  }
  std::vector<Tensor> modes;
  modes.reserve(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    modes.push_back(cfg_.n == 1 ? mode_rows[static_cast<std::size_t>(j)].front()
                                : concat(mode_rows[static_cast<std::size_t>(j)], 0));
  }
  const Tensor conf_logits = reshape(linear(ctx, conf_head_), {k});
  return finish(std::move(modes), conf_logits, ns.frame);
}

ForwardResult Model::forward_set_transformer(const NormalizedScene & ns,
                                             const std::optional<GoalSet> & goals) const
{
  const int agents = static_cast<int>(ns.displacements.size());
  const int d = cfg_.model_dim;
  const int k = cfg_.modes;
  const int flat_dim = (cfg_.m - 1) * 2;

  Mat x(agents, flat_dim);
  for (int a = 0; a < agents; ++a) {
    const Mat & disp = ns.displacements[static_cast<std::size_t>(a)];
    for (int t = 0; t < cfg_.m - 1; ++t) {
      x(a, 2 * t) = disp(t, 0);
      x(a, 2 * t + 1) = disp(t, 1);
    }
  }
  Tensor encoded = linear(Tensor::from_matrix(x), seq_embed_);
  const SetBlockConfig enc_cfg{d, cfg_.heads, cfg_.ff_hidden_dim};
  for (const auto & block : enc_blocks_) {
    encoded = set_attention_block(encoded, enc_cfg, block);
  }

  const int dd = cfg_.decoder_dim();
  std::vector<Point2> offsets;
  if (cfg_.use_goal_features && goals.has_value()) {
    offsets = goal_offsets(*goals);
  }

  Tensor kv = encoded;
  if (cfg_.use_goal_features && !cfg_.goals_as_queries) {
    // The pooled goal embedding is appended to every encoded agent vector.
    const Tensor goal_vec = embed_goals(offsets);
    const Tensor ones = Tensor::from_matrix(Mat::Ones(agents, 1));
    kv = concat({encoded, matmul(ones, goal_vec)}, 1);
  }

  Tensor queries;
  if (cfg_.goals_as_queries) {
    if (offsets.empty()) {
      // No usable goals this scene: neutral queries attend uniformly.
      queries = Tensor::zeros({k, dd});
    } else {
      Mat om(static_cast<Eigen::Index>(offsets.size()), 2);
      for (std::size_t i = 0; i < offsets.size(); ++i) {
        om(static_cast<Eigen::Index>(i), 0) = offsets[i].x;
        om(static_cast<Eigen::Index>(i), 1) = offsets[i].y;
      }
      const Tensor embedded = linear(Tensor::from_matrix(om), goal_query_);
      const Eigen::Index r = embedded.shape()[0];
      if (r >= k) {
        queries = slice(embedded, 0, 0, k);
      } else {
        std::vector<Tensor> rows;
        for (int i = 0; i < k; ++i) {
          rows.push_back(slice(embedded, 0, i % r, 1));
        }
        queries = concat(rows, 0);
      }
    }
  } else {
    queries = seeds_;
  }

  const MhsaConfig cross_cfg{dd, cfg_.heads};
  Tensor decoded = cross_attention(queries, kv, cross_cfg, cross_);

  const SetBlockConfig dec_cfg{dd, cfg_.heads, cfg_.ff_hidden_dim};
  for (const auto & block : dec_blocks_) {
    decoded = set_attention_block(decoded, dec_cfg, block);
  }

  std::vector<Tensor> modes;
  modes.reserve(static_cast<std::size_t>(k));
  std::vector<Tensor> logits;
  logits.reserve(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const Tensor row = slice(decoded, 0, j, 1);
    modes.push_back(reshape(linear(row, head_out_[static_cast<std::size_t>(j)]), {cfg_.n, 2}));
    logits.push_back(reshape(linear(row, head_conf_[static_cast<std::size_t>(j)]), {1}));
  }
  const Tensor conf_logits = concat(logits, 0);
  return finish(std::move(modes), conf_logits, ns.frame);
}

NamedParams Model::named_parameters() const
{
  NamedParams out;
  auto append = [&out](NamedParams items) {
    for (auto & item : items) {
      out.push_back(std::move(item));
    }
  };
  if (cfg_.variant == ModelVariant::kLstmMhsa) {
    append(enc_lstm_.named("enc"));
    for (std::size_t i = 0; i < lstm_blocks_.size(); ++i) {
      append(lstm_blocks_[i].named("attn" + std::to_string(i)));
    }
    if (cfg_.use_goal_features) {
      append(goal_in_.named("goal.in"));
      append(goal_out_.named("goal.out"));
    }
    append(ctx_h0_.named("ctx_h0"));
    append(ctx_c0_.named("ctx_c0"));
    append(dec_lstm_.named("dec"));
    append(dec_out_.named("dec_out"));
    append(conf_head_.named("conf"));
    return out;
  }
  append(seq_embed_.named("embed"));
  for (std::size_t i = 0; i < enc_blocks_.size(); ++i) {
    append(enc_blocks_[i].named("enc" + std::to_string(i)));
  }
  if (cfg_.use_goal_features) {
    append(goal_in_.named("goal.in"));
    append(goal_out_.named("goal.out"));
  }
  if (cfg_.goals_as_queries) {
    append(goal_query_.named("goal_query"));
  } else {
    out.push_back({"seeds", seeds_});
  }
  append(cross_.named("cross"));
  for (std::size_t i = 0; i < dec_blocks_.size(); ++i) {
    append(dec_blocks_[i].named("dec" + std::to_string(i)));
  }
  for (std::size_t j = 0; j < head_out_.size(); ++j) {
    append(head_out_[j].named("head_out" + std::to_string(j)));
  }
  for (std::size_t j = 0; j < head_conf_.size(); ++j) {
    append(head_conf_[j].named("head_conf" + std::to_string(j)));
  }
  return out;
}

std::vector<Tensor> Model::parameters() const
{
  std::vector<Tensor> out;
  for (auto & [name, tensor] : named_parameters()) {
    out.push_back(tensor);
  }
  return out;
}

Checkpoint Model::to_checkpoint() const
{
  Checkpoint ckpt;
  ckpt.config_line = to_config_line(cfg_);
  for (const auto & [name, tensor] : named_parameters()) {
    ckpt.records.push_back({name, tensor.shape(), tensor.values_row_major()});
  }
  return ckpt;
}

void Model::load_parameters(const Checkpoint & ckpt)
{
  for (auto & [name, tensor] : named_parameters()) {
    const CheckpointRecord * rec = ckpt.find(name);
    if (rec == nullptr) {
      throw ValidationError("checkpoint is missing parameter '" + name + "'");
    }
    if (rec->shape != tensor.shape()) {
      throw ValidationError("checkpoint parameter '" + name + "' has shape " +
                            shape_to_string(rec->shape) + ", expected " +
                            shape_to_string(tensor.shape()));
    }
    const Tensor loaded = Tensor::from_values(rec->shape, rec->values);
    tensor.assign_value(loaded.value());
  }
}

Model Model::from_checkpoint(const Checkpoint & ckpt)
{
  Model model(model_config_from_line(ckpt.config_line), 0);
  model.load_parameters(ckpt);
  return model;
}

long long count_params(const ModelConfig & cfg)
{
  cfg.validate();
  const long long d = cfg.model_dim;
  const long long k = cfg.modes;
  long long total = 0;
  if (cfg.variant == ModelVariant::kLstmMhsa) {
    total += lstm_params(2, d);
    total += cfg.encoder_blocks * attention_params(d);
    const long long ctx = d + (cfg.use_goal_features ? cfg.goal_embed_dim : 0);
    if (cfg.use_goal_features) {
      total += linear_params(2, cfg.goal_hidden_dim);
      total += linear_params(cfg.goal_hidden_dim, cfg.goal_embed_dim);
    }
    total += 2 * linear_params(ctx, d);
    total += lstm_params(2, d);
    total += linear_params(d, 2 * k);
    total += linear_params(ctx, k);
    return total;
  }
  const long long dd = cfg.decoder_dim();
  total += linear_params((cfg.m - 1) * 2, d);
  total += cfg.encoder_blocks * set_block_params(d, cfg.ff_hidden_dim);
  if (cfg.use_goal_features) {
    total += linear_params(2, cfg.goal_hidden_dim);
    total += linear_params(cfg.goal_hidden_dim, cfg.goal_embed_dim);
  }
  if (cfg.goals_as_queries) {
    total += linear_params(2, dd);
  } else {
    total += k * dd;
  }
  total += attention_params(dd);
  total += cfg.decoder_blocks * set_block_params(dd, cfg.ff_hidden_dim);
  total += k * linear_params(dd, 2 * cfg.n);
  total += k * linear_params(dd, 1);
  return total;
}

FlopReport count_flops(const ModelConfig & cfg, int agent_count, int goal_points)
{
  cfg.validate();
  if (agent_count < 1) {
    throw ValidationError("agent_count must be >= 1");
  }
  const long long a = agent_count;
  const long long d = cfg.model_dim;
  const long long k = cfg.modes;
  const long long r = goal_points;
  FlopReport report;
  long long total = 0;

  const long long goal_macs =
    cfg.use_goal_features
      ? r * (2 * cfg.goal_hidden_dim + static_cast<long long>(cfg.goal_hidden_dim) *
                                         cfg.goal_embed_dim)
      : 0;

  if (cfg.variant == ModelVariant::kLstmMhsa) {
    total += (cfg.m - 1) * lstm_step_macs(a, 2, d);
    const long long quad = cfg.encoder_blocks * attention_quadratic_macs(a, a, d);
    total += cfg.encoder_blocks * attention_linear_macs(a, a, d) + quad;
    const long long ctx = d + (cfg.use_goal_features ? cfg.goal_embed_dim : 0);
    total += goal_macs;
    total += 2 * linear_macs(1, ctx, d);
    total += cfg.n * lstm_step_macs(1, 2, d);
    total += cfg.n * linear_macs(1, d, 2 * k);
    total += linear_macs(1, ctx, k);
    report.encoder_attention_quadratic_macs = quad;
    report.total_macs = total;
    return report;
  }

  const long long dd = cfg.decoder_dim();
  total += linear_macs(a, (cfg.m - 1) * 2, d);
  const long long quad = cfg.encoder_blocks * attention_quadratic_macs(a, a, d);
  total += cfg.encoder_blocks *
             (attention_linear_macs(a, a, d) + feed_forward_macs(a, d, cfg.ff_hidden_dim)) +
           quad;
  total += goal_macs;
  if (cfg.goals_as_queries) {
    total += linear_macs(k, 2, dd);
  }
  total += attention_linear_macs(k, a, dd) + attention_quadratic_macs(k, a, dd);
  total += cfg.decoder_blocks *
           (attention_linear_macs(k, k, dd) + attention_quadratic_macs(k, k, dd) +
            feed_forward_macs(k, dd, cfg.ff_hidden_dim));
  total += linear_macs(k, dd, 2 * cfg.n);
  total += linear_macs(k, dd, 1);
  report.encoder_attention_quadratic_macs = quad;
  report.total_macs = total;
  return report;
}

std::optional<GoalSet> compute_goals(
  const ModelConfig & cfg, const Scene & scene, const FeasibleGrid & grid, std::uint64_t seed)
{
  if (!cfg.use_goal_features) {
    return std::nullopt;
  }
  const Point2 center = scene.target().last_observed();
  if (!grid.in_bounds(center)) {
    return std::nullopt;  // can happen after aggressive augmentation near the crop edge
  }
  const SmoothingConfig smoothing{cfg.lambda, true};
  const DynamicState state = estimate_dynamic_state(scene.target(), scene.sample_rate_hz, smoothing);
  GoalSamplerConfig sampler;
  sampler.r = cfg.goal_points;
  sampler.horizon_s = scene.horizon_s();
  sampler.forward_cone_deg = cfg.forward_cone_deg;
  sampler.seed = seed;
  try {
    return sample_goal_points(grid, state, center, sampler);
  } catch (const NoFeasibleCellsError &) {
    return std::nullopt;
  }
}

PredictionSet predict(const Model & model, const SceneBundle & bundle, std::uint64_t goal_seed)
{
  const auto goals = compute_goals(model.config(), bundle.scene, bundle.grid, goal_seed);
  return model.forward(bundle.scene, goals).to_prediction_set(bundle.scene.scene_id);
}

}  // namespace effmp
