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

#include "effmp/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <thread>

#include "effmp/checkpoint.hpp"
#include "effmp/errors.hpp"
#include "effmp/optim.hpp"

namespace effmp
{

namespace
{

// Stream labels for deriving independent randomness from one seed.
constexpr std::uint64_t kSplitStream = 0x53504c49;
constexpr std::uint64_t kInitStream = 0x494e4954;
constexpr std::uint64_t kBatchStream = 0x42415443;
constexpr std::uint64_t kAugStream = 0x41554753;
constexpr std::uint64_t kGoalStream = 0x474f414c;

Mat future_matrix(const Scene & scene)
{
  if (scene.future.empty()) {
    throw ValidationError("scene " + scene.scene_id + " has no ground-truth future");
  }
  Mat gt(static_cast<Eigen::Index>(scene.future.size()), 2);
  for (std::size_t i = 0; i < scene.future.size(); ++i) {
    gt(static_cast<Eigen::Index>(i), 0) = scene.future[i].x;
    gt(static_cast<Eigen::Index>(i), 1) = scene.future[i].y;
  }
  return gt;
}

void fisher_yates(std::vector<std::size_t> & items, Rng & rng)
{
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

double truncated_normal(Rng & rng)
{
  double z = normal01(rng);
  while (std::abs(z) > 6.0) {
    z = normal01(rng);
  }
  return z;
}

void save_adam_into(Checkpoint & ckpt, const NamedParams & named, const AdamState & adam)
{
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto & [name, tensor] = named[i];
    const Tensor m = Tensor::from_matrix(adam.m[i]);
    const Tensor v = Tensor::from_matrix(adam.v[i]);
    ckpt.records.push_back({"adam.m." + name, tensor.shape(), m.values_row_major()});
    ckpt.records.push_back({"adam.v." + name, tensor.shape(), v.values_row_major()});
  }
}

AdamState load_adam_from(const Checkpoint & ckpt, const NamedParams & named, long step)
{
  AdamState adam;
  adam.step = step;
  for (const auto & [name, tensor] : named) {
    const CheckpointRecord * m = ckpt.find("adam.m." + name);
    const CheckpointRecord * v = ckpt.find("adam.v." + name);
    if (m == nullptr || v == nullptr) {
      throw ValidationError("checkpoint has no optimizer moments for '" + name + "'");
    }
    adam.m.push_back(Tensor::from_values(m->shape, m->values).value());
    adam.v.push_back(Tensor::from_values(v->shape, v->values).value());
  }
  return adam;
}

}  // namespace

void TrainConfig::validate() const
{
  if (batch_size < 1) {
    throw ValidationError("batch_size must be >= 1");
  }
  if (lr <= 0.0 || max_steps < 1 || eval_every < 1 || patience < 1) {
    throw ValidationError("bad training configuration");
  }
  const auto in01 = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in01(aug.point_dropout_p) || !in01(aug.rotate90_p) || aug.jitter_sigma_m < 0.0) {
    throw ValidationError("bad augmentation configuration");
  }
}

std::pair<Scene, FeasibleGrid> augment(
  const Scene & scene, const FeasibleGrid & grid, const AugmentConfig & cfg, Rng & rng)
{
  Scene out = scene;

  // (i) point dropout; never the last point, and a track keeps >= 2 valid slots.
  if (cfg.point_dropout_p > 0.0) {
    for (auto & track : out.tracks) {
      const std::vector<bool> original = track.valid_mask;
      for (std::size_t i = 0; i + 1 < track.valid_mask.size(); ++i) {
        if (track.valid_mask[i] && uniform01(rng) < cfg.point_dropout_p) {
          track.valid_mask[i] = false;
        }
      }
      if (track.valid_count() < 2) {
        for (std::size_t i = 0; i < original.size() && track.valid_count() < 2; ++i) {
          if (original[i]) {
            track.valid_mask[i] = true;
          }
        }
      }
      track = normalize_track(std::move(track));
    }
  }

  // (ii) rotation about the target's last observed point, grid included.
  FeasibleGrid out_grid = grid;
  if (cfg.rotate90_p > 0.0 && uniform01(rng) < cfg.rotate90_p) {
    const int quarter_turns = static_cast<int>(uniform_index(rng, 4));
    const Point2 center = out.target().last_observed();
    out = rotate_scene(out, center, quarter_turns);
    out_grid = rotate_grid(out_grid, center, quarter_turns);
  }

  // (iii) observation jitter; the future stays clean.
  if (cfg.jitter_sigma_m > 0.0) {
    for (auto & track : out.tracks) {
      for (auto & p : track.observed) {
        p.x += cfg.jitter_sigma_m * truncated_normal(rng);
        p.y += cfg.jitter_sigma_m * truncated_normal(rng);
      }
    }
  }
  return {std::move(out), std::move(out_grid)};
}

PredictionSet select_top_k(const PredictionSet & pred, int k)
{
  pred.validate();
  if (k < 1 || k > static_cast<int>(pred.trajectories.size())) {
    throw ValidationError("k override must be in [1, model k]");
  }
  std::vector<std::size_t> order(pred.confidences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pred.confidences[a] > pred.confidences[b];
  });
  PredictionSet out;
  out.scene_id = pred.scene_id;
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    out.trajectories.push_back(pred.trajectories[order[static_cast<std::size_t>(i)]]);
    out.confidences.push_back(pred.confidences[order[static_cast<std::size_t>(i)]]);
    total += out.confidences.back();
  }
  for (auto & c : out.confidences) {
    c /= total;
  }
  out.validate();
  return out;
}

MetricReport evaluate_model(
  const Model & model, const std::vector<const SceneBundle *> & scenes, std::uint64_t goal_seed,
  int k_override, int threads,
  std::vector<std::pair<std::string, SceneMetrics>> * per_scene_out)
{
  if (scenes.empty()) {
    throw ValidationError("no scenes to evaluate");
  }
  const int k = k_override > 0 ? k_override : model.config().modes;
  std::vector<SceneMetrics> metrics(scenes.size());

  auto run_range = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < scenes.size(); i += stride) {
      const SceneBundle & bundle = *scenes[i];
      PredictionSet pred =
        predict(model, bundle, mix_seed(goal_seed, fnv1a(bundle.scene.scene_id)));
      if (k_override > 0 && k_override < static_cast<int>(pred.trajectories.size())) {
        pred = select_top_k(pred, k_override);
      }
      metrics[i] = score_prediction(pred, bundle.scene.future);
    }
  };

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(scenes.size())));
  if (workers == 1) {
    run_range(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back(run_range, static_cast<std::size_t>(w), static_cast<std::size_t>(workers));
    }
    for (auto & t : pool) {
      t.join();
    }
  }

  if (per_scene_out != nullptr) {
    per_scene_out->clear();
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      per_scene_out->push_back({scenes[i]->scene.scene_id, metrics[i]});
    }
  }
  return aggregate_metrics(metrics, k);
}

TrainState train(
  const std::vector<SceneBundle> & dataset, const ModelConfig & model_cfg,
  const TrainConfig & train_cfg, const std::filesystem::path & checkpoint_out, std::ostream & log,
  const std::optional<std::filesystem::path> & resume)
{
  train_cfg.validate();
  model_cfg.validate();
  if (dataset.empty()) {
    throw ValidationError("training dataset is empty");
  }
  for (const auto & bundle : dataset) {
    if (bundle.scene.future.empty()) {
      throw ValidationError("scene " + bundle.scene.scene_id + " has no future labels");
    }
  }

  // Deterministic 90/10 split.
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  {
    Rng split_rng(mix_seed(train_cfg.seed, kSplitStream));
    fisher_yates(order, split_rng);
  }
  const std::size_t val_count = dataset.size() >= 2
                                  ? std::max<std::size_t>(1, dataset.size() / 10)
                                  : 0;
  std::vector<std::size_t> val_idx(order.end() - static_cast<std::ptrdiff_t>(val_count),
                                   order.end());
  std::vector<std::size_t> train_idx(order.begin(),
                                     order.end() - static_cast<std::ptrdiff_t>(val_count));
  if (train_idx.empty()) {
    train_idx = val_idx;
  }
  std::vector<const SceneBundle *> val_scenes;
  for (const auto i : val_idx) {
    val_scenes.push_back(&dataset[i]);
  }
  std::vector<const SceneBundle *> train_scenes;
  for (const auto i : train_idx) {
    train_scenes.push_back(&dataset[i]);
  }
  if (val_scenes.empty()) {
    val_scenes = train_scenes;  // single-scene dataset
  }

  Model model(model_cfg, mix_seed(train_cfg.seed, kInitStream) ^ model_cfg.seed);
  AdamState adam;
  PlateauState sched;
  sched.lr = train_cfg.lr;
  int stop_bad = 0;
  long start_step = 0;
  double best_val = std::numeric_limits<double>::infinity();

  if (resume.has_value()) {
    const Checkpoint ckpt = load_checkpoint(*resume);
    if (ckpt.config_line != to_config_line(model_cfg)) {
      throw ValidationError("resume checkpoint config does not match (hash mismatch)");
    }
    model.load_parameters(ckpt);
    adam = load_adam_from(ckpt, model.named_parameters(), ckpt.step);
    start_step = ckpt.step;
    sched.lr = ckpt.lr;
    sched.best = ckpt.sched_best;
    sched.bad = ckpt.sched_bad;
    stop_bad = ckpt.stop_bad;
    best_val = ckpt.best_val;
  }

  std::vector<Tensor> params = model.parameters();
  const NamedParams named = model.named_parameters();

  TrainState state;
  state.lr = sched.lr;
  state.best_val = best_val;
  state.checkpoint_path = checkpoint_out;
  state.last_checkpoint_path = checkpoint_out;
  state.last_checkpoint_path += ".last";
  bool saved_best = resume.has_value() && std::isfinite(best_val) &&
                    std::filesystem::exists(checkpoint_out);

  auto save_best = [&](long step) {
    Checkpoint ckpt = model.to_checkpoint();
    ckpt.step = step;
    ckpt.lr = sched.lr;
    ckpt.sched_best = sched.best;
    ckpt.sched_bad = sched.bad;
    ckpt.stop_bad = stop_bad;
    ckpt.best_val = best_val;
    save_adam_into(ckpt, named, adam);
    save_checkpoint(ckpt, checkpoint_out);
    saved_best = true;
  };
  auto save_last = [&](long step) {
    Checkpoint ckpt = model.to_checkpoint();
    ckpt.step = step;
    ckpt.lr = sched.lr;
    ckpt.sched_best = sched.best;
    ckpt.sched_bad = sched.bad;
    ckpt.stop_bad = stop_bad;
    ckpt.best_val = best_val;
    save_adam_into(ckpt, named, adam);
    save_checkpoint(ckpt, state.last_checkpoint_path);
  };

  long step = start_step;
  for (step = start_step + 1; step <= train_cfg.max_steps; ++step) {
    // Stateless batch selection: resuming reproduces the same batches.
    std::vector<std::size_t> batch;
    {
      Rng batch_rng(mix_seed(mix_seed(train_cfg.seed, kBatchStream), static_cast<std::uint64_t>(step)));
      std::vector<std::size_t> pool(train_idx.size());
      std::iota(pool.begin(), pool.end(), 0);
      fisher_yates(pool, batch_rng);
      const std::size_t take = std::min<std::size_t>(pool.size(),
                                                     static_cast<std::size_t>(train_cfg.batch_size));
      batch.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    }

    std::vector<Tensor> scene_losses;
    double log_nll = 0.0;
    double log_ade = 0.0;
    double log_fde = 0.0;
    for (const std::size_t b : batch) {
      const SceneBundle & bundle = *train_scenes[b];
      const std::uint64_t scene_stream =
        mix_seed(mix_seed(mix_seed(train_cfg.seed, kAugStream), static_cast<std::uint64_t>(step)),
                 static_cast<std::uint64_t>(b));
      Rng aug_rng(scene_stream);
      auto [aug_scene, aug_grid] = augment(bundle.scene, bundle.grid, train_cfg.aug, aug_rng);
      // Goal features are recomputed after augmentation; rotation changes
      // heading and feasibility.
      const auto goals =
        compute_goals(model_cfg, aug_scene, aug_grid, mix_seed(scene_stream, kGoalStream));
      const ForwardResult fr = model.forward(aug_scene, goals);
      const TotalLossParts parts =
        total_loss(fr.trajectories, fr.confidences, future_matrix(aug_scene), train_cfg.weights);
      if (!std::isfinite(parts.total.scalar_value())) {
        throw Error("non-finite loss at step " + std::to_string(step) + " on scene " +
                    aug_scene.scene_id);
      }
      scene_losses.push_back(parts.total);
      log_nll += parts.nll_term.scalar_value();
      log_ade += parts.ade_term.scalar_value();
      log_fde += parts.fde_term.scalar_value();
    }
    const double inv = 1.0 / static_cast<double>(scene_losses.size());
    Tensor batch_loss = scale(sum(concat(scene_losses, 0)), inv);

    for (auto & p : params) {
      p.zero_grad();
    }
    backward(batch_loss);
    adam_step(params, adam, sched.lr);

    {
      char line[256];
      std::snprintf(line, sizeof(line), "STEP %ld loss=%.6f nll=%.6f ade=%.6f fde=%.6f lr=%.6g",
                    step, batch_loss.scalar_value(), log_nll * inv, log_ade * inv, log_fde * inv,
                    sched.lr);
      log << line << '\n';
    }

    if (step % train_cfg.eval_every == 0) {
      const MetricReport report =
        evaluate_model(model, val_scenes, mix_seed(train_cfg.seed, kGoalStream));
      state.lr = plateau_scheduler(sched, report.min_ade, train_cfg.scheduler_factor,
                                   train_cfg.patience);
      char line[256];
      std::snprintf(line, sizeof(line), "VAL step=%ld minade=%.6f minfde=%.6f lr=%.6g", step,
                    report.min_ade, report.min_fde, sched.lr);
      log << line << '\n';
      if (report.min_ade < best_val - 1e-4) {
        best_val = report.min_ade;
        stop_bad = 0;
        save_best(step);
      } else {
        ++stop_bad;
      }
      if (stop_bad >= train_cfg.early_stop_evals) {
        log << "EARLY_STOP step=" << step << "\n";
        break;
      }
    }
  }
  const long final_step = std::min<long>(step, train_cfg.max_steps);

  if (!saved_best) {
    save_best(final_step);
  }
  save_last(final_step);

  const MetricReport train_report =
    evaluate_model(model, train_scenes, mix_seed(train_cfg.seed, kGoalStream));
  state.step = final_step;
  state.lr = sched.lr;
  state.best_val = best_val;
  state.final_train_ade = train_report.ade;
  state.final_train_fde = train_report.fde;
  {
    char line[256];
    std::snprintf(line, sizeof(line), "FINAL step=%ld train_ade=%.6f train_fde=%.6f best_val=%.6f",
                  final_step, state.final_train_ade, state.final_train_fde, best_val);
    log << line << '\n';
  }
  return state;
}

}  // namespace effmp
