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

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "effmp/checkpoint.hpp"
#include "effmp/errors.hpp"
#include "effmp/io_formats.hpp"
#include "effmp/losses.hpp"
#include "effmp/model.hpp"
#include "effmp/plot.hpp"
#include "effmp/synthetic.hpp"
#include "effmp/training.hpp"

namespace
{

int env_threads()
{
  const char * raw = std::getenv("EFFMP_THREADS");
  if (raw == nullptr) {
    return 1;
  }
  const int n = std::atoi(raw);
  return n > 0 ? n : 1;
}

effmp::FileConfig config_or_default(const std::string & path)
{
  if (path.empty()) {
    return {};
  }
  return effmp::load_config_file(path);
}

std::uint64_t scene_goal_seed(std::uint64_t seed, const std::string & scene_id)
{
  return effmp::mix_seed(seed, effmp::fnv1a(scene_id));
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Trajectory prediction with map-based goal features"};
  app.require_subcommand(1);

  // gen-data
  auto * gen = app.add_subcommand("gen-data", "Generate synthetic scene bundles");
  std::string gen_out;
  int gen_count = 100;
  std::uint64_t gen_seed = 0;
  std::string gen_template = "straight";
  int gen_agents = 3;
  double gen_noise = 0.0;
  double gen_speed = 10.0;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--count", gen_count, "Number of scenes");
  gen->add_option("--seed", gen_seed, "Base seed");
  gen->add_option("--template", gen_template, "Road template: straight|curve|intersection");
  gen->add_option("--agents", gen_agents, "Tracks per scene (including ego and target)");
  gen->add_option("--noise", gen_noise, "Observation noise sigma [m]");
  gen->add_option("--speed", gen_speed, "Target speed [m/s]");

  // train
  auto * train_cmd = app.add_subcommand("train", "Train a model");
  std::string train_config;
  std::string train_data;
  std::string train_out;
  std::string train_resume;
  std::string train_log;
  std::int64_t train_seed = -1;
  train_cmd->add_option("--config", train_config, "Model + training config file")->required();
  train_cmd->add_option("--data-dir", train_data, "Directory of .bundle files")->required();
  train_cmd->add_option("--out", train_out, "Checkpoint output path")->required();
  train_cmd->add_option("--resume", train_resume, "Resume from a .last checkpoint");
  train_cmd->add_option("--log", train_log, "Training log file (default: stdout)");
  train_cmd->add_option("--seed", train_seed, "Override the training seed");

  // predict
  auto * predict_cmd = app.add_subcommand("predict", "Predict one scene bundle");
  std::string predict_bundle;
  std::string predict_ckpt;
  std::string predict_out;
  int predict_k = 0;
  std::uint64_t predict_seed = 0;
  predict_cmd->add_option("bundle", predict_bundle, "Scene .bundle path")->required();
  predict_cmd->add_option("--checkpoint", predict_ckpt, "Checkpoint path")->required();
  predict_cmd->add_option("--out", predict_out, "Prediction file path")->required();
  predict_cmd->add_option("--k", predict_k, "Keep only the top-k modes");
  predict_cmd->add_option("--seed", predict_seed, "Goal sampling seed");

  // eval
  auto * eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint over a dataset");
  std::string eval_ckpt;
  std::string eval_data;
  std::string eval_out;
  std::string eval_config;
  int eval_k = 0;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required();
  eval_cmd->add_option("--data-dir", eval_data, "Directory of .bundle files")->required();
  eval_cmd->add_option("--out", eval_out, "Per-scene breakdown file");
  eval_cmd->add_option("--config", eval_config, "Config file to cross-check against the checkpoint");
  eval_cmd->add_option("--k", eval_k, "Keep only the top-k modes");
  eval_cmd->add_option("--seed", eval_seed, "Goal sampling seed");

  // extract-features
  auto * feat_cmd = app.add_subcommand("extract-features", "Sample goal points for one scene");
  std::string feat_bundle;
  std::string feat_out;
  std::string feat_config;
  std::uint64_t feat_seed = 0;
  feat_cmd->add_option("bundle", feat_bundle, "Scene .bundle path")->required();
  feat_cmd->add_option("--out", feat_out, "Goals file path")->required();
  feat_cmd->add_option("--config", feat_config, "Config file (lambda, r, forward_cone_deg)");
  feat_cmd->add_option("--seed", feat_seed, "Sampling seed");

  // flops
  auto * flops_cmd = app.add_subcommand("flops", "Report parameters, GMACs and GFLOPs");
  std::string flops_config;
  std::string flops_variant;
  int flops_agents = 10;
  flops_cmd->add_option("--config", flops_config, "Config file");
  flops_cmd->add_option("--variant", flops_variant, "Override variant: lstm_mhsa|set_transformer");
  flops_cmd->add_option("--agents", flops_agents, "Agent count for the forward pass");

  // plot
  auto * plot_cmd = app.add_subcommand("plot", "Render a scene + prediction to SVG");
  std::string plot_bundle;
  std::string plot_pred;
  std::string plot_out;
  std::string plot_goals;
  std::uint64_t plot_seed = 0;
  plot_cmd->add_option("bundle", plot_bundle, "Scene .bundle path")->required();
  plot_cmd->add_option("prediction", plot_pred, "Prediction file path")->required();
  plot_cmd->add_option("--out", plot_out, "Output .svg path")->required();
  plot_cmd->add_option("--goals", plot_goals, "Goals file (recomputed when absent)");
  plot_cmd->add_option("--seed", plot_seed, "Goal sampling seed when recomputing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      effmp::SyntheticSpec spec;
      spec.road = effmp::road_template_from_string(gen_template);
      spec.agent_count = gen_agents;
      spec.noise_sigma_m = gen_noise;
      spec.speed_mps = gen_speed;
      effmp::validate_spec(spec);
      std::filesystem::create_directories(gen_out);
      for (int i = 0; i < gen_count; ++i) {
        const auto bundle =
          effmp::generate_synthetic_scene(spec, effmp::mix_seed(gen_seed, static_cast<std::uint64_t>(i)));
        char name[64];
        std::snprintf(name, sizeof(name), "scene_%05d.bundle", i);
        effmp::save_scene_bundle(bundle, std::filesystem::path(gen_out) / name);
      }
      std::cout << "wrote " << gen_count << " bundles to " << gen_out << "\n";
      return 0;
    }

    if (train_cmd->parsed()) {
      effmp::FileConfig cfg = effmp::load_config_file(train_config);
      if (train_seed >= 0) {
        cfg.train.seed = static_cast<std::uint64_t>(train_seed);
      }
      const auto dataset = effmp::load_dataset(train_data);
      std::ofstream log_file;
      std::ostream * log = &std::cout;
      if (!train_log.empty()) {
        log_file.open(train_log);
        if (!log_file) {
          throw effmp::IoError("cannot open log file " + train_log);
        }
        log = &log_file;
      }
      std::optional<std::filesystem::path> resume;
      if (!train_resume.empty()) {
        resume = train_resume;
      }
      const auto state = effmp::train(dataset, cfg.model, cfg.train, train_out, *log, resume);
      std::cout << "checkpoint " << state.checkpoint_path.string() << " best_val="
                << state.best_val << "\n";
      return 0;
    }

    if (predict_cmd->parsed()) {
      const auto model = effmp::Model::from_checkpoint(effmp::load_checkpoint(predict_ckpt));
      const auto bundle = effmp::load_scene_bundle(predict_bundle);
      effmp::PredictionSet pred =
        effmp::predict(model, bundle, scene_goal_seed(predict_seed, bundle.scene.scene_id));
      if (predict_k > 0 && predict_k < static_cast<int>(pred.trajectories.size())) {
        pred = effmp::select_top_k(pred, predict_k);
      }
      effmp::write_prediction_file(pred, predict_out);
      return 0;
    }

    if (eval_cmd->parsed()) {
      const auto ckpt = effmp::load_checkpoint(eval_ckpt);
      if (!eval_config.empty()) {
        const auto file_cfg = effmp::load_config_file(eval_config);
        if (effmp::to_config_line(file_cfg.model) != ckpt.config_line) {
          throw effmp::ValidationError("incompatible checkpoint (config hash mismatch)");
        }
      }
      const auto model = effmp::Model::from_checkpoint(ckpt);
      const auto dataset = effmp::load_dataset(eval_data);
      std::vector<const effmp::SceneBundle *> scenes;
      for (const auto & b : dataset) {
        scenes.push_back(&b);
      }
      std::vector<std::pair<std::string, effmp::SceneMetrics>> per_scene;
      const auto report =
        effmp::evaluate_model(model, scenes, eval_seed, eval_k, env_threads(), &per_scene);
      if (!eval_out.empty()) {
        std::ofstream out(eval_out);
        if (!out) {
          throw effmp::IoError("cannot write breakdown file " + eval_out);
        }
        for (const auto & [id, m] : per_scene) {
          char line[256];
          std::snprintf(line, sizeof(line), "SCENE %s ade=%.6f fde=%.6f minade=%.6f minfde=%.6f",
                        id.c_str(), m.ade, m.fde, m.min_ade, m.min_fde);
          out << line << "\n";
        }
      }
      std::cout << report.eval_line() << "\n";
      return 0;
    }

    if (feat_cmd->parsed()) {
      const auto cfg = config_or_default(feat_config);
      const auto bundle = effmp::load_scene_bundle(feat_bundle);
      const effmp::SmoothingConfig smoothing{cfg.model.lambda, true};
      const auto state = effmp::estimate_dynamic_state(
        bundle.scene.target(), bundle.scene.sample_rate_hz, smoothing);
      effmp::GoalSamplerConfig sampler;
      sampler.r = cfg.model.goal_points;
      sampler.horizon_s = bundle.scene.horizon_s();
      sampler.forward_cone_deg = cfg.model.forward_cone_deg;
      sampler.seed = scene_goal_seed(feat_seed, bundle.scene.scene_id);
      const auto goals = effmp::sample_goal_points(
        bundle.grid, state, bundle.scene.target().last_observed(), sampler);
      effmp::write_goals_file(goals, feat_out);
      return 0;
    }

    if (flops_cmd->parsed()) {
      effmp::FileConfig cfg = config_or_default(flops_config);
      if (!flops_variant.empty()) {
        cfg.model.variant = effmp::variant_from_string(flops_variant);
      }
      const long long params = effmp::count_params(cfg.model);
      const auto report = effmp::count_flops(cfg.model, flops_agents, cfg.model.goal_points);
      char line[512];
      std::snprintf(line, sizeof(line),
                    "FLOPS variant=%s agents=%d k=%d r=%d\n"
                    "params=%lld params_m=%.4f\n"
                    "gmacs=%.6f gflops=%.6f\n"
                    "encoder_attention_quadratic_gmacs=%.6f",
                    effmp::to_string(cfg.model.variant).c_str(), flops_agents, cfg.model.modes,
                    cfg.model.goal_points, params, static_cast<double>(params) / 1e6,
                    report.gmacs(), report.gflops(), report.quadratic_gmacs());
      std::cout << line << "\n";
      return 0;
    }

    if (plot_cmd->parsed()) {
      const auto bundle = effmp::load_scene_bundle(plot_bundle);
      const auto pred = effmp::read_prediction_file(plot_pred);
      std::optional<effmp::GoalSet> goals;
      if (!plot_goals.empty()) {
        goals = effmp::read_goals_file(plot_goals);
      } else {
        const effmp::ModelConfig defaults;
        goals = effmp::compute_goals(defaults, bundle.scene, bundle.grid,
                                     scene_goal_seed(plot_seed, bundle.scene.scene_id));
      }
      const std::string svg = effmp::render_svg(bundle, pred, goals);
      std::ofstream out(plot_out);
      if (!out) {
        throw effmp::IoError("cannot write " + plot_out);
      }
      out << svg;
      return 0;
    }
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
