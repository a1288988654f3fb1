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

#include "effmp/io_formats.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "effmp/errors.hpp"

namespace effmp
{

namespace
{

std::string format_coord(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

double parse_double(const std::string & tok, const std::string & what)
{
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) {
      throw ParseError("bad " + what + " '" + tok + "'");
    }
    return v;
  } catch (const ParseError &) {
    throw;
  } catch (const std::exception &) {
    throw ParseError("bad " + what + " '" + tok + "'");
  }
}

}  // namespace

void write_prediction_file(const PredictionSet & pred, const std::filesystem::path & path)
{
  pred.validate();
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write prediction file " + path.string());
  }
  out << "PRED " << pred.scene_id << " k=" << pred.trajectories.size() << "\n";
  for (std::size_t j = 0; j < pred.trajectories.size(); ++j) {
    char head[64];
    std::snprintf(head, sizeof(head), "MODE %zu c=%.9f", j, pred.confidences[j]);
    out << head << "\n";
    for (const auto & p : pred.trajectories[j]) {
      out << format_coord(p.x) << ' ' << format_coord(p.y) << "\n";
    }
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

PredictionSet read_prediction_file(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open prediction file " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("empty prediction file " + path.string());
  }
  std::istringstream head(line);
  std::string tag;
  std::string scene_id;
  std::string ktok;
  if (!(head >> tag >> scene_id >> ktok) || tag != "PRED" || ktok.rfind("k=", 0) != 0) {
    throw ParseError("bad prediction header '" + line + "'");
  }
  const int k = static_cast<int>(parse_double(ktok.substr(2), "k"));
  PredictionSet pred;
  pred.scene_id = scene_id;
  for (int j = 0; j < k; ++j) {
    if (!std::getline(in, line)) {
      throw ParseError("prediction file truncated before mode " + std::to_string(j));
    }
    std::istringstream mh(line);
    std::string mtag;
    int idx = -1;
    std::string ctok;
    if (!(mh >> mtag >> idx >> ctok) || mtag != "MODE" || idx != j || ctok.rfind("c=", 0) != 0) {
      throw ParseError("bad mode header '" + line + "'");
    }
    pred.confidences.push_back(parse_double(ctok.substr(2), "confidence"));
    std::vector<Point2> traj;
    while (true) {
      const auto pos = in.tellg();
      if (!std::getline(in, line) || line.rfind("MODE", 0) == 0) {
        if (in) {
          in.seekg(pos);
        }
        break;
      }
      std::istringstream pl(line);
      std::string xs;
      std::string ys;
      if (!(pl >> xs >> ys)) {
        throw ParseError("bad point line '" + line + "'");
      }
      traj.push_back({parse_double(xs, "x"), parse_double(ys, "y")});
    }
    pred.trajectories.push_back(std::move(traj));
  }
  pred.validate();
  return pred;
}

void write_goals_file(const GoalSet & goals, const std::filesystem::path & path)
{
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write goals file " + path.string());
  }
  out << "GOALS " << format_coord(goals.center.x) << ' ' << format_coord(goals.center.y) << ' '
      << format_coord(goals.radius) << ' ' << format_coord(goals.heading) << ' '
      << goals.points.size() << "\n";
  for (const auto & p : goals.points) {
    out << format_coord(p.x) << ' ' << format_coord(p.y) << "\n";
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

GoalSet read_goals_file(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open goals file " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("empty goals file " + path.string());
  }
  std::istringstream head(line);
  std::string tag;
  std::string cx;
  std::string cy;
  std::string radius;
  std::string heading;
  int r = 0;
  if (!(head >> tag >> cx >> cy >> radius >> heading >> r) || tag != "GOALS" || r < 0) {
    throw ParseError("bad goals header '" + line + "'");
  }
  GoalSet goals;
  goals.center = {parse_double(cx, "center_x"), parse_double(cy, "center_y")};
  goals.radius = parse_double(radius, "radius");
  goals.heading = parse_double(heading, "heading");
  for (int i = 0; i < r; ++i) {
    if (!std::getline(in, line)) {
      throw ParseError("goals file truncated at point " + std::to_string(i));
    }
    std::istringstream pl(line);
    std::string xs;
    std::string ys;
    if (!(pl >> xs >> ys)) {
      throw ParseError("bad goal point line '" + line + "'");
    }
    goals.points.push_back({parse_double(xs, "x"), parse_double(ys, "y")});
  }
  return goals;
}

FileConfig load_config_file(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config file " + path.string());
  }
  std::string model_line;
  std::vector<std::pair<std::string, std::string>> train_pairs;
  bool train_seed_set = false;

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') {
      continue;
    }
    std::istringstream iss(line);
    std::string tok;
    while (iss >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) {
        throw ParseError("expected key=value, got '" + tok + "'");
      }
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      const bool is_train_key =
        key == "batch_size" || key == "lr" || key == "max_steps" || key == "eval_every" ||
        key == "patience" || key == "scheduler_factor" || key == "early_stop_evals" ||
        key == "point_dropout_p" || key == "rotate90_p" || key == "jitter_sigma_m" ||
        key == "alpha" || key == "beta" || key == "gamma" || key == "train_seed";
      if (is_train_key) {
        train_pairs.emplace_back(key, val);
        if (key == "train_seed") {
          train_seed_set = true;
        }
      } else {
        model_line += (model_line.empty() ? "" : " ") + tok;
      }
    }
  }

  FileConfig cfg;
  if (!model_line.empty()) {
    cfg.model = model_config_from_line(model_line);
  }
  for (const auto & [key, val] : train_pairs) {
    try {
      if (key == "batch_size") {
        cfg.train.batch_size = std::stoi(val);
      } else if (key == "lr") {
        cfg.train.lr = std::stod(val);
      } else if (key == "max_steps") {
        cfg.train.max_steps = std::stoi(val);
      } else if (key == "eval_every") {
        cfg.train.eval_every = std::stoi(val);
      } else if (key == "patience") {
        cfg.train.patience = std::stoi(val);
      } else if (key == "scheduler_factor") {
        cfg.train.scheduler_factor = std::stod(val);
      } else if (key == "early_stop_evals") {
        cfg.train.early_stop_evals = std::stoi(val);
      } else if (key == "point_dropout_p") {
        cfg.train.aug.point_dropout_p = std::stod(val);
      } else if (key == "rotate90_p") {
        cfg.train.aug.rotate90_p = std::stod(val);
      } else if (key == "jitter_sigma_m") {
        cfg.train.aug.jitter_sigma_m = std::stod(val);
      } else if (key == "alpha") {
        cfg.train.weights.alpha = std::stod(val);
      } else if (key == "beta") {
        cfg.train.weights.beta = std::stod(val);
      } else if (key == "gamma") {
        cfg.train.weights.gamma = std::stod(val);
      } else if (key == "train_seed") {
        cfg.train.seed = std::stoull(val);
      }
    } catch (const std::exception &) {
      throw ParseError("bad value '" + val + "' for " + key);
    }
  }
  if (!train_seed_set) {
    cfg.train.seed = cfg.model.seed;
  }
  cfg.train.validate();
  return cfg;
}

std::vector<SceneBundle> load_dataset(const std::filesystem::path & dir)
{
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> manifests;
  for (const auto & entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".bundle") {
      manifests.push_back(entry.path());
    }
  }
  std::sort(manifests.begin(), manifests.end());
  if (manifests.empty()) {
    throw ValidationError("no .bundle files in " + dir.string());
  }
  std::vector<SceneBundle> out;
  out.reserve(manifests.size());
  for (const auto & m : manifests) {
    out.push_back(load_scene_bundle(m));
  }
  return out;
}

}  // namespace effmp
