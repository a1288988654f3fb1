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

#include "effmp/scene.hpp"

#include <algorithm>
#include <cmath>
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

std::vector<std::string> split_ws(const std::string & line)
{
  std::vector<std::string> out;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) {
    out.push_back(tok);
  }
  return out;
}

double parse_double(const std::string & tok, const std::string & what)
{
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception &) {
    throw ParseError("bad " + what + " '" + tok + "'");
  }
  if (pos != tok.size() || !std::isfinite(v)) {
    throw ParseError("bad " + what + " '" + tok + "'");
  }
  return v;
}

int parse_int(const std::string & tok, const std::string & what)
{
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(tok, &pos);
  } catch (const std::exception &) {
    throw ParseError("bad " + what + " '" + tok + "'");
  }
  if (pos != tok.size()) {
    throw ParseError("bad " + what + " '" + tok + "'");
  }
  return v;
}

/// Parses `key=<int>` with a fixed expected key.
int parse_keyed_int(const std::string & tok, const std::string & key)
{
  const std::string prefix = key + "=";
  if (tok.rfind(prefix, 0) != 0) {
    throw ParseError("expected " + prefix + "<int>, got '" + tok + "'");
  }
  return parse_int(tok.substr(prefix.size()), key);
}

}  // namespace

std::string to_string(AgentRole role)
{
  switch (role) {
    case AgentRole::kEgo:
      return "ego";
    case AgentRole::kTarget:
      return "target";
    case AgentRole::kOther:
      return "other";
  }
  return "other";
}

AgentRole role_from_string(const std::string & s)
{
  if (s == "ego") {
    return AgentRole::kEgo;
  }
  if (s == "target") {
    return AgentRole::kTarget;
  }
  if (s == "other") {
    return AgentRole::kOther;
  }
  throw ParseError("unknown agent role '" + s + "'");
}

std::size_t AgentTrack::valid_count() const
{
  return static_cast<std::size_t>(std::count(valid_mask.begin(), valid_mask.end(), true));
}

AgentTrack normalize_track(AgentTrack track)
{
  if (track.observed.size() != track.valid_mask.size()) {
    throw ValidationError("track " + track.agent_id + ": mask length != observation length");
  }
  if (track.valid_count() < 2) {
    throw ValidationError("track " + track.agent_id + ": fewer than 2 valid observations");
  }
  for (std::size_t i = 0; i < track.observed.size(); ++i) {
    if (track.valid_mask[i] && !track.observed[i].finite()) {
      throw ValidationError("track " + track.agent_id + ": non-finite observation");
    }
  }
  // Leading invalid slots take the first valid value, the rest forward-fill.
  const auto first_valid = std::find(track.valid_mask.begin(), track.valid_mask.end(), true);
  const std::size_t first = static_cast<std::size_t>(first_valid - track.valid_mask.begin());
  for (std::size_t i = 0; i < first; ++i) {
    track.observed[i] = track.observed[first];
  }
  for (std::size_t i = first + 1; i < track.observed.size(); ++i) {
    if (!track.valid_mask[i]) {
      track.observed[i] = track.observed[i - 1];
    }
  }
  return track;
}

const AgentTrack & Scene::target() const
{
  return tracks.at(target_index());
}

std::size_t Scene::target_index() const
{
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (tracks[i].role == AgentRole::kTarget) {
      return i;
    }
  }
  throw ValidationError("scene " + scene_id + ": no target track");
}

const AgentTrack & Scene::ego() const
{
  for (const auto & t : tracks) {
    if (t.role == AgentRole::kEgo) {
      return t;
    }
  }
  throw ValidationError("scene " + scene_id + ": no ego track");
}

void validate_scene(const Scene & scene)
{
  if (scene.m < 2 || scene.n < 1 || scene.sample_rate_hz < 1) {
    throw ValidationError("scene " + scene.scene_id + ": bad m/n/hz");
  }
  int targets = 0;
  int egos = 0;
  for (const auto & t : scene.tracks) {
    if (t.observed.size() != static_cast<std::size_t>(scene.m)) {
      throw ValidationError(
        "scene " + scene.scene_id + ": track " + t.agent_id + " has " +
        std::to_string(t.observed.size()) + " observations, expected m=" +
        std::to_string(scene.m));
    }
    if (t.valid_mask.size() != static_cast<std::size_t>(scene.m)) {
      throw ValidationError("scene " + scene.scene_id + ": track " + t.agent_id + " bad mask");
    }
    if (t.valid_count() < 2) {
      throw ValidationError(
        "scene " + scene.scene_id + ": track " + t.agent_id + " has < 2 valid observations");
    }
    if (t.role == AgentRole::kTarget) {
      ++targets;
      if (t.agent_id != scene.target_id) {
        throw ValidationError("scene " + scene.scene_id + ": target_id mismatch");
      }
    }
    if (t.role == AgentRole::kEgo) {
      ++egos;
    }
  }
  if (targets != 1) {
    throw ValidationError(
      "scene " + scene.scene_id + ": expected exactly one target track, found " +
      std::to_string(targets));
  }
  if (egos != 1) {
    throw ValidationError(
      "scene " + scene.scene_id + ": expected exactly one ego track, found " +
      std::to_string(egos));
  }
  if (!scene.future.empty() && scene.future.size() != static_cast<std::size_t>(scene.n)) {
    throw ValidationError(
      "scene " + scene.scene_id + ": future has " + std::to_string(scene.future.size()) +
      " points, expected n=" + std::to_string(scene.n));
  }
  for (const auto & p : scene.future) {
    if (!p.finite()) {
      throw ValidationError("scene " + scene.scene_id + ": non-finite future point");
    }
  }
}

FeasibleGrid::FeasibleGrid(
  Point2 origin, double resolution, int width, int height, std::vector<bool> cells)
: origin_(origin), resolution_(resolution), width_(width), height_(height), cells_(std::move(cells))
{
  if (resolution_ <= 0.0) {
    throw ValidationError("grid resolution must be > 0");
  }
  if (width_ < 1 || height_ < 1) {
    throw ValidationError("grid must have at least one cell");
  }
  if (cells_.size() != static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_)) {
    throw ValidationError("grid bit array length != width*height");
  }
}

FeasibleGrid::FeasibleGrid(const FeasibleGrid & other)
: origin_(other.origin_),
  resolution_(other.resolution_),
  width_(other.width_),
  height_(other.height_),
  cells_(other.cells_)
{
}

FeasibleGrid & FeasibleGrid::operator=(const FeasibleGrid & other)
{
  origin_ = other.origin_;
  resolution_ = other.resolution_;
  width_ = other.width_;
  height_ = other.height_;
  cells_ = other.cells_;
  return *this;
}

bool FeasibleGrid::in_bounds(const Point2 & p) const
{
  const auto [ix, iy] = cell_of(p);
  return cell_in_bounds(ix, iy);
}

std::pair<int, int> FeasibleGrid::cell_of(const Point2 & p) const
{
  const int ix = static_cast<int>(std::floor((p.x - origin_.x) / resolution_));
  const int iy = static_cast<int>(std::floor((p.y - origin_.y) / resolution_));
  return {ix, iy};
}

bool FeasibleGrid::feasible_cell(int ix, int iy) const
{
  probes_.fetch_add(1, std::memory_order_relaxed);
  if (!cell_in_bounds(ix, iy)) {
    return false;
  }
  return cells_[static_cast<std::size_t>(iy) * width_ + ix];
}

bool FeasibleGrid::feasible_at(const Point2 & p) const
{
  const auto [ix, iy] = cell_of(p);
  return feasible_cell(ix, iy);
}

void validate_bundle(const SceneBundle & bundle)
{
  validate_scene(bundle.scene);
  const AgentTrack & target = bundle.scene.target();
  for (const auto & p : target.observed) {
    if (!bundle.grid.in_bounds(p)) {
      throw ValidationError(
        "scene " + bundle.scene.scene_id + ": target observation (" + format_coord(p.x) + ", " +
        format_coord(p.y) + ") outside grid bounds");
    }
  }
}

Scene load_scene_file(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open scene file " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("empty scene file " + path.string());
  }
  auto head = split_ws(line);
  if (head.size() != 5 || head[0] != "SCENE") {
    throw ParseError("bad scene header '" + line + "'");
  }
  Scene scene;
  scene.scene_id = head[1];
  scene.m = parse_keyed_int(head[2], "m");
  scene.n = parse_keyed_int(head[3], "n");
  scene.sample_rate_hz = parse_keyed_int(head[4], "hz");

  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    auto toks = split_ws(line);
    if (toks[0] == "TRACK") {
      const std::size_t expected = 3 + 2 * static_cast<std::size_t>(scene.m) + 1;
      if (toks.size() != expected) {
        throw ParseError("track record has " + std::to_string(toks.size()) + " fields, expected " +
                         std::to_string(expected));
      }
      AgentTrack track;
      track.agent_id = toks[1];
      track.role = role_from_string(toks[2]);
      for (int i = 0; i < scene.m; ++i) {
        track.observed.push_back(
          {parse_double(toks[3 + 2 * i], "x"), parse_double(toks[4 + 2 * i], "y")});
      }
      const std::string & masktok = toks.back();
      if (masktok.rfind("mask=", 0) != 0) {
        throw ParseError("track record missing mask field");
      }
      const std::string bits = masktok.substr(5);
      if (bits.size() != static_cast<std::size_t>(scene.m)) {
        throw ParseError("mask has " + std::to_string(bits.size()) + " bits, expected m");
      }
      for (const char c : bits) {
        if (c != '0' && c != '1') {
          throw ParseError("mask bits must be 0/1");
        }
        track.valid_mask.push_back(c == '1');
      }
      if (track.role == AgentRole::kTarget && scene.target_id.empty()) {
        scene.target_id = track.agent_id;
      }
      scene.tracks.push_back(normalize_track(std::move(track)));
    } else if (toks[0] == "FUTURE") {
      if (toks.size() != 1 + 2 * static_cast<std::size_t>(scene.n)) {
        throw ParseError("future record has wrong point count");
      }
      for (int i = 0; i < scene.n; ++i) {
        scene.future.push_back(
          {parse_double(toks[1 + 2 * i], "x"), parse_double(toks[2 + 2 * i], "y")});
      }
    } else {
      throw ParseError("unknown record '" + toks[0] + "'");
    }
  }
  validate_scene(scene);
  return scene;
}

void save_scene_file(const Scene & scene, const std::filesystem::path & path)
{
  validate_scene(scene);
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write scene file " + path.string());
  }
  out << "SCENE " << scene.scene_id << " m=" << scene.m << " n=" << scene.n
      << " hz=" << scene.sample_rate_hz << "\n";
  for (const auto & t : scene.tracks) {
    out << "TRACK " << t.agent_id << ' ' << to_string(t.role);
    for (const auto & p : t.observed) {
      out << ' ' << format_coord(p.x) << ' ' << format_coord(p.y);
    }
    out << " mask=";
    for (const bool b : t.valid_mask) {
      out << (b ? '1' : '0');
    }
    out << "\n";
  }
  if (!scene.future.empty()) {
    out << "FUTURE";
    for (const auto & p : scene.future) {
      out << ' ' << format_coord(p.x) << ' ' << format_coord(p.y);
    }
    out << "\n";
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

FeasibleGrid load_grid_file(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open grid file " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("empty grid file " + path.string());
  }
  auto head = split_ws(line);
  if (head.size() != 6 || head[0] != "GRID") {
    throw ParseError("bad grid header '" + line + "'");
  }
  const Point2 origin{parse_double(head[1], "ox"), parse_double(head[2], "oy")};
  const double res = parse_double(head[3], "res");
  const int w = parse_int(head[4], "w");
  const int h = parse_int(head[5], "h");
  if (w < 1 || h < 1 || res <= 0.0) {
    throw ParseError("bad grid dimensions");
  }
  std::vector<bool> cells(static_cast<std::size_t>(w) * h, false);
  for (int iy = 0; iy < h; ++iy) {
    if (!std::getline(in, line)) {
      throw ParseError("grid file truncated at row " + std::to_string(iy));
    }
    if (line.size() != static_cast<std::size_t>(w)) {
      throw ParseError("grid row " + std::to_string(iy) + " has wrong width");
    }
    for (int ix = 0; ix < w; ++ix) {
      const char c = line[ix];
      if (c != '0' && c != '1') {
        throw ParseError("grid cells must be 0/1");
      }
      cells[static_cast<std::size_t>(iy) * w + ix] = (c == '1');
    }
  }
  return FeasibleGrid(origin, res, w, h, std::move(cells));
}

void save_grid_file(const FeasibleGrid & grid, const std::filesystem::path & path)
{
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write grid file " + path.string());
  }
  out << "GRID " << format_coord(grid.origin().x) << ' ' << format_coord(grid.origin().y) << ' '
      << format_coord(grid.resolution()) << ' ' << grid.width() << ' ' << grid.height() << "\n";
  const auto & cells = grid.cells();
  for (int iy = 0; iy < grid.height(); ++iy) {
    std::string row(static_cast<std::size_t>(grid.width()), '0');
    for (int ix = 0; ix < grid.width(); ++ix) {
      if (cells[static_cast<std::size_t>(iy) * grid.width() + ix]) {
        row[ix] = '1';
      }
    }
    out << row << "\n";
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

SceneBundle load_scene_bundle(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open bundle manifest " + path.string());
  }
  std::filesystem::path scene_path;
  std::filesystem::path grid_path;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    auto toks = split_ws(line);
    if (toks.size() != 2) {
      throw ParseError("bad manifest line '" + line + "'");
    }
    if (toks[0] == "scene") {
      scene_path = toks[1];
    } else if (toks[0] == "grid") {
      grid_path = toks[1];
    } else {
      throw ParseError("unknown manifest key '" + toks[0] + "'");
    }
  }
  if (scene_path.empty() || grid_path.empty()) {
    throw ParseError("manifest must list both scene and grid paths");
  }
  const auto base = path.parent_path();
  SceneBundle bundle{
    load_scene_file(scene_path.is_absolute() ? scene_path : base / scene_path),
    load_grid_file(grid_path.is_absolute() ? grid_path : base / grid_path)};
  validate_bundle(bundle);
  return bundle;
}

void save_scene_bundle(const SceneBundle & bundle, const std::filesystem::path & path)
{
  validate_bundle(bundle);
  std::filesystem::path stem = path;
  stem.replace_extension();
  const auto scene_path = std::filesystem::path(stem).replace_extension(".scene");
  const auto grid_path = std::filesystem::path(stem).replace_extension(".grid");
  save_scene_file(bundle.scene, scene_path);
  save_grid_file(bundle.grid, grid_path);
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write bundle manifest " + path.string());
  }
  out << "scene " << scene_path.filename().string() << "\n";
  out << "grid " << grid_path.filename().string() << "\n";
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

Scene rotate_scene(const Scene & scene, const Point2 & center, int quarter_turns)
{
  const double angle = wrap_angle(quarter_turns * M_PI / 2.0);
  Scene out = scene;
  for (auto & t : out.tracks) {
    for (auto & p : t.observed) {
      p = rotate_about(p, center, angle);
    }
  }
  for (auto & p : out.future) {
    p = rotate_about(p, center, angle);
  }
  return out;
}

FeasibleGrid rotate_grid(const FeasibleGrid & grid, const Point2 & center, int quarter_turns)
{
  const int q = ((quarter_turns % 4) + 4) % 4;
  if (q == 0) {
    return grid;
  }
  const double angle = q * M_PI / 2.0;
  const double res = grid.resolution();
  const Point2 lo = grid.origin();
  const Point2 hi{lo.x + grid.width() * res, lo.y + grid.height() * res};
  // The rotated rectangle stays axis-aligned; take its min corner as the new origin.
  const Point2 c1 = rotate_about(lo, center, angle);
  const Point2 c2 = rotate_about(hi, center, angle);
  const Point2 new_origin{std::fmin(c1.x, c2.x), std::fmin(c1.y, c2.y)};
  const int new_w = (q % 2 == 0) ? grid.width() : grid.height();
  const int new_h = (q % 2 == 0) ? grid.height() : grid.width();

  std::vector<bool> cells(static_cast<std::size_t>(new_w) * new_h, false);
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      if (!grid.cells()[static_cast<std::size_t>(iy) * grid.width() + ix]) {
        continue;
      }
      const Point2 p = rotate_about(grid.cell_center(ix, iy), center, angle);
      // Cell centers land on cell centers; round instead of floor to stay
      // robust to floating-point error.
      const int nx = static_cast<int>(std::lround((p.x - new_origin.x) / res - 0.5));
      const int ny = static_cast<int>(std::lround((p.y - new_origin.y) / res - 0.5));
      if (nx >= 0 && ny >= 0 && nx < new_w && ny < new_h) {
        cells[static_cast<std::size_t>(ny) * new_w + nx] = true;
      }
    }
  }
  return FeasibleGrid(new_origin, res, new_w, new_h, std::move(cells));
}

}  // namespace effmp
