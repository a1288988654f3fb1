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

#include "effmp/map_features.hpp"

#include <algorithm>
#include <cmath>

#include "effmp/errors.hpp"
#include "effmp/rng.hpp"

namespace effmp
{

namespace
{

void require_two_valid(const AgentTrack & track)
{
  if (track.observed.size() < 2 || track.valid_count() < 2) {
    throw InsufficientObservationsError("track " + track.agent_id);
  }
}

void validate_smoothing(const SmoothingConfig & cfg)
{
  if (!(cfg.lambda > 0.0 && cfg.lambda < 1.0)) {
    throw ValidationError("forgetting factor must be in (0, 1)");
  }
}

void validate_sampler(const GoalSamplerConfig & cfg)
{
  if (cfg.r < 1) {
    throw ValidationError("goal count r must be >= 1");
  }
  if (cfg.horizon_s <= 0.0) {
    throw ValidationError("horizon must be > 0");
  }
  if (!(cfg.forward_cone_deg > 0.0 && cfg.forward_cone_deg <= 360.0)) {
    throw ValidationError("forward cone must be in (0, 360] degrees");
  }
}

}  // namespace

std::vector<double> heading_sequence(const AgentTrack & track)
{
  require_two_valid(track);
  std::vector<double> headings;
  headings.reserve(track.observed.size() - 1);
  double prev = 0.0;
  for (std::size_t i = 1; i < track.observed.size(); ++i) {
    const Point2 d = track.observed[i] - track.observed[i - 1];
    if (d.x == 0.0 && d.y == 0.0) {
      headings.push_back(prev);
    } else {
      prev = std::atan2(d.y, d.x);
      headings.push_back(prev);
    }
  }
  return headings;
}

std::vector<double> speed_sequence(const AgentTrack & track, int sample_rate_hz)
{
  require_two_valid(track);
  std::vector<double> speeds;
  speeds.reserve(track.observed.size() - 1);
  for (std::size_t i = 1; i < track.observed.size(); ++i) {
    speeds.push_back(distance(track.observed[i], track.observed[i - 1]) * sample_rate_hz);
  }
  return speeds;
}

double smooth_last(const std::vector<double> & seq, const SmoothingConfig & cfg)
{
  validate_smoothing(cfg);
  if (seq.empty()) {
    throw ValidationError("cannot smooth an empty sequence");
  }
  const std::size_t last = seq.size() - 1;
  if (!cfg.normalize) {
    // the literal weighted sum
    double acc = 0.0;
    for (std::size_t t = 0; t < seq.size(); ++t) {
      acc += std::pow(cfg.lambda, static_cast<double>(last - t)) * seq[t];
    }
    return acc;
  }
  // Incremental weighted mean: the correction term vanishes identically for a
  // constant sequence, so constants are exact fixpoints.
  double mean = 0.0;
  double wsum = 0.0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const double w = std::pow(cfg.lambda, static_cast<double>(last - t));
    wsum += w;
    mean += (seq[t] - mean) * (w / wsum);
  }
  return mean;
}

double smooth_last_circular(const std::vector<double> & angles, const SmoothingConfig & cfg)
{
  validate_smoothing(cfg);
  if (angles.empty()) {
    throw ValidationError("cannot smooth an empty sequence");
  }
  const std::size_t last = angles.size() - 1;
  double s = 0.0;
  double c = 0.0;
  for (std::size_t t = 0; t < angles.size(); ++t) {
    const double w = std::pow(cfg.lambda, static_cast<double>(last - t));
    s += w * std::sin(angles[t]);
    c += w * std::cos(angles[t]);
  }
  if (s == 0.0 && c == 0.0) {
    return 0.0;
  }
  return std::atan2(s, c);
}

DynamicState estimate_dynamic_state(
  const AgentTrack & track, int sample_rate_hz, const SmoothingConfig & cfg)
{
  DynamicState state;
  state.heading = smooth_last_circular(heading_sequence(track), cfg);
  state.speed = std::max(0.0, smooth_last(speed_sequence(track, sample_rate_hz), cfg));
  return state;
}

double motion_range(const DynamicState & state, const GoalSamplerConfig & cfg)
{
  validate_sampler(cfg);
  return std::max(cfg.horizon_s * state.speed, cfg.min_radius_m);
}

GoalSet sample_goal_points(
  const FeasibleGrid & grid, const DynamicState & state, const Point2 & center,
  const GoalSamplerConfig & cfg)
{
  validate_sampler(cfg);
  if (!grid.in_bounds(center)) {
    throw ValidationError("goal sampling center outside grid bounds");
  }
  GoalSet goals;
  goals.center = center;
  goals.heading = state.heading;
  goals.radius = motion_range(state, cfg);

  const bool cone_active = state.speed > cfg.speed_gate_mps;
  const double half_cone = cfg.forward_cone_deg * M_PI / 360.0;
  const double radius = goals.radius;

  // Candidates are drawn uniformly over the disc (rejection over a bounding
  // square in continuous coordinates) and snapped to the containing cell.
  // Draws happen in the heading-aligned frame, so rotating the scene and grid
  // together rotates the accepted goal set with them.
  Rng rng(cfg.seed);
  const double ch = std::cos(state.heading);
  const double sh = std::sin(state.heading);
  const long max_attempts = 50L * cfg.r;
  long attempts = 0;
  while (static_cast<int>(goals.points.size()) < cfg.r && attempts < max_attempts) {
    ++attempts;
    const double ox = uniform_in(rng, -radius, radius);
    const double oy = uniform_in(rng, -radius, radius);
    if (ox * ox + oy * oy > radius * radius) {
      continue;
    }
    const Point2 probe{center.x + ch * ox - sh * oy, center.y + sh * ox + ch * oy};
    const auto [ix, iy] = grid.cell_of(probe);
    if (!grid.feasible_cell(ix, iy)) {
      continue;
    }
    const Point2 candidate = grid.cell_center(ix, iy);
    const Point2 offset = candidate - center;
    if (offset.norm() > radius) {
      continue;  // boundary cell whose center pokes outside the disc
    }
    if (cone_active && !(offset.x == 0.0 && offset.y == 0.0)) {
      const double deviation = std::abs(wrap_angle(std::atan2(offset.y, offset.x) - state.heading));
      if (deviation >= half_cone) {
        continue;
      }
    }
    goals.points.push_back(candidate);
  }
  if (goals.points.empty()) {
    throw NoFeasibleCellsError("no feasible cell in the motion-range region");
  }
  return goals;
}

std::vector<Point2> goal_offsets(const GoalSet & goals)
{
  std::vector<Point2> offsets;
  offsets.reserve(goals.points.size());
  for (const auto & p : goals.points) {
    offsets.push_back(rotate(p - goals.center, -goals.heading));
  }
  return offsets;
}

}  // namespace effmp
