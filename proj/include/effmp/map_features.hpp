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

#include <cstdint>
#include <vector>

#include "effmp/scene.hpp"

namespace effmp
{

/// Smoothed motion of an agent at its last observed frame.
struct DynamicState
{
  double heading = 0.0;  // radians in (-pi, pi]
  double speed = 0.0;    // m/s, >= 0
};

/// Geometric recency weighting: weight lambda^(T-t) for element t of T+1.
struct SmoothingConfig
{
  double lambda = 0.9;  // forgetting factor in (0, 1)
  bool normalize = true;
};

struct GoalSamplerConfig
{
  int r = 32;                      // number of goal points
  double horizon_s = 3.0;          // H
  double min_radius_m = 2.0;       // floor so a stopped vehicle still gets local goals
  double forward_cone_deg = 180.0;
  double speed_gate_mps = 1.0;     // cone filter only applies above this speed
  std::uint64_t seed = 0;
};

/// Sampled plausible end points for the target agent.
struct GoalSet
{
  Point2 center;       // target's last observed position
  double radius = 0.0; // motion-range circle
  double heading = 0.0;
  std::vector<Point2> points;  // <= r, each in a feasible cell within radius
};

/// Per-step headings (m-1 values) from the full-quadrant arctangent of the
/// displacement. A zero-displacement step repeats the previous heading; a
/// leading zero step yields 0.
std::vector<double> heading_sequence(const AgentTrack & track);

/// Per-step speeds (m-1 nonnegative values): step length times the sample rate.
std::vector<double> speed_sequence(const AgentTrack & track, int sample_rate_hz);

/// Recency-weighted estimate of the last value of a sequence. With
/// normalize=false this is the raw weighted sum; with normalize=true it is
/// divided by the weight total, so a constant sequence is a fixpoint.
double smooth_last(const std::vector<double> & seq, const SmoothingConfig & cfg);

/// Smooths an angle sequence on the unit circle (sin and cos separately,
/// recombined by atan2) to stay correct across the +-pi wrap.
double smooth_last_circular(const std::vector<double> & angles, const SmoothingConfig & cfg);

DynamicState estimate_dynamic_state(
  const AgentTrack & track, int sample_rate_hz, const SmoothingConfig & cfg);

/// Radius of the reachable disc: max(horizon * speed, min_radius).
double motion_range(const DynamicState & state, const GoalSamplerConfig & cfg);

/// Draws up to cfg.r feasible cell centers inside the motion-range disc.
/// When state.speed exceeds the gate, candidates behind the heading cone are
/// rejected (non-holonomic filter). Deterministic given cfg.seed. Throws
/// NoFeasibleCellsError after 50*r rejected attempts with nothing accepted.
GoalSet sample_goal_points(
  const FeasibleGrid & grid, const DynamicState & state, const Point2 & center,
  const GoalSamplerConfig & cfg);

/// Goal points in the target-centric frame: translated to the goal center and
/// rotated so the heading maps to +x.
std::vector<Point2> goal_offsets(const GoalSet & goals);

}  // namespace effmp
