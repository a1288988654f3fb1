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
#include <string>

#include "effmp/scene.hpp"

namespace effmp
{

enum class RoadTemplate { kStraight, kCurve, kIntersection };

std::string to_string(RoadTemplate road);
RoadTemplate road_template_from_string(const std::string & s);

/// Desk-scale scene generator parameters. agent_count is the total number of
/// tracks including ego and target; a request for a single agent is promoted
/// to the ego+target pair the scene invariants require.
struct SyntheticSpec
{
  RoadTemplate road = RoadTemplate::kStraight;
  int agent_count = 3;
  double noise_sigma_m = 0.0;  // observation noise; the future stays clean
  double speed_mps = 10.0;     // target speed, exact
  int m = 20;
  int n = 30;
  int sample_rate_hz = 10;
  double crop_radius_m = 50.0;  // grid half-extent around the target's last observation
  double grid_resolution_m = 0.5;
  double road_half_width_m = 4.0;
};

void validate_spec(const SyntheticSpec & spec);

/// Pure in (spec, seed): identical inputs give byte-identical bundles.
SceneBundle generate_synthetic_scene(const SyntheticSpec & spec, std::uint64_t seed);

}  // namespace effmp
