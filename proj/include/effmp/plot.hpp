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

#include "effmp/map_features.hpp"
#include "effmp/model.hpp"
#include "effmp/scene.hpp"

namespace effmp
{

/// Renders a scene as SVG: feasible cells, one past polyline per agent
/// (class "past", color by role), the ground-truth future, the top-3
/// predicted modes with confidence labels (class "mode"), and the motion
/// range circle with its goal points. Output is byte-stable for identical
/// inputs.
std::string render_svg(
  const SceneBundle & bundle, const std::optional<PredictionSet> & prediction,
  const std::optional<GoalSet> & goals);

}  // namespace effmp
