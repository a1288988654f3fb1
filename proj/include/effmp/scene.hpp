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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "effmp/geometry.hpp"

namespace effmp
{

enum class AgentRole { kEgo, kTarget, kOther };

std::string to_string(AgentRole role);
AgentRole role_from_string(const std::string & s);

/// One agent's observed history. Slots where valid_mask is false hold the
/// last valid position (leading invalid slots hold the first valid one).
struct AgentTrack
{
  std::string agent_id;
  AgentRole role = AgentRole::kOther;
  std::vector<Point2> observed;
  std::vector<bool> valid_mask;

  std::size_t valid_count() const;
  Point2 last_observed() const { return observed.back(); }
};

/// Re-fills masked-out slots from the nearest valid observation and checks
/// the track invariants (>= 2 valid entries, finite coordinates).
AgentTrack normalize_track(AgentTrack track);

struct Scene
{
  std::string scene_id;
  std::vector<AgentTrack> tracks;
  std::string target_id;
  std::vector<Point2> future;  // empty at pure inference, else length n
  int sample_rate_hz = 10;
  int m = 20;  // observed steps
  int n = 30;  // predicted steps

  const AgentTrack & target() const;
  const AgentTrack & ego() const;
  std::size_t target_index() const;

  double observed_span_s() const { return static_cast<double>(m) / sample_rate_hz; }
  double horizon_s() const { return static_cast<double>(n) / sample_rate_hz; }
};

void validate_scene(const Scene & scene);

/// Binarized occupancy of driveable space. Cell (ix, iy) covers the square
/// [origin.x + ix*res, origin.x + (ix+1)*res) x [origin.y + iy*res, ...).
/// Lookups bump a probe counter so tests can assert which code paths touch
/// the map.
class FeasibleGrid
{
public:
  FeasibleGrid() = default;
  FeasibleGrid(Point2 origin, double resolution, int width, int height, std::vector<bool> cells);

  FeasibleGrid(const FeasibleGrid & other);
  FeasibleGrid & operator=(const FeasibleGrid & other);

  const Point2 & origin() const { return origin_; }
  double resolution() const { return resolution_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<bool> & cells() const { return cells_; }

  bool cell_in_bounds(int ix, int iy) const
  {
    return ix >= 0 && iy >= 0 && ix < width_ && iy < height_;
  }
  bool in_bounds(const Point2 & p) const;
  std::pair<int, int> cell_of(const Point2 & p) const;
  Point2 cell_center(int ix, int iy) const
  {
    return {origin_.x + (ix + 0.5) * resolution_, origin_.y + (iy + 0.5) * resolution_};
  }

  /// Feasibility of one cell; out-of-range indices are infeasible.
  bool feasible_cell(int ix, int iy) const;
  /// Feasibility of the cell containing a world point; out of bounds is infeasible.
  bool feasible_at(const Point2 & p) const;

  std::uint64_t probe_count() const { return probes_.load(std::memory_order_relaxed); }

private:
  Point2 origin_;
  double resolution_ = 1.0;
  int width_ = 0;
  int height_ = 0;
  std::vector<bool> cells_;  // row-major, index = iy * width + ix
  mutable std::atomic<std::uint64_t> probes_{0};
};

struct SceneBundle
{
  Scene scene;
  FeasibleGrid grid;
};

/// Checks scene invariants plus the bundle one: every observed point of the
/// target agent lies inside the grid.
void validate_bundle(const SceneBundle & bundle);

// Text formats. Coordinates are written with 6 fractional digits, which makes
// save -> load -> save byte-stable.
Scene load_scene_file(const std::filesystem::path & path);
void save_scene_file(const Scene & scene, const std::filesystem::path & path);
FeasibleGrid load_grid_file(const std::filesystem::path & path);
void save_grid_file(const FeasibleGrid & grid, const std::filesystem::path & path);

/// Loads a .bundle manifest (two lines: `scene <path>` and `grid <path>`,
/// relative to the manifest) and validates the result.
SceneBundle load_scene_bundle(const std::filesystem::path & path);

/// Writes `<stem>.scene`, `<stem>.grid` and the manifest at `path`.
void save_scene_bundle(const SceneBundle & bundle, const std::filesystem::path & path);

/// Rotates every track and the future by quarter_turns * 90 degrees about `center`.
Scene rotate_scene(const Scene & scene, const Point2 & center, int quarter_turns);

/// Rotates the grid by quarter_turns * 90 degrees about `center`. Quarter
/// turns map the cell lattice onto itself, so feasibility is preserved cell
/// for cell.
FeasibleGrid rotate_grid(const FeasibleGrid & grid, const Point2 & center, int quarter_turns);

}  // namespace effmp
