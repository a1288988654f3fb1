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

#include "effmp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "effmp/errors.hpp"
#include "effmp/rng.hpp"

namespace effmp
{

namespace
{

/// Piecewise line/arc path with exact arc-length parameterization.
struct Segment
{
  bool is_arc = false;
  // line
  Point2 start;
  Point2 dir;  // unit
  // arc
  Point2 center;
  double radius = 0.0;
  double ang0 = 0.0;
  double turn = 0.0;  // signed sweep
  double length = 0.0;
};

struct Path
{
  std::vector<Segment> segs;

  double length() const
  {
    double t = 0.0;
    for (const auto & s : segs) {
      t += s.length;
    }
    return t;
  }

  Point2 at(double s) const
  {
    double rem = s;
    for (const auto & seg : segs) {
      if (rem <= seg.length || &seg == &segs.back()) {
        if (!seg.is_arc) {
          return {seg.start.x + seg.dir.x * rem, seg.start.y + seg.dir.y * rem};
        }
        const double a = seg.ang0 + (seg.turn >= 0 ? 1.0 : -1.0) * rem / seg.radius;
        return {seg.center.x + seg.radius * std::cos(a), seg.center.y + seg.radius * std::sin(a)};
      }
      rem -= seg.length;
    }
    return segs.back().start;
  }
};

Path line_path(Point2 start, Point2 unit_dir, double len)
{
  Path p;
  p.segs.push_back({false, start, unit_dir, {}, 0.0, 0.0, 0.0, len});
  return p;
}

/// Straight approach toward `corner`, fillet arc of radius r turning by
/// `turn_angle` (signed), then a straight exit. The approach enters along
/// `u` (unit) and ends `approach_len` before the fillet begins.
Path corner_path(Point2 corner, Point2 u, double approach_len, double turn_angle, double r,
                 double exit_len)
{
  Path p;
  if (std::abs(turn_angle) < 1e-9) {
    return line_path(corner - u * approach_len, u, approach_len + exit_len);
  }
  const double tangent = r * std::tan(std::abs(turn_angle) / 2.0);
  const Point2 arc_in = corner - u * tangent;
  const Point2 approach_start = arc_in - u * approach_len;
  p.segs.push_back({false, approach_start, u, {}, 0.0, 0.0, 0.0, approach_len});

  const double side = turn_angle >= 0 ? 1.0 : -1.0;
  const Point2 normal{-u.y * side, u.x * side};  // toward the arc center
  const Point2 center = arc_in + normal * r;
  const double ang0 = std::atan2(arc_in.y - center.y, arc_in.x - center.x);
  p.segs.push_back(
    {true, {}, {}, center, r, ang0, side * std::abs(turn_angle), r * std::abs(turn_angle)});

  const double exit_heading = std::atan2(u.y, u.x) + turn_angle;
  const Point2 w{std::cos(exit_heading), std::sin(exit_heading)};
  const Point2 arc_out = corner + w * tangent;
  p.segs.push_back({false, arc_out, w, {}, 0.0, 0.0, 0.0, exit_len});
  return p;
}

struct AgentPlan
{
  Path path;
  double start_s = 0.0;
  double speed = 0.0;
};

std::vector<Point2> sample_plan(const AgentPlan & plan, int count, double dt)
{
  std::vector<Point2> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    pts.push_back(plan.path.at(plan.start_s + plan.speed * dt * i));
  }
  return pts;
}

FeasibleGrid rasterize_roads(const std::vector<std::vector<Point2>> & roads, Point2 grid_center,
                             const SyntheticSpec & spec)
{
  const double res = spec.grid_resolution_m;
  // Snap the origin to the resolution lattice so identical geometry gives
  // identical grids regardless of sub-cell center placement.
  const Point2 origin{std::floor((grid_center.x - spec.crop_radius_m) / res) * res,
                      std::floor((grid_center.y - spec.crop_radius_m) / res) * res};
  const int cells_across = static_cast<int>(std::ceil(2.0 * spec.crop_radius_m / res)) + 1;
  std::vector<bool> cells(static_cast<std::size_t>(cells_across) * cells_across, false);
  for (int iy = 0; iy < cells_across; ++iy) {
    for (int ix = 0; ix < cells_across; ++ix) {
      const Point2 c{origin.x + (ix + 0.5) * res, origin.y + (iy + 0.5) * res};
      bool feasible = false;
      for (const auto & line : roads) {
        for (std::size_t i = 0; i + 1 < line.size() && !feasible; ++i) {
          feasible = point_segment_distance(c, line[i], line[i + 1]) <= spec.road_half_width_m;
        }
        if (feasible) {
          break;
        }
      }
      if (feasible) {
        cells[static_cast<std::size_t>(iy) * cells_across + ix] = true;
      }
    }
  }
  return FeasibleGrid(origin, res, cells_across, cells_across, std::move(cells));
}

std::vector<Point2> polyline_of(const Path & path, double spacing = 1.0)
{
  std::vector<Point2> pts;
  const double len = path.length();
  const int steps = std::max(1, static_cast<int>(std::ceil(len / spacing)));
  for (int i = 0; i <= steps; ++i) {
    pts.push_back(path.at(len * i / steps));
  }
  return pts;
}

}  // namespace

std::string to_string(RoadTemplate road)
{
  switch (road) {
    case RoadTemplate::kStraight:
      return "straight";
    case RoadTemplate::kCurve:
      return "curve";
    case RoadTemplate::kIntersection:
      return "intersection";
  }
  return "straight";
}

RoadTemplate road_template_from_string(const std::string & s)
{
  if (s == "straight") {
    return RoadTemplate::kStraight;
  }
  if (s == "curve") {
    return RoadTemplate::kCurve;
  }
  if (s == "intersection") {
    return RoadTemplate::kIntersection;
  }
  throw ValidationError("unknown road template '" + s + "'");
}

void validate_spec(const SyntheticSpec & spec)
{
  if (spec.agent_count < 1) {
    throw ValidationError("agent_count must be >= 1");
  }
  if (spec.noise_sigma_m < 0.0) {
    throw ValidationError("noise sigma must be >= 0");
  }
  if (spec.speed_mps <= 0.0) {
    throw ValidationError("speed must be > 0");
  }
  if (spec.m < 2 || spec.n < 1 || spec.sample_rate_hz < 1) {
    throw ValidationError("bad m/n/hz");
  }
  if (spec.grid_resolution_m <= 0.0 || spec.crop_radius_m <= spec.road_half_width_m) {
    throw ValidationError("bad grid geometry");
  }
}

SceneBundle generate_synthetic_scene(const SyntheticSpec & spec, std::uint64_t seed)
{
  validate_spec(spec);
  Rng rng(seed);
  const double dt = 1.0 / spec.sample_rate_hz;
  const double step = spec.speed_mps * dt;
  const int total = spec.m + spec.n;
  const int agents = std::max(2, spec.agent_count);

  std::vector<std::vector<Point2>> roads;
  AgentPlan target_plan;
  std::vector<AgentPlan> other_plans;  // ego first

  switch (spec.road) {
    case RoadTemplate::kStraight: {
      // Horizontal corridor; target drives +x on a lane offset. Start x is a
      // half-integer so per-step deltas stay exact in binary.
      const double lane = uniform_in(rng, -1.5, 1.5);
      const Point2 start{-std::round(spec.m * step), lane};
      target_plan = {line_path(start, {1.0, 0.0}, (total + 4) * step), 0.0, spec.speed_mps};
      roads.push_back({{-3.0 * spec.crop_radius_m, 0.0}, {3.0 * spec.crop_radius_m, 0.0}});

      // Ego trails the target in the same lane.
      const double ego_speed = spec.speed_mps * uniform_in(rng, 0.8, 1.1);
      other_plans.push_back(
        {line_path({start.x - uniform_in(rng, 8.0, 14.0), lane}, {1.0, 0.0}, 6.0 * spec.crop_radius_m),
         0.0, ego_speed});
      for (int i = 2; i < agents; ++i) {
        const bool oncoming = uniform01(rng) < 0.4;
        const double off = uniform_in(rng, 0.5, 2.5) * (oncoming ? 1.0 : -1.0);
        const double sx = uniform_in(rng, -25.0, 25.0);
        const Point2 dir = oncoming ? Point2{-1.0, 0.0} : Point2{1.0, 0.0};
        other_plans.push_back({line_path({sx, off}, dir, 6.0 * spec.crop_radius_m), 0.0,
                               spec.speed_mps * uniform_in(rng, 0.5, 1.2)});
      }
      break;
    }
    case RoadTemplate::kCurve: {
      const double radius = uniform_in(rng, 30.0, 60.0);
      const double side = uniform01(rng) < 0.5 ? 1.0 : -1.0;
      const Point2 center{0.0, side * radius};
      const double drive_span = (total + 4) * step / radius;
      const double ang0 = -side * M_PI / 2.0;
      Path arc;
      arc.segs.push_back({true, {}, {}, center, radius, ang0, side * drive_span,
                          radius * drive_span});
      target_plan = {arc, 0.0, spec.speed_mps};

      // The road arc extends 30 m past the driven arc on both ends.
      const double margin = 30.0 / radius;
      Path road_arc;
      road_arc.segs.push_back({true, {}, {}, center, radius, ang0 - side * margin,
                               side * (drive_span + 2.0 * margin),
                               radius * (drive_span + 2.0 * margin)});
      roads.push_back(polyline_of(road_arc));

      // Ego trails the target along the same arc (negative offsets extrapolate).
      other_plans.push_back({arc, -uniform_in(rng, 8.0, 14.0),
                             spec.speed_mps * uniform_in(rng, 0.8, 1.05)});
      for (int i = 2; i < agents; ++i) {
        Path lane_arc;
        const double r2 = radius + uniform_in(rng, -2.5, 2.5);
        lane_arc.segs.push_back({true, {}, {}, center, r2, ang0 + uniform_in(rng, -0.2, 0.2),
                                 side * drive_span, r2 * drive_span});
        other_plans.push_back(
          {lane_arc, uniform_in(rng, 0.0, 10.0), spec.speed_mps * uniform_in(rng, 0.5, 1.2)});
      }
      break;
    }
    case RoadTemplate::kIntersection: {
      const Point2 junction{uniform_in(rng, -4.0, 4.0), uniform_in(rng, -4.0, 4.0)};
      const double arm_len = 2.5 * spec.crop_radius_m;
      // Exits relative to the +x approach: straight, left, right. Angles are
      // jittered per scene so the map carries information history cannot.
      struct Exit
      {
        double angle;
        bool present;
      };
      std::vector<Exit> exits;
      do {
        exits = {{uniform_in(rng, -0.35, 0.35), uniform01(rng) < 0.7},
                 {M_PI / 2.0 + uniform_in(rng, -0.5, 0.5), uniform01(rng) < 0.7},
                 {-M_PI / 2.0 + uniform_in(rng, -0.5, 0.5), uniform01(rng) < 0.7}};
      } while (!exits[0].present && !exits[1].present && !exits[2].present);

      roads.push_back({junction - Point2{arm_len, 0.0}, junction});  // approach arm
      for (const auto & e : exits) {
        if (e.present) {
          roads.push_back({junction, junction + Point2{std::cos(e.angle), std::sin(e.angle)} * arm_len});
        }
      }

      std::vector<int> open;
      for (int i = 0; i < 3; ++i) {
        if (exits[i].present) {
          open.push_back(i);
        }
      }
      const Exit chosen = exits[open[uniform_index(rng, open.size())]];
      const double pre_corner = uniform_in(rng, 4.0, 10.0);
      const double fillet = 6.0;
      Path tpath = corner_path(junction, {1.0, 0.0}, (spec.m - 1) * step + pre_corner + 10.0,
                               chosen.angle, fillet, arm_len);
      target_plan = {tpath, 10.0, spec.speed_mps};

      other_plans.push_back({line_path(tpath.at(0.0) - Point2{uniform_in(rng, 8.0, 14.0), 0.0},
                                       {1.0, 0.0}, arm_len),
                             0.0, spec.speed_mps * uniform_in(rng, 0.7, 1.0)});
      for (int i = 2; i < agents; ++i) {
        const int arm = static_cast<int>(uniform_index(rng, open.size()));
        const double a = exits[open[arm]].angle;
        const Point2 dir{std::cos(a), std::sin(a)};
        const bool inbound = uniform01(rng) < 0.5;
        const double d0 = uniform_in(rng, 10.0, 35.0);
        const Point2 s0 = junction + dir * d0;
        other_plans.push_back({line_path(s0, inbound ? dir * -1.0 : dir, arm_len), 0.0,
                               spec.speed_mps * uniform_in(rng, 0.4, 1.1)});
      }
      break;
    }
  }

  const auto target_pts = sample_plan(target_plan, total, dt);
  Scene scene;
  {
    std::ostringstream id;
    id << "syn_" << to_string(spec.road) << "_" << std::hex << seed;
    scene.scene_id = id.str();
  }
  scene.m = spec.m;
  scene.n = spec.n;
  scene.sample_rate_hz = spec.sample_rate_hz;
  scene.target_id = "target";

  auto make_track = [&](const std::string & id, AgentRole role, std::vector<Point2> observed) {
    AgentTrack t;
    t.agent_id = id;
    t.role = role;
    for (auto & p : observed) {
      if (spec.noise_sigma_m > 0.0) {
        p.x += spec.noise_sigma_m * normal01(rng);
        p.y += spec.noise_sigma_m * normal01(rng);
      }
    }
    t.observed = std::move(observed);
    t.valid_mask.assign(spec.m, true);
    return normalize_track(std::move(t));
  };

  const auto ego_pts = sample_plan(other_plans[0], spec.m, dt);
  scene.tracks.push_back(make_track("ego", AgentRole::kEgo, ego_pts));
  scene.tracks.push_back(make_track(
    "target", AgentRole::kTarget, {target_pts.begin(), target_pts.begin() + spec.m}));
  for (std::size_t i = 1; i < other_plans.size(); ++i) {
    scene.tracks.push_back(make_track(
      "agent" + std::to_string(i + 1), AgentRole::kOther, sample_plan(other_plans[i], spec.m, dt)));
  }
  scene.future.assign(target_pts.begin() + spec.m, target_pts.end());

  SceneBundle bundle{std::move(scene), rasterize_roads(roads, target_pts[spec.m - 1], spec)};
  validate_bundle(bundle);
  return bundle;
}

}  // namespace effmp
