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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "effmp/errors.hpp"
#include "effmp/map_features.hpp"
#include "effmp/rng.hpp"
#include "support/test_helpers.hpp"

using namespace effmp;
using effmp::testing::make_linear_track;
using effmp::testing::make_track;

TEST_CASE("heading sequence")
{
  SUBCASE("+x axis gives zeros")
  {
    const auto t = make_linear_track("a", AgentRole::kTarget, {0, 0}, {1, 0}, 5);
    for (const double h : heading_sequence(t)) {
      CHECK(h == doctest::Approx(0.0));
    }
  }
  SUBCASE("+y axis gives pi/2")
  {
    const auto t = make_linear_track("a", AgentRole::kTarget, {0, 0}, {0, 1}, 5);
    for (const double h : heading_sequence(t)) {
      CHECK(h == doctest::Approx(M_PI / 2.0));
    }
  }
  SUBCASE("full-quadrant: step (-1,-1) gives -3pi/4")
  {
    const auto t = make_track("a", AgentRole::kTarget, {{0, 0}, {-1, -1}});
    CHECK(heading_sequence(t)[0] == doctest::Approx(-3.0 * M_PI / 4.0).epsilon(1e-12));
  }
  SUBCASE("zero displacement repeats previous; leading zero step yields 0")
  {
    const auto t = make_track("a", AgentRole::kTarget,
                              {{0, 0}, {0, 0}, {0, 1}, {0, 1}, {1, 1}});
    const auto h = heading_sequence(t);
    CHECK(h[0] == doctest::Approx(0.0));
    CHECK(h[1] == doctest::Approx(M_PI / 2.0));
    CHECK(h[2] == doctest::Approx(M_PI / 2.0));  // repeated
    CHECK(h[3] == doctest::Approx(0.0));
  }
  SUBCASE("needs two valid observations")
  {
    AgentTrack t;
    t.agent_id = "x";
    t.observed = {{0, 0}};
    t.valid_mask = {true};
    CHECK_THROWS_AS(heading_sequence(t), InsufficientObservationsError);
  }
}

TEST_CASE("speed sequence")
{
  SUBCASE("unit steps at 10 Hz give 10 m/s")
  {
    const auto t = make_linear_track("a", AgentRole::kTarget, {0, 0}, {1, 0}, 6);
    for (const double v : speed_sequence(t, 10)) {
      CHECK(v == doctest::Approx(10.0).epsilon(1e-12));
    }
  }
  SUBCASE("stationary gives zeros")
  {
    const auto t = make_linear_track("a", AgentRole::kTarget, {3, 4}, {0, 0}, 6);
    for (const double v : speed_sequence(t, 10)) {
      CHECK(v == doctest::Approx(0.0));
    }
  }
  SUBCASE("half-meter steps at 10 Hz give 5 m/s")
  {
    const auto t = make_linear_track("a", AgentRole::kTarget, {0, 0}, {0.3, 0.4}, 6);
    for (const double v : speed_sequence(t, 10)) {
      CHECK(v == doctest::Approx(5.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("forgetting-factor smoothing")
{
  SUBCASE("constant sequence is a fixpoint when normalized")
  {
    const SmoothingConfig cfg{0.7, true};
    CHECK(smooth_last({3.25, 3.25, 3.25, 3.25}, cfg) == doctest::Approx(3.25).epsilon(1e-15));
  }
  SUBCASE("worked example: [0,0,4], lambda=0.5, normalized -> 16/7")
  {
    const SmoothingConfig cfg{0.5, true};
    CHECK(smooth_last({0.0, 0.0, 4.0}, cfg) == doctest::Approx(16.0 / 7.0).epsilon(1e-12));
  }
  SUBCASE("worked example: raw weighted sum -> 4.0")
  {
    const SmoothingConfig cfg{0.5, false};
    CHECK(smooth_last({0.0, 0.0, 4.0}, cfg) == doctest::Approx(4.0).epsilon(1e-12));
  }
  SUBCASE("recency: last element strictly max -> above unweighted mean")
  {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
      const double lambda = uniform_in(rng, 0.05, 0.95);
      std::vector<double> seq;
      const int len = 2 + static_cast<int>(uniform_index(rng, 8));
      double mx = -1e9;
      for (int i = 0; i + 1 < len; ++i) {
        seq.push_back(uniform_in(rng, -1.0, 1.0));
        mx = std::fmax(mx, seq.back());
      }
      seq.push_back(mx + uniform_in(rng, 0.1, 1.0));  // strict max at the end
      double mean = 0.0;
      for (const double v : seq) {
        mean += v;
      }
      mean /= static_cast<double>(seq.size());
      CHECK(smooth_last(seq, {lambda, true}) > mean);
    }
  }
  SUBCASE("circular: constant angle is returned exactly, including near the wrap")
  {
    for (const double angle : {0.0, 1.0, -2.5, M_PI - 1e-7, -M_PI + 1e-7, M_PI}) {
      const double got = smooth_last_circular({angle, angle, angle, angle}, {0.8, true});
      CHECK(std::abs(wrap_angle(got - angle)) < 1e-9);
    }
  }
  SUBCASE("empty sequence rejected, bad lambda rejected")
  {
    CHECK_THROWS_AS(smooth_last({}, {0.5, true}), ValidationError);
    CHECK_THROWS_AS(smooth_last({1.0}, {1.0, true}), ValidationError);
    CHECK_THROWS_AS(smooth_last({1.0}, {0.0, true}), ValidationError);
  }
}

TEST_CASE("dynamic state estimation")
{
  SUBCASE("straight +x at 10 m/s")
  {
    const auto t = make_linear_track("a", AgentRole::kTarget, {0, 0}, {1, 0}, 20);
    const auto st = estimate_dynamic_state(t, 10, {0.9, true});
    CHECK(st.heading == doctest::Approx(0.0));
    CHECK(st.speed == doctest::Approx(10.0).epsilon(1e-12));
  }
  SUBCASE("stationary: zero heading by convention, zero speed")
  {
    const auto t = make_linear_track("a", AgentRole::kTarget, {5, 5}, {0, 0}, 20);
    const auto st = estimate_dynamic_state(t, 10, {0.9, true});
    CHECK(st.heading == doctest::Approx(0.0));
    CHECK(st.speed == doctest::Approx(0.0));
  }
  SUBCASE("90-degree turn: estimate between the legs, closer to the final one")
  {
    std::vector<Point2> pts;
    for (int i = 0; i < 10; ++i) {
      pts.push_back({static_cast<double>(i), 0.0});
    }
    for (int i = 1; i <= 10; ++i) {
      pts.push_back({9.0, static_cast<double>(i)});
    }
    const auto t = make_track("a", AgentRole::kTarget, pts);
    const auto st = estimate_dynamic_state(t, 10, {0.9, true});
    CHECK(st.heading > 0.0);
    CHECK(st.heading < M_PI / 2.0);
    CHECK(st.heading > M_PI / 4.0);  // recency favors the 90-degree leg
  }
}

TEST_CASE("motion range")
{
  GoalSamplerConfig cfg;
  CHECK(motion_range({0.0, 10.0}, cfg) == doctest::Approx(30.0));  // H=3
  CHECK(motion_range({0.0, 0.0}, cfg) == doctest::Approx(2.0));    // floor
  CHECK(motion_range({0.0, 1.0}, cfg) == doctest::Approx(3.0));    // max(3, 2)
}

TEST_CASE("goal sampling")
{
  const FeasibleGrid full = testing::make_full_grid(60.0, 1.0);

  SUBCASE("fully feasible, gate off: r points inside the radius")
  {
    GoalSamplerConfig cfg;
    cfg.r = 32;
    cfg.seed = 5;
    const GoalSet goals = sample_goal_points(full, {0.3, 0.0}, {0.25, -0.25}, cfg);
    CHECK(goals.points.size() == 32);
    CHECK(goals.radius == doctest::Approx(2.0));
    for (const auto & p : goals.points) {
      CHECK(distance(p, goals.center) <= goals.radius + 1e-12);
      CHECK(full.feasible_at(p));
    }
  }
  SUBCASE("half-plane filter: every accepted point is strictly ahead")
  {
    GoalSamplerConfig cfg;
    cfg.r = 64;
    cfg.seed = 11;
    const DynamicState state{0.0, 8.0};  // heading +x, above the gate
    const GoalSet goals = sample_goal_points(full, state, {0.3, 0.7}, cfg);
    CHECK(!goals.points.empty());
    for (const auto & p : goals.points) {
      const Point2 off = p - goals.center;
      CHECK(off.x > 0.0);  // positive inner product with the heading direction
    }
  }
  SUBCASE("region behind only + moving agent -> no feasible cells")
  {
    // feasible only for x < -5, agent at origin heading +x
    const int cells = 40;
    std::vector<bool> mask(cells * cells, false);
    for (int iy = 0; iy < cells; ++iy) {
      for (int ix = 0; ix < 10; ++ix) {
        mask[static_cast<std::size_t>(iy) * cells + ix] = true;
      }
    }
    const FeasibleGrid grid({-20.0, -20.0}, 1.0, cells, cells, mask);
    GoalSamplerConfig cfg;
    cfg.seed = 2;
    CHECK_THROWS_AS(sample_goal_points(grid, {0.0, 10.0}, {0.0, 0.0}, cfg), NoFeasibleCellsError);
  }
  SUBCASE("determinism")
  {
    GoalSamplerConfig cfg;
    cfg.r = 16;
    cfg.seed = 77;
    const GoalSet a = sample_goal_points(full, {1.0, 6.0}, {2.0, 3.0}, cfg);
    const GoalSet b = sample_goal_points(full, {1.0, 6.0}, {2.0, 3.0}, cfg);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
      CHECK(a.points[i].x == b.points[i].x);
      CHECK(a.points[i].y == b.points[i].y);
    }
  }
  SUBCASE("property: 1000 random configurations stay feasible, in range, in cone")
  {
    Rng rng(4242);
    for (int trial = 0; trial < 1000; ++trial) {
      CAPTURE(trial);
      // random corridor grid
      const int cells = 50;
      const double res = uniform_in(rng, 0.4, 1.5);
      const double band_y0 = uniform_in(rng, 5.0, 20.0);
      const double band_y1 = band_y0 + uniform_in(rng, 6.0, 20.0);
      std::vector<bool> mask(cells * cells, false);
      for (int iy = 0; iy < cells; ++iy) {
        for (int ix = 0; ix < cells; ++ix) {
          const double cy = iy + 0.5;
          if (cy >= band_y0 && cy <= band_y1) {
            mask[static_cast<std::size_t>(iy) * cells + ix] = true;
          }
        }
      }
      const FeasibleGrid grid({-cells * res / 2.0, -cells * res / 2.0}, res, cells, cells, mask);
      const DynamicState state{uniform_in(rng, -M_PI, M_PI), uniform_in(rng, 0.0, 12.0)};
      GoalSamplerConfig cfg;
      cfg.r = 1 + static_cast<int>(uniform_index(rng, 48));
      cfg.forward_cone_deg = uniform_in(rng, 60.0, 360.0);
      cfg.seed = rng();
      const Point2 center{uniform_in(rng, -8.0, 8.0),
                          grid.origin().y + uniform_in(rng, band_y0, band_y1) * res};
      GoalSet goals;
      try {
        goals = sample_goal_points(grid, state, center, cfg);
      } catch (const NoFeasibleCellsError &) {
        continue;  // legitimately empty region
      }
      CHECK(static_cast<int>(goals.points.size()) <= cfg.r);
      const bool cone_active = state.speed > cfg.speed_gate_mps;
      for (const auto & p : goals.points) {
        CHECK(grid.feasible_at(p));
        CHECK(distance(p, goals.center) <= goals.radius + 1e-12);
        if (cone_active) {
          const Point2 off = p - goals.center;
          const double dev = std::abs(wrap_angle(std::atan2(off.y, off.x) - state.heading));
          CHECK(dev <= cfg.forward_cone_deg * M_PI / 360.0 + 1e-12);
        }
      }
    }
  }
  SUBCASE("uniformity: mean offset of 10k samples is near the center")
  {
    GoalSamplerConfig cfg;
    cfg.r = 10000;
    cfg.seed = 9;
    const DynamicState state{0.0, 0.5};  // below the gate: no cone filter
    const GoalSet goals = sample_goal_points(full, state, {0.4, 0.6}, cfg);
    REQUIRE(goals.points.size() == 10000);
    Point2 mean{0, 0};
    for (const auto & p : goals.points) {
      mean = mean + (p - goals.center);
    }
    mean = mean * (1.0 / 10000.0);
    CHECK(mean.norm() < 0.05 * goals.radius);
  }
  SUBCASE("center outside grid rejected")
  {
    GoalSamplerConfig cfg;
    CHECK_THROWS_AS(sample_goal_points(full, {0.0, 1.0}, {1000.0, 0.0}, cfg), ValidationError);
  }
}

TEST_CASE("goal offsets")
{
  GoalSet goals;
  goals.center = {10.0, 5.0};
  goals.heading = M_PI / 2.0;
  goals.radius = 10.0;
  goals.points = {{10.0, 5.0}, {10.0, 8.0}};
  const auto offsets = goal_offsets(goals);
  CHECK(offsets[0].x == doctest::Approx(0.0));
  CHECK(offsets[0].y == doctest::Approx(0.0));
  // 3 m north of center with heading pi/2 -> (3, 0) in the local frame
  CHECK(offsets[1].x == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(offsets[1].y == doctest::Approx(0.0).epsilon(1e-12));

  SUBCASE("5 m ahead along heading -> (5, 0)")
  {
    GoalSet g2;
    g2.center = {1.0, 2.0};
    g2.heading = 0.7;
    g2.points = {{1.0 + 5.0 * std::cos(0.7), 2.0 + 5.0 * std::sin(0.7)}};
    const auto off = goal_offsets(g2);
    CHECK(off[0].x == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(off[0].y == doctest::Approx(0.0).epsilon(1e-10));
  }
}

TEST_CASE("uniformity with gate off at speed zero")
{
  // speed 0 keeps the cone filter off entirely
  const FeasibleGrid full = testing::make_full_grid(30.0, 0.5);
  GoalSamplerConfig cfg;
  cfg.r = 10000;
  cfg.seed = 123;
  const GoalSet goals = sample_goal_points(full, {2.0, 0.0}, {0.2, -0.3}, cfg);
  Point2 mean{0, 0};
  for (const auto & p : goals.points) {
    mean = mean + (p - goals.center);
  }
  mean = mean * (1.0 / static_cast<double>(goals.points.size()));
  CHECK(mean.norm() < 0.05 * goals.radius);
}
