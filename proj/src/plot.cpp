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

#include "effmp/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <vector>

namespace effmp
{

namespace
{

constexpr double kScale = 8.0;  // px per meter

struct Canvas
{
  double min_x;
  double max_y;

  double x(double wx) const { return (wx - min_x) * kScale; }
  double y(double wy) const { return (max_y - wy) * kScale; }  // SVG y grows downward
};

std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

const char * role_color(AgentRole role)
{
  switch (role) {
    case AgentRole::kEgo:
      return "#d62728";  // red
    case AgentRole::kTarget:
      return "#1f77b4";  // blue
    case AgentRole::kOther:
      return "#2ca02c";  // green
  }
  return "#2ca02c";
}

void polyline(std::ostringstream & svg, const Canvas & c, const std::vector<Point2> & pts,
              const std::string & cls, const std::string & color, double width,
              const std::string & dash = "")
{
  svg << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"" << num(width) << "\"";
  if (!dash.empty()) {
    svg << " stroke-dasharray=\"" << dash << "\"";
  }
  svg << " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    svg << (i ? " " : "") << num(c.x(pts[i].x)) << ',' << num(c.y(pts[i].y));
  }
  svg << "\"/>\n";
}

}  // namespace

std::string render_svg(
  const SceneBundle & bundle, const std::optional<PredictionSet> & prediction,
  const std::optional<GoalSet> & goals)
{
  const FeasibleGrid & grid = bundle.grid;
  const Scene & scene = bundle.scene;
  const double res = grid.resolution();
  const Canvas c{grid.origin().x, grid.origin().y + grid.height() * res};
  const double width_px = grid.width() * res * kScale;
  const double height_px = grid.height() * res * kScale;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_px) << "\" height=\""
      << num(height_px) << "\" viewBox=\"0 0 " << num(width_px) << ' ' << num(height_px)
      << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"#cfcfcf\"/>\n";

  // Feasible area, one rect per horizontal run of cells.
  for (int iy = 0; iy < grid.height(); ++iy) {
    int ix = 0;
    while (ix < grid.width()) {
      if (!grid.cells()[static_cast<std::size_t>(iy) * grid.width() + ix]) {
        ++ix;
        continue;
      }
      int run = ix;
      while (run < grid.width() &&
             grid.cells()[static_cast<std::size_t>(iy) * grid.width() + run]) {
        ++run;
      }
      const double x0 = c.x(grid.origin().x + ix * res);
      const double y0 = c.y(grid.origin().y + (iy + 1) * res);
      svg << "<rect class=\"feasible\" x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\""
          << num((run - ix) * res * kScale) << "\" height=\"" << num(res * kScale)
          << "\" fill=\"#ffffff\"/>\n";
      ix = run;
    }
  }

  // Motion range and goal proposals under the trajectories.
  if (goals.has_value()) {
    svg << "<circle class=\"range\" cx=\"" << num(c.x(goals->center.x)) << "\" cy=\""
        << num(c.y(goals->center.y)) << "\" r=\"" << num(goals->radius * kScale)
        << "\" fill=\"none\" stroke=\"#9467bd\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n";
    for (const auto & p : goals->points) {
      svg << "<circle class=\"goal\" cx=\"" << num(c.x(p.x)) << "\" cy=\"" << num(c.y(p.y))
          << "\" r=\"2.5\" fill=\"#9467bd\"/>\n";
    }
  }

  if (!scene.future.empty()) {
    polyline(svg, c, scene.future, "future", "#17becf", 2.5);
  }

  for (const auto & track : scene.tracks) {
    polyline(svg, c, track.observed, "past " + to_string(track.role), role_color(track.role), 2.0);
    const Point2 cur = track.last_observed();
    svg << "<circle class=\"current\" cx=\"" << num(c.x(cur.x)) << "\" cy=\"" << num(c.y(cur.y))
        << "\" r=\"4\" fill=\"" << role_color(track.role) << "\"/>\n";
  }

  if (prediction.has_value()) {
    // Top-3 of the multi-modal output, best confidence drawn on top.
    std::vector<std::size_t> order(prediction->confidences.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return prediction->confidences[a] > prediction->confidences[b];
    });
    const std::size_t shown = std::min<std::size_t>(3, order.size());
    const char * dashes[3] = {"", "7 3", "3 3"};
    for (std::size_t rank = shown; rank-- > 0;) {
      const std::size_t j = order[rank];
      polyline(svg, c, prediction->trajectories[j], "mode", "#ff7f0e", 2.0, dashes[rank]);
      const Point2 end = prediction->trajectories[j].back();
      char label[64];
      std::snprintf(label, sizeof(label), "c=%.2f", prediction->confidences[j]);
      svg << "<text class=\"conf\" x=\"" << num(c.x(end.x) + 4.0) << "\" y=\""
          << num(c.y(end.y) - 4.0) << "\" font-size=\"11\" fill=\"#ff7f0e\">" << label
          << "</text>\n";
    }
  }

  svg << "</svg>\n";
  return svg.str();
}

}  // namespace effmp
