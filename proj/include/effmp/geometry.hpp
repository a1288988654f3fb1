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

#include <cmath>

namespace effmp
{

/// 2D position in meters. Coordinates are world frame unless stated otherwise.
struct Point2
{
  double x = 0.0;
  double y = 0.0;

  Point2 operator+(const Point2 & o) const { return {x + o.x, y + o.y}; }
  Point2 operator-(const Point2 & o) const { return {x - o.x, y - o.y}; }
  Point2 operator*(double s) const { return {x * s, y * s}; }

  double norm() const { return std::hypot(x, y); }
  double dot(const Point2 & o) const { return x * o.x + y * o.y; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double distance(const Point2 & a, const Point2 & b)
{
  return (a - b).norm();
}

/// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a)
{
  a = std::remainder(a, 2.0 * M_PI);
  if (a <= -M_PI) {
    a += 2.0 * M_PI;
  }
  return a;
}

/// Rotate a point about the origin.
inline Point2 rotate(const Point2 & p, double angle)
{
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

inline Point2 rotate_about(const Point2 & p, const Point2 & center, double angle)
{
  return rotate(p - center, angle) + center;
}

/// Rigid transform of the target-centric normalization: world -> local is
/// translate(-translation) then rotate(-rotation).
struct FrameTransform
{
  Point2 translation;  // target's last observed position
  double rotation = 0.0;  // target's smoothed heading

  Point2 to_local(const Point2 & p) const { return rotate(p - translation, -rotation); }
  Point2 to_world(const Point2 & p) const { return rotate(p, rotation) + translation; }
};

/// Distance from a point to the segment ab.
inline double point_segment_distance(const Point2 & p, const Point2 & a, const Point2 & b)
{
  const Point2 ab = b - a;
  const double len2 = ab.dot(ab);
  if (len2 <= 0.0) {
    return distance(p, a);
  }
  double t = (p - a).dot(ab) / len2;
  t = std::fmin(1.0, std::fmax(0.0, t));
  return distance(p, a + ab * t);
}

}  // namespace effmp
