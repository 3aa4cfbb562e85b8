#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace mmcell {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle in degrees into (-180, 180].
inline double wrap_deg(double deg)
{
  double w = std::fmod(deg, 360.0);
  if (w <= -180.0)
    w += 360.0;
  else if (w > 180.0)
    w -= 360.0;
  return w;
}

struct Vec2
{
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
  friend auto operator<=>(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(b - a); }

struct Vec3
{
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec2 xy() const { return {x, y}; }

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline Vec3 lift(Vec2 p, double z) { return {p.x, p.y, z}; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) { return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z); }
inline double distance(Vec3 a, Vec3 b) { return norm(b - a); }

/// Direction of a vector as (azimuth, elevation) in degrees. Azimuth is
/// counter-clockwise from +x, elevation is positive upwards.
struct Direction
{
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
};

inline Direction direction_of(Vec3 v)
{
  return {rad_to_deg(std::atan2(v.y, v.x)), rad_to_deg(std::atan2(v.z, std::hypot(v.x, v.y)))};
}

using Polygon = std::vector<Vec2>;
using Polyline = std::vector<Vec2>;

inline double signed_area(const Polygon& poly)
{
  double a = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i)
    a += cross(poly[i], poly[(i + 1) % n]);
  return 0.5 * a;
}

inline double polyline_length(const Polyline& line)
{
  double len = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i)
    len += distance(line[i - 1], line[i]);
  return len;
}

/// Even-odd rule. Points exactly on the boundary may land on either side.
inline bool point_in_polygon(Vec2 p, const Polygon& poly)
{
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
  {
    const Vec2 a = poly[i];
    const Vec2 b = poly[j];
    if ((a.y > p.y) != (b.y > p.y))
    {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross)
        inside = !inside;
    }
  }
  return inside;
}

/// Closed-segment intersection test, including touching and collinear overlap.
inline bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2)
{
  auto orient = [](Vec2 a, Vec2 b, Vec2 c) {
    const double v = cross(b - a, c - a);
    return (v > 0.0) - (v < 0.0);
  };
  auto on_segment = [](Vec2 a, Vec2 b, Vec2 c) {
    return std::min(a.x, b.x) <= c.x && c.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= c.y &&
           c.y <= std::max(a.y, b.y);
  };
  const int o1 = orient(p1, p2, q1);
  const int o2 = orient(p1, p2, q2);
  const int o3 = orient(q1, q2, p1);
  const int o4 = orient(q1, q2, p2);
  if (o1 != o2 && o3 != o4)
    return true;
  if (o1 == 0 && on_segment(p1, p2, q1))
    return true;
  if (o2 == 0 && on_segment(p1, p2, q2))
    return true;
  if (o3 == 0 && on_segment(q1, q2, p1))
    return true;
  if (o4 == 0 && on_segment(q1, q2, p2))
    return true;
  return false;
}

/// True when no two non-adjacent edges touch and no vertex is repeated.
inline bool is_simple_polygon(const Polygon& poly)
{
  const std::size_t n = poly.size();
  if (n < 3)
    return false;
  if (std::abs(signed_area(poly)) <= 0.0)
    return false;
  for (std::size_t i = 0; i < n; ++i)
  {
    for (std::size_t j = i + 1; j < n; ++j)
    {
      if (poly[i] == poly[j])
        return false;
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent)
        continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]))
        return false;
    }
  }
  return true;
}

inline Polygon make_ccw(Polygon poly)
{
  if (signed_area(poly) < 0.0)
    std::reverse(poly.begin(), poly.end());
  return poly;
}

/// Parameter intervals [t0, t1] (t in [0, 1] along a->b) where the segment lies
/// inside the polygon. Zero-length touches are dropped.
inline std::vector<std::pair<double, double>> segment_polygon_intervals(Vec2 a, Vec2 b, const Polygon& poly)
{
  std::vector<double> ts{0.0, 1.0};
  const Vec2 d = b - a;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i)
  {
    const Vec2 p = poly[i];
    const Vec2 e = poly[(i + 1) % n] - p;
    const double denom = cross(d, e);
    const Vec2 ap = p - a;
    if (std::abs(denom) < 1e-15 * (norm(d) * norm(e) + 1e-300))
    {
      // Parallel: only collinear overlap contributes breakpoints.
      if (std::abs(cross(ap, d)) > 1e-12 * (norm(d) + 1.0))
        continue;
      const double dd = dot(d, d);
      if (dd <= 0.0)
        continue;
      for (Vec2 v : {p, p + e})
      {
        const double t = dot(v - a, d) / dd;
        if (t > 0.0 && t < 1.0)
          ts.push_back(t);
      }
      continue;
    }
    const double t = cross(ap, e) / denom;
    const double u = cross(ap, d) / denom;
    if (t > 0.0 && t < 1.0 && u >= -1e-12 && u <= 1.0 + 1e-12)
      ts.push_back(t);
  }
  std::sort(ts.begin(), ts.end());

  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 1; i < ts.size(); ++i)
  {
    const double t0 = ts[i - 1];
    const double t1 = ts[i];
    if (t1 - t0 <= 1e-12)
      continue;
    const double tm = 0.5 * (t0 + t1);
    if (!point_in_polygon(a + tm * d, poly))
      continue;
    if (!out.empty() && std::abs(out.back().second - t0) <= 1e-12)
      out.back().second = t1;
    else
      out.emplace_back(t0, t1);
  }
  return out;
}

/// Reflects a point across the infinite line through p and q.
inline Vec2 mirror_point(Vec2 x, Vec2 p, Vec2 q)
{
  const Vec2 e = q - p;
  const double t = dot(x - p, e) / dot(e, e);
  const Vec2 foot = p + t * e;
  return foot + (foot - x);
}

/// Distance from x to the infinite line through p and q.
inline double distance_to_line(Vec2 x, Vec2 p, Vec2 q)
{
  const Vec2 e = q - p;
  return std::abs(cross(e, x - p)) / norm(e);
}

/// Closest point on segment [p, q] to x.
inline Vec2 closest_on_segment(Vec2 x, Vec2 p, Vec2 q)
{
  const Vec2 e = q - p;
  const double ee = dot(e, e);
  if (ee <= 0.0)
    return p;
  const double t = std::clamp(dot(x - p, e) / ee, 0.0, 1.0);
  return p + t * e;
}

struct Box2
{
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  bool overlaps(const Box2& o) const
  {
    return xmin <= o.xmax && o.xmin <= xmax && ymin <= o.ymax && o.ymin <= ymax;
  }
};

inline Box2 bounding_box(const std::vector<Vec2>& pts)
{
  Box2 b{pts.front().x, pts.front().y, pts.front().x, pts.front().y};
  for (Vec2 p : pts)
  {
    b.xmin = std::min(b.xmin, p.x);
    b.ymin = std::min(b.ymin, p.y);
    b.xmax = std::max(b.xmax, p.x);
    b.ymax = std::max(b.ymax, p.y);
  }
  return b;
}

} // namespace mmcell
