#pragma once

#include "mmcell/error.hpp"
#include "mmcell/geometry.hpp"
#include "mmcell/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mmcell {

/// Specific attenuation of foliage at 60 GHz, dB/m.
inline constexpr double kDefaultFoliageAttenuation60GHz = 11.0;

/// Users are considered on a breakline within this distance (m).
inline constexpr double kBreaklineSnapTolerance = 0.01;

struct Bounds
{
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double depth() const { return ymax - ymin; }
  double area_km2() const { return width() * depth() * 1e-6; }

  bool contains(Vec2 p, double tol = 1e-9) const
  {
    return p.x >= xmin - tol && p.x <= xmax + tol && p.y >= ymin - tol && p.y <= ymax + tol;
  }
};

struct Building
{
  Polygon footprint;
  double height = 0.0;
};

enum class VegClass
{
  woods,
  tree,
  hedge
};

inline const char* to_string(VegClass c)
{
  switch (c)
  {
    case VegClass::woods:
      return "woods";
    case VegClass::tree:
      return "tree";
    case VegClass::hedge:
      return "hedge";
  }
  return "tree";
}

inline std::optional<VegClass> veg_class_from_string(const std::string& s)
{
  if (s == "woods")
    return VegClass::woods;
  if (s == "tree")
    return VegClass::tree;
  if (s == "hedge")
    return VegClass::hedge;
  return std::nullopt;
}

struct VegBlock
{
  Polygon footprint;
  double height = 0.0;
  VegClass kind = VegClass::tree;
  /// Frequency in GHz -> specific attenuation in dB/m.
  std::map<double, double> attenuation{{60.0, kDefaultFoliageAttenuation60GHz}};

  /// Specific attenuation at `frequency_ghz`. Between table entries the value
  /// is interpolated linearly in log-frequency and extrapolated along the
  /// end slopes; a single entry is scaled in proportion to log10(f / 1 GHz).
  double attenuation_at(double frequency_ghz) const
  {
    if (attenuation.empty())
      throw Error("vegetation block has no attenuation entry");
    if (auto it = attenuation.find(frequency_ghz); it != attenuation.end())
      return it->second;
    if (attenuation.size() == 1)
    {
      const auto [f0, a0] = *attenuation.begin();
      if (f0 <= 1.0)
        return a0;
      return std::max(0.0, a0 * std::log10(frequency_ghz) / std::log10(f0));
    }
    auto hi = attenuation.upper_bound(frequency_ghz);
    if (hi == attenuation.begin())
      ++hi;
    if (hi == attenuation.end())
      --hi;
    auto lo = std::prev(hi);
    const double x = std::log10(frequency_ghz);
    const double x0 = std::log10(lo->first);
    const double x1 = std::log10(hi->first);
    const double a = lo->second + (hi->second - lo->second) * (x - x0) / (x1 - x0);
    return std::max(0.0, a);
  }
};

/// Opaque rectangular prism standing on the ground, e.g. a bus. Azimuth is the
/// direction of the long axis, degrees counter-clockwise from +x.
struct ObstructionBox
{
  Vec2 center;
  double length = 12.0;
  double width = 2.5;
  double height = 3.0;
  double azimuth_deg = 0.0;

  Polygon footprint() const
  {
    const double c = std::cos(deg_to_rad(azimuth_deg));
    const double s = std::sin(deg_to_rad(azimuth_deg));
    const Vec2 u{c * length / 2.0, s * length / 2.0};
    const Vec2 v{-s * width / 2.0, c * width / 2.0};
    return {center - u - v, center + u - v, center + u + v, center - u + v};
  }
};

struct CellSite
{
  Vec2 position;
  double height = 7.0;
  std::string pattern = "default";
  double tx_power_dbm = 21.5;

  Vec3 antenna() const { return lift(position, height); }
};

struct UserTerminal
{
  Vec2 position;
  double height = 2.0;
  double antenna_gain_dbi = 5.0;
  double demand_mbps = 15.0;

  Vec3 antenna() const { return lift(position, height); }
};

/// 2.5D world: prisms on flat ground at z = 0.
struct Scene
{
  Bounds bounds;
  std::vector<Building> buildings;
  std::vector<VegBlock> vegetation;
  std::vector<ObstructionBox> boxes;
  std::vector<Polyline> breaklines;
  std::vector<CellSite> cells;

  double breakline_length() const
  {
    double len = 0.0;
    for (const auto& b : breaklines)
      len += polyline_length(b);
    return len;
  }
};

/// Checks every scene invariant and throws ValidationError listing all
/// offending entities.
inline void validate_scene(const Scene& scene)
{
  std::vector<std::string> issues;
  const Bounds& b = scene.bounds;
  if (!(b.xmax > b.xmin) || !(b.ymax > b.ymin))
    issues.push_back("bounds: empty or inverted rectangle");

  auto check_polygon = [&](const Polygon& poly, const std::string& who) {
    if (poly.size() < 3)
    {
      issues.push_back(who + ": degenerate polygon (" + std::to_string(poly.size()) + " vertices)");
      return;
    }
    if (!is_simple_polygon(poly))
      issues.push_back(who + ": polygon is not simple");
    for (Vec2 p : poly)
    {
      if (!b.contains(p))
      {
        issues.push_back(who + ": vertex outside bounds");
        break;
      }
    }
  };

  for (std::size_t i = 0; i < scene.buildings.size(); ++i)
  {
    const auto who = "buildings[" + std::to_string(i) + "]";
    check_polygon(scene.buildings[i].footprint, who);
    if (!(scene.buildings[i].height > 0.0))
      issues.push_back(who + ": height must be > 0");
  }
  for (std::size_t i = 0; i < scene.vegetation.size(); ++i)
  {
    const auto& v = scene.vegetation[i];
    const auto who = "vegetation[" + std::to_string(i) + "]";
    check_polygon(v.footprint, who);
    if (!(v.height > 0.0))
      issues.push_back(who + ": height must be > 0");
    if (v.attenuation.empty())
      issues.push_back(who + ": no attenuation entry");
    for (const auto& [f, a] : v.attenuation)
    {
      if (!(f > 0.0) || !(a >= 0.0))
        issues.push_back(who + ": attenuation entries need frequency > 0 and value >= 0");
    }
  }
  for (std::size_t i = 0; i < scene.boxes.size(); ++i)
  {
    const auto& box = scene.boxes[i];
    const auto who = "boxes[" + std::to_string(i) + "]";
    if (!(box.length > 0.0 && box.width > 0.0 && box.height > 0.0))
      issues.push_back(who + ": dimensions must be > 0");
    else
      check_polygon(box.footprint(), who);
  }
  for (std::size_t i = 0; i < scene.breaklines.size(); ++i)
  {
    const auto& line = scene.breaklines[i];
    const auto who = "breaklines[" + std::to_string(i) + "]";
    if (line.size() < 2)
      issues.push_back(who + ": needs at least 2 points");
    if (std::any_of(line.begin(), line.end(), [&](Vec2 p) { return !b.contains(p); }))
      issues.push_back(who + ": point outside bounds");
  }
  for (std::size_t i = 0; i < scene.cells.size(); ++i)
  {
    const auto& c = scene.cells[i];
    const auto who = "cells[" + std::to_string(i) + "]";
    if (!(c.height > 0.0))
      issues.push_back(who + ": height must be > 0");
    if (!b.contains(c.position))
      issues.push_back(who + ": position outside bounds");
  }
  if (!issues.empty())
    throw ValidationError(std::move(issues));
}

enum class ObstacleKind
{
  building,
  vegetation,
  box
};

inline const char* to_string(ObstacleKind k)
{
  switch (k)
  {
    case ObstacleKind::building:
      return "building";
    case ObstacleKind::vegetation:
      return "vegetation";
    case ObstacleKind::box:
      return "box";
  }
  return "building";
}

/// One passage of a segment through an obstacle footprint. Distances are
/// measured along the 3D segment from its start.
struct ObstacleCrossing
{
  ObstacleKind kind = ObstacleKind::building;
  std::size_t obstacle = 0;  ///< index into the scene list for `kind`
  double entry_s = 0.0;
  double exit_s = 0.0;
  /// Length of the part of [entry_s, exit_s] where the segment is below the top.
  double penetration_length = 0.0;
  double top_height = 0.0;
  /// Sub-interval of [entry_s, exit_s] below the top (empty when penetration is 0).
  double submerged_begin_s = 0.0;
  double submerged_end_s = 0.0;

  bool blocks() const { return penetration_length > 1e-9; }

  /// Equivalent knife-edge screen position: the middle of the submerged part,
  /// or of the footprint interval when the segment passes above.
  double screen_s() const
  {
    return blocks() ? 0.5 * (submerged_begin_s + submerged_end_s) : 0.5 * (entry_s + exit_s);
  }
};

/// Flattened view of the scene prisms with bounding boxes, built once and
/// queried many times by the tracer.
class ObstacleIndex
{
public:
  struct Prism
  {
    ObstacleKind kind;
    std::size_t index;
    const Polygon* footprint;
    double height;
    Box2 bbox;
  };

  explicit ObstacleIndex(const Scene& scene)
  {
    for (std::size_t i = 0; i < scene.buildings.size(); ++i)
      add(ObstacleKind::building, i, scene.buildings[i].footprint, scene.buildings[i].height);
    for (std::size_t i = 0; i < scene.vegetation.size(); ++i)
      add(ObstacleKind::vegetation, i, scene.vegetation[i].footprint, scene.vegetation[i].height);
    box_footprints_.reserve(scene.boxes.size());
    for (const auto& box : scene.boxes)
      box_footprints_.push_back(box.footprint());
    for (std::size_t i = 0; i < scene.boxes.size(); ++i)
      add(ObstacleKind::box, i, box_footprints_[i], scene.boxes[i].height);
  }

  ObstacleIndex(const ObstacleIndex&) = delete;
  ObstacleIndex& operator=(const ObstacleIndex&) = delete;

  const std::vector<Prism>& prisms() const { return prisms_; }

  /// All crossings of segment a->b, sorted by entry distance.
  std::vector<ObstacleCrossing> crossings(Vec3 a, Vec3 b) const
  {
    std::vector<ObstacleCrossing> out;
    for_each_crossing(a, b, [&](const ObstacleCrossing& c) {
      out.push_back(c);
      return true;
    });
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& l, const auto& r) { return l.entry_s < r.entry_s; });
    return out;
  }

  /// True when an opaque obstacle (building or box) hides b from a.
  bool opaque_blocked(Vec3 a, Vec3 b) const
  {
    bool blocked = false;
    for_each_crossing(a, b, [&](const ObstacleCrossing& c) {
      if (c.kind != ObstacleKind::vegetation && c.blocks())
      {
        blocked = true;
        return false;
      }
      return true;
    });
    return blocked;
  }

private:
  void add(ObstacleKind kind, std::size_t index, const Polygon& poly, double height)
  {
    prisms_.push_back({kind, index, &poly, height, bounding_box(poly)});
  }

  template <typename Fn>
  void for_each_crossing(Vec3 a, Vec3 b, Fn&& fn) const
  {
    const double length = distance(a, b);
    const Box2 seg_box{std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y)};
    for (const auto& prism : prisms_)
    {
      if (!prism.bbox.overlaps(seg_box))
        continue;
      for (auto [t0, t1] : segment_polygon_intervals(a.xy(), b.xy(), *prism.footprint))
      {
        ObstacleCrossing c;
        c.kind = prism.kind;
        c.obstacle = prism.index;
        c.entry_s = t0 * length;
        c.exit_s = t1 * length;
        c.top_height = prism.height;
        // Part of [t0, t1] where z(t) < height.
        double s0 = t0;
        double s1 = t1;
        const double dz = b.z - a.z;
        if (dz == 0.0)
        {
          if (!(a.z < prism.height))
            s1 = s0;
        }
        else
        {
          const double t_top = (prism.height - a.z) / dz;
          if (dz > 0.0)
            s1 = std::min(s1, t_top);
          else
            s0 = std::max(s0, t_top);
        }
        if (s1 > s0)
        {
          c.submerged_begin_s = s0 * length;
          c.submerged_end_s = s1 * length;
          c.penetration_length = c.submerged_end_s - c.submerged_begin_s;
        }
        if (!fn(c))
          return;
      }
    }
  }

  std::vector<Polygon> box_footprints_;
  std::vector<Prism> prisms_;
};

/// Ordered obstacle crossings along the 3D segment a->b.
inline std::vector<ObstacleCrossing> segment_obstacles(const Scene& scene, Vec3 a, Vec3 b)
{
  if (a == b)
    throw Error("segment_obstacles: degenerate segment");
  return ObstacleIndex(scene).crossings(a, b);
}

/// Breaklines in canonical order: sorted by vertex sequence, lexicographically.
inline std::vector<const Polyline*> canonical_breaklines(const Scene& scene)
{
  std::vector<const Polyline*> lines;
  for (const auto& l : scene.breaklines)
    lines.push_back(&l);
  std::sort(lines.begin(), lines.end(), [](const Polyline* a, const Polyline* b) {
    return std::lexicographical_compare(a->begin(), a->end(), b->begin(), b->end());
  });
  return lines;
}

/// Point at arc length `s` along the concatenation of `lines`.
inline Vec2 point_at_arc_length(const std::vector<const Polyline*>& lines, double s)
{
  Vec2 last{};
  for (const Polyline* line : lines)
  {
    for (std::size_t i = 1; i < line->size(); ++i)
    {
      const Vec2 p = (*line)[i - 1];
      const Vec2 q = (*line)[i];
      const double seg = distance(p, q);
      if (s <= seg && seg > 0.0)
        return p + (s / seg) * (q - p);
      s -= seg;
      last = q;
    }
  }
  return last;
}

inline std::size_t user_count(double density_per_km2, double area_km2)
{
  return static_cast<std::size_t>(std::llround(density_per_km2 * area_km2));
}

/// Drops round(density x bounds area) users uniformly by arc length over the
/// service breaklines.
inline std::vector<UserTerminal> drop_users(const Scene& scene, double density_per_km2, std::uint64_t seed,
                                            const UserTerminal& prototype = {})
{
  if (!(density_per_km2 > 0.0))
    throw Error("drop_users: density must be > 0");
  const double total = scene.breakline_length();
  if (scene.breaklines.empty() || !(total > 0.0))
    throw Error("drop_users: scene has no breaklines");

  const auto lines = canonical_breaklines(scene);
  const std::size_t n = user_count(density_per_km2, scene.bounds.area_km2());
  Rng rng(seed);
  std::vector<UserTerminal> users;
  users.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    UserTerminal u = prototype;
    u.position = point_at_arc_length(lines, uniform01(rng) * total);
    users.push_back(u);
  }
  return users;
}

inline double distance_to_breaklines(const Scene& scene, Vec2 p)
{
  double best = std::numeric_limits<double>::infinity();
  for (const auto& line : scene.breaklines)
    for (std::size_t i = 1; i < line.size(); ++i)
      best = std::min(best, distance(p, closest_on_segment(p, line[i - 1], line[i])));
  return best;
}

struct TopologyFinding
{
  enum class Severity
  {
    violation,
    warning
  };

  Severity severity = Severity::violation;
  std::size_t cell = 0;
  std::size_t los_neighbors = 0;
  std::string message;
};

/// Cells need a clear line of sight to at least one other cell (two preferred).
/// Any building, box or foliage crossing below the segment counts as blocking.
inline std::vector<TopologyFinding> validate_topology(const Scene& scene)
{
  const ObstacleIndex index(scene);
  const std::size_t n = scene.cells.size();
  std::vector<std::size_t> los(n, 0);
  for (std::size_t i = 0; i < n; ++i)
  {
    for (std::size_t j = i + 1; j < n; ++j)
    {
      const Vec3 a = scene.cells[i].antenna();
      const Vec3 b = scene.cells[j].antenna();
      if (a == b)
        continue;
      const auto crossings = index.crossings(a, b);
      const bool clear =
          std::none_of(crossings.begin(), crossings.end(), [](const auto& c) { return c.blocks(); });
      if (clear)
      {
        ++los[i];
        ++los[j];
      }
    }
  }

  std::vector<TopologyFinding> out;
  for (std::size_t i = 0; i < n; ++i)
  {
    if (los[i] == 0)
      out.push_back({TopologyFinding::Severity::violation, i, 0,
                     "cell " + std::to_string(i) + " has no line-of-sight neighbour"});
    else if (los[i] == 1)
      out.push_back({TopologyFinding::Severity::warning, i, 1,
                     "cell " + std::to_string(i) + " has a single line-of-sight neighbour"});
  }
  return out;
}

inline std::size_t count_violations(const std::vector<TopologyFinding>& findings)
{
  return static_cast<std::size_t>(std::count_if(findings.begin(), findings.end(), [](const auto& f) {
    return f.severity == TopologyFinding::Severity::violation;
  }));
}

} // namespace mmcell
