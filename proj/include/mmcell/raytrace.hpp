#pragma once

#include "mmcell/error.hpp"
#include "mmcell/geometry.hpp"
#include "mmcell/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mmcell {

inline double wavelength_m(double frequency_ghz) { return kSpeedOfLight / (frequency_ghz * 1e9); }

/// Free-space path loss 20 log10(4 pi d / lambda), in dB.
inline double fspl(double frequency_ghz, double distance_m)
{
  if (!(frequency_ghz > 0.0) || !(distance_m > 0.0))
    throw Error("fspl: frequency and distance must be > 0");
  return 20.0 * std::log10(4.0 * kPi * distance_m / wavelength_m(frequency_ghz));
}

/// Single knife-edge diffraction loss J(nu) in dB (ITU-R P.526 approximation).
inline double knife_edge_loss(double nu)
{
  if (nu <= -0.78)
    return 0.0;
  const double v = nu - 0.1;
  return 6.9 + 20.0 * std::log10(std::sqrt(v * v + 1.0) + v);
}

/// Fresnel-Kirchhoff parameter for an edge `clearance` metres above the
/// direct line (negative when the line passes above), at distances d1 and d2.
inline double fresnel_parameter(double clearance, double d1, double d2, double wavelength)
{
  constexpr double kMinDistance = 1e-3;
  d1 = std::max(d1, kMinDistance);
  d2 = std::max(d2, kMinDistance);
  return clearance * std::sqrt(2.0 * (d1 + d2) / (wavelength * d1 * d2));
}

struct TraceConfig
{
  double frequency_ghz = 60.0;
  int max_reflection_order = 2;
  bool enable_edge_diffraction = true;
  /// Adds reflection + vertical-edge combinations (one of each).
  bool combine_edge_with_reflection = false;
  bool reflect_off_boxes = false;
  /// Lets vertical box edges diffract (around-the-ends paths).
  bool box_lateral_diffraction = false;
  /// Diffuse scattering is not modelled; true is rejected.
  bool enable_diffuse = false;
  std::size_t max_paths = 25;
  double reflection_loss_db = 10.0;
  /// Paths weaker than the free-space level of the straight Tx-Rx link by more
  /// than this are dropped.
  double min_path_power_rel_db = 40.0;

  std::vector<std::string> problems() const
  {
    std::vector<std::string> out;
    if (!(frequency_ghz > 0.0))
      out.push_back("trace.frequency must be > 0");
    if (max_reflection_order < 0 || max_reflection_order > 2)
      out.push_back("trace.max_reflection_order must be 0, 1 or 2");
    if (!(reflection_loss_db >= 0.0))
      out.push_back("trace.reflection_loss_db must be >= 0");
    if (max_paths == 0)
      out.push_back("trace.max_paths must be >= 1");
    if (!(min_path_power_rel_db > 0.0))
      out.push_back("trace.min_path_power_rel_db must be > 0");
    if (enable_diffuse)
      out.push_back("trace.enable_diffuse: diffuse scattering is not supported");
    return out;
  }

  void validate() const
  {
    if (auto p = problems(); !p.empty())
      throw ValidationError(std::move(p));
  }
};

enum class PathKind
{
  direct,
  reflected,
  edge_diffracted,
  over_obstacle
};

inline const char* to_string(PathKind k)
{
  switch (k)
  {
    case PathKind::direct:
      return "direct";
    case PathKind::reflected:
      return "reflected";
    case PathKind::edge_diffracted:
      return "edge-diffracted";
    case PathKind::over_obstacle:
      return "over-obstacle";
  }
  return "direct";
}

struct LossBreakdown
{
  double fspl_db = 0.0;
  double reflection_db = 0.0;
  double diffraction_db = 0.0;
  double vegetation_db = 0.0;

  double total() const { return fspl_db + reflection_db + diffraction_db + vegetation_db; }
};

/// One specular multipath component from Tx to Rx.
struct PathContribution
{
  PathKind kind = PathKind::direct;
  int reflection_order = 0;
  std::vector<Vec3> vertices;  ///< Tx, interaction points..., Rx
  double unfolded_length = 0.0;
  Direction aod;  ///< departure direction at Tx
  Direction aoa;  ///< direction from Rx towards the incoming path
  LossBreakdown loss;
  std::vector<Vec2> facade_normals;  ///< outward normal of each bounce, in order

  double total_isotropic_loss() const { return loss.total(); }
};

struct VegetationTerm
{
  double through_db = 0.0;
  double diffraction_db = 0.0;

  /// Only the stronger of the two contributions survives.
  double loss_db() const { return std::min(through_db, diffraction_db); }
};

/// Loss of one foliage obstacle on segment a->b: attenuation through the
/// canopy vs. a knife-edge over its top, whichever is smaller.
inline VegetationTerm vegetation_term(const VegBlock& block, const ObstacleCrossing& c, Vec3 a, Vec3 b,
                                      double frequency_ghz)
{
  const double length = distance(a, b);
  const double s = c.screen_s();
  const Vec3 on_line = a + (s / length) * (b - a);
  const double nu = fresnel_parameter(c.top_height - on_line.z, s, length - s, wavelength_m(frequency_ghz));
  return {block.attenuation_at(frequency_ghz) * c.penetration_length, knife_edge_loss(nu)};
}

/// Sum of per-obstacle foliage losses along segment a->b.
inline double vegetation_excess_loss(const Scene& scene, const std::vector<ObstacleCrossing>& crossings, Vec3 a,
                                     Vec3 b, double frequency_ghz)
{
  double total = 0.0;
  for (const auto& c : crossings)
  {
    if (c.kind != ObstacleKind::vegetation)
      throw Error("vegetation_excess_loss: crossing is not vegetation");
    if (!c.blocks())
      continue;
    total += vegetation_term(scene.vegetation.at(c.obstacle), c, a, b, frequency_ghz).loss_db();
  }
  return total;
}

/// Image-method tracer over one scene. The scene must outlive the tracer.
/// `trace` is const and safe to call concurrently.
class Tracer
{
public:
  /// The tracer keeps a reference to `scene`, which must outlive it.
  Tracer(Scene&&, TraceConfig) = delete;
  Tracer(const Scene& scene, TraceConfig config)
    : scene_(scene), config_(std::move(config)), index_(scene), wavelength_(0.0)
  {
    config_.validate();
    wavelength_ = wavelength_m(config_.frequency_ghz);
    for (const auto& b : scene.buildings)
      add_prism(b.footprint, b.height, true, true);
    for (const auto& box : scene.boxes)
      add_prism(box.footprint(), box.height, config_.reflect_off_boxes, config_.box_lateral_diffraction);
  }

  const TraceConfig& config() const { return config_; }
  const Scene& scene() const { return scene_; }
  const ObstacleIndex& obstacles() const { return index_; }

  std::vector<PathContribution> trace(Vec3 tx, Vec3 rx) const
  {
    if (tx == rx)
      throw Error("trace_paths: transmitter and receiver coincide");
    if (!scene_.bounds.contains(tx.xy()) || !scene_.bounds.contains(rx.xy()))
      throw Error("trace_paths: endpoint outside scene bounds");

    std::vector<PathContribution> paths;
    add_direct(tx, rx, paths);
    if (config_.max_reflection_order >= 1)
      add_first_order(tx, rx, paths);
    if (config_.max_reflection_order >= 2)
      add_second_order(tx, rx, paths);
    if (config_.enable_edge_diffraction)
      add_edge_diffraction(tx, rx, paths);
    if (config_.enable_edge_diffraction && config_.combine_edge_with_reflection && config_.max_reflection_order >= 1)
      add_reflection_edge(tx, rx, paths);

    // Window against the free-space level of the straight link: independent of
    // the obstacles, so adding an obstacle can only remove paths.
    const double threshold = fspl(config_.frequency_ghz, distance(tx, rx)) + config_.min_path_power_rel_db;
    std::erase_if(paths, [&](const PathContribution& p) { return p.total_isotropic_loss() > threshold; });
    std::stable_sort(paths.begin(), paths.end(), [](const auto& a, const auto& b) {
      return a.total_isotropic_loss() < b.total_isotropic_loss();
    });
    if (paths.size() > config_.max_paths)
      paths.resize(config_.max_paths);
    return paths;
  }

private:
  struct Wall
  {
    Vec2 p;
    Vec2 q;
    Vec2 normal;  // outward
    double height;
  };

  struct Corner
  {
    Vec2 position;
    double height;
  };

  void add_prism(Polygon poly, double height, bool reflective, bool diffracting)
  {
    poly = make_ccw(std::move(poly));
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i)
    {
      const Vec2 prev = poly[(i + n - 1) % n];
      const Vec2 p = poly[i];
      const Vec2 q = poly[(i + 1) % n];
      const Vec2 e = q - p;
      const double len = norm(e);
      if (reflective && len > 0.0)
        walls_.push_back({p, q, {e.y / len, -e.x / len}, height});
      if (diffracting && cross(p - prev, q - p) > 0.0)
        corners_.push_back({p, height});
    }
  }

  static double side(const Wall& w, Vec2 x) { return dot(x - w.p, w.normal); }

  /// Parameter along src->dst where it meets the wall segment, if it does.
  static std::optional<double> hit_wall(Vec2 src, Vec2 dst, const Wall& w)
  {
    const Vec2 d = dst - src;
    const Vec2 e = w.q - w.p;
    const double denom = cross(d, e);
    if (std::abs(denom) < 1e-15)
      return std::nullopt;
    const Vec2 sp = w.p - src;
    const double t = cross(sp, e) / denom;
    const double u = cross(sp, d) / denom;
    if (t <= 0.0 || t >= 1.0 || u < 0.0 || u > 1.0)
      return std::nullopt;
    return t;
  }

  bool clear(Vec3 a, Vec3 b) const { return !index_.opaque_blocked(a, b); }

  double leg_vegetation(Vec3 a, Vec3 b) const
  {
    double total = 0.0;
    for (const auto& c : index_.crossings(a, b))
    {
      if (c.kind == ObstacleKind::vegetation && c.blocks())
        total += vegetation_term(scene_.vegetation[c.obstacle], c, a, b, config_.frequency_ghz).loss_db();
    }
    return total;
  }

  double polyline_vegetation(const std::vector<Vec3>& v) const
  {
    double total = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i)
      total += leg_vegetation(v[i - 1], v[i]);
    return total;
  }

  bool polyline_clear(const std::vector<Vec3>& v) const
  {
    for (std::size_t i = 1; i < v.size(); ++i)
      if (!clear(v[i - 1], v[i]))
        return false;
    return true;
  }

  PathContribution make_path(PathKind kind, int order, std::vector<Vec3> vertices, double diffraction_db,
                             double vegetation_db, std::vector<Vec2> normals = {}) const
  {
    PathContribution p;
    p.kind = kind;
    p.reflection_order = order;
    p.unfolded_length = 0.0;
    for (std::size_t i = 1; i < vertices.size(); ++i)
      p.unfolded_length += distance(vertices[i - 1], vertices[i]);
    p.aod = direction_of(vertices[1] - vertices[0]);
    p.aoa = direction_of(vertices[vertices.size() - 2] - vertices.back());
    p.loss.fspl_db = fspl(config_.frequency_ghz, p.unfolded_length);
    p.loss.reflection_db = order * config_.reflection_loss_db;
    p.loss.diffraction_db = diffraction_db;
    p.loss.vegetation_db = vegetation_db;
    p.vertices = std::move(vertices);
    p.facade_normals = std::move(normals);
    return p;
  }

  void add_direct(Vec3 tx, Vec3 rx, std::vector<PathContribution>& out) const
  {
    const double length = distance(tx, rx);
    const auto crossings = index_.crossings(tx, rx);
    double veg = 0.0;
    double diffraction = 0.0;
    std::vector<std::pair<double, Vec3>> screens;
    for (const auto& c : crossings)
    {
      if (!c.blocks())
        continue;
      if (c.kind == ObstacleKind::vegetation)
      {
        veg += vegetation_term(scene_.vegetation[c.obstacle], c, tx, rx, config_.frequency_ghz).loss_db();
        continue;
      }
      // Opaque: equivalent knife-edge over the obstacle top.
      const double s = c.screen_s();
      const Vec3 on_line = tx + (s / length) * (rx - tx);
      diffraction += knife_edge_loss(fresnel_parameter(c.top_height - on_line.z, s, length - s, wavelength_));
      screens.emplace_back(s, Vec3{on_line.x, on_line.y, std::max(c.top_height, on_line.z)});
    }
    if (screens.empty())
    {
      out.push_back(make_path(PathKind::direct, 0, {tx, rx}, 0.0, veg));
      return;
    }
    std::sort(screens.begin(), screens.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Vec3> vertices{tx};
    for (const auto& [s, v] : screens)
      vertices.push_back(v);
    vertices.push_back(rx);
    out.push_back(make_path(PathKind::over_obstacle, 0, std::move(vertices), diffraction, veg));
  }

  void add_first_order(Vec3 tx, Vec3 rx, std::vector<PathContribution>& out) const
  {
    for (const auto& w : walls_)
    {
      if (side(w, tx.xy()) <= 0.0 || side(w, rx.xy()) <= 0.0)
        continue;
      const Vec2 image = mirror_point(tx.xy(), w.p, w.q);
      const auto t = hit_wall(image, rx.xy(), w);
      if (!t)
        continue;
      const Vec2 hit = image + *t * (rx.xy() - image);
      const double z = tx.z + *t * (rx.z - tx.z);
      if (z < 0.0 || z > w.height)
        continue;
      std::vector<Vec3> v{tx, lift(hit, z), rx};
      if (!polyline_clear(v))
        continue;
      const double veg = polyline_vegetation(v);
      out.push_back(make_path(PathKind::reflected, 1, std::move(v), 0.0, veg, {w.normal}));
    }
  }

  void add_second_order(Vec3 tx, Vec3 rx, std::vector<PathContribution>& out) const
  {
    for (const auto& w1 : walls_)
    {
      if (side(w1, tx.xy()) <= 0.0)
        continue;
      const Vec2 image1 = mirror_point(tx.xy(), w1.p, w1.q);
      for (const auto& w2 : walls_)
      {
        if (&w1 == &w2 || side(w2, rx.xy()) <= 0.0 || side(w2, image1) <= 0.0)
          continue;
        const Vec2 image2 = mirror_point(image1, w2.p, w2.q);
        const auto t2 = hit_wall(image2, rx.xy(), w2);
        if (!t2)
          continue;
        const Vec2 hit2 = image2 + *t2 * (rx.xy() - image2);
        if (side(w1, hit2) <= 0.0)
          continue;
        const auto t1 = hit_wall(image1, hit2, w1);
        if (!t1)
          continue;
        const Vec2 hit1 = image1 + *t1 * (hit2 - image1);
        if (side(w2, hit1) <= 0.0)
          continue;
        const double d1 = distance(tx.xy(), hit1);
        const double d2 = d1 + distance(hit1, hit2);
        const double total = d2 + distance(hit2, rx.xy());
        const double z1 = tx.z + (rx.z - tx.z) * d1 / total;
        const double z2 = tx.z + (rx.z - tx.z) * d2 / total;
        if (z1 < 0.0 || z1 > w1.height || z2 < 0.0 || z2 > w2.height)
          continue;
        std::vector<Vec3> v{tx, lift(hit1, z1), lift(hit2, z2), rx};
        if (!polyline_clear(v))
          continue;
        const double veg = polyline_vegetation(v);
        out.push_back(make_path(PathKind::reflected, 2, std::move(v), 0.0, veg, {w1.normal, w2.normal}));
      }
    }
  }

  void add_edge_diffraction(Vec3 tx, Vec3 rx, std::vector<PathContribution>& out) const
  {
    const Vec2 a = tx.xy();
    const Vec2 b = rx.xy();
    if (a == b)
      return;
    for (const auto& c : corners_)
    {
      const double d1h = distance(a, c.position);
      const double d2h = distance(c.position, b);
      if (d1h <= 0.0 || d2h <= 0.0)
        continue;
      const double z = tx.z + (rx.z - tx.z) * d1h / (d1h + d2h);
      if (z < 0.0 || z > c.height)
        continue;
      const Vec3 edge = lift(c.position, z);
      std::vector<Vec3> v{tx, edge, rx};
      if (!polyline_clear(v))
        continue;
      const double nu = fresnel_parameter(distance_to_line(c.position, a, b), distance(tx, edge),
                                          distance(edge, rx), wavelength_);
      const double veg = polyline_vegetation(v);
      out.push_back(make_path(PathKind::edge_diffracted, 0, std::move(v), knife_edge_loss(nu), veg));
    }
  }

  /// src -> wall -> corner -> dst, vertices ordered from src.
  std::optional<PathContribution> reflect_then_diffract(Vec3 src, Vec3 dst, const Wall& w, const Corner& c) const
  {
    if (side(w, src.xy()) <= 0.0 || side(w, c.position) <= 0.0)
      return std::nullopt;
    const Vec2 image = mirror_point(src.xy(), w.p, w.q);
    const auto t = hit_wall(image, c.position, w);
    if (!t)
      return std::nullopt;
    const Vec2 hit = image + *t * (c.position - image);
    const double d_hit = distance(image, hit);
    const double d_corner = distance(image, c.position);
    const double total = d_corner + distance(c.position, dst.xy());
    if (total <= 0.0)
      return std::nullopt;
    const double z_hit = src.z + (dst.z - src.z) * d_hit / total;
    const double z_edge = src.z + (dst.z - src.z) * d_corner / total;
    if (z_hit < 0.0 || z_hit > w.height || z_edge < 0.0 || z_edge > c.height)
      return std::nullopt;
    const Vec3 edge = lift(c.position, z_edge);
    std::vector<Vec3> v{src, lift(hit, z_hit), edge, dst};
    if (!polyline_clear(v))
      return std::nullopt;
    const double d1 = distance(src, v[1]) + distance(v[1], edge);
    const double nu =
        fresnel_parameter(distance_to_line(c.position, image, dst.xy()), d1, distance(edge, dst), wavelength_);
    const double veg = polyline_vegetation(v);
    return make_path(PathKind::edge_diffracted, 1, std::move(v), knife_edge_loss(nu), veg, {w.normal});
  }

  void add_reflection_edge(Vec3 tx, Vec3 rx, std::vector<PathContribution>& out) const
  {
    for (const auto& w : walls_)
    {
      for (const auto& c : corners_)
      {
        if (auto p = reflect_then_diffract(tx, rx, w, c))
          out.push_back(std::move(*p));
        if (auto p = reflect_then_diffract(rx, tx, w, c))
        {
          std::vector<Vec3> v(p->vertices.rbegin(), p->vertices.rend());
          out.push_back(make_path(PathKind::edge_diffracted, 1, std::move(v), p->loss.diffraction_db,
                                  p->loss.vegetation_db, p->facade_normals));
        }
      }
    }
  }

  const Scene& scene_;
  TraceConfig config_;
  ObstacleIndex index_;
  double wavelength_;
  std::vector<Wall> walls_;
  std::vector<Corner> corners_;
};

/// Multipath set from tx to rx, strongest first.
inline std::vector<PathContribution> trace_paths(const Scene& scene, Vec3 tx, Vec3 rx, const TraceConfig& config)
{
  return Tracer(scene, config).trace(tx, rx);
}

/// Isotropic received power of a path set relative to the free-space level at
/// 1 m; -inf for an empty set.
inline double relative_power(const std::vector<PathContribution>& paths, double frequency_ghz)
{
  if (paths.empty())
    return -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& p : paths)
    sum += std::pow(10.0, -p.total_isotropic_loss() / 10.0);
  return 10.0 * std::log10(sum) + fspl(frequency_ghz, 1.0);
}

/// Debug dump, one row per path.
inline std::string paths_to_csv(const std::vector<PathContribution>& paths)
{
  std::string out =
      "kind,vertices,unfolded_length,aod_az,aod_el,aoa_az,aoa_el,fspl_db,refl_db,diff_db,veg_db,total_db\n";
  char buf[256];
  for (const auto& p : paths)
  {
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.3f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f\n", to_string(p.kind),
                  p.vertices.size(), p.unfolded_length, p.aod.azimuth_deg, p.aod.elevation_deg, p.aoa.azimuth_deg,
                  p.aoa.elevation_deg, p.loss.fspl_db, p.loss.reflection_db, p.loss.diffraction_db,
                  p.loss.vegetation_db, p.total_isotropic_loss());
    out += buf;
  }
  return out;
}

} // namespace mmcell
