#pragma once

#include "mmcell/error.hpp"
#include "mmcell/parallel.hpp"
#include "mmcell/raytrace.hpp"
#include "mmcell/scene.hpp"
#include "mmcell/simnet.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace mmcell {

/// True when p lies inside a building or box footprint (indoor: no data).
inline bool inside_opaque(const Scene& scene, Vec2 p)
{
  for (const auto& b : scene.buildings)
    if (point_in_polygon(p, b.footprint))
      return true;
  for (const auto& box : scene.boxes)
    if (point_in_polygon(p, box.footprint()))
      return true;
  return false;
}

/// Relative-power map of one cell: grid points xmin + i*res, ymin + j*res
/// covering the bounds, row-major by y then x.
struct Raster
{
  Bounds bounds;
  double resolution_m = 2.0;
  double frequency_ghz = 60.0;
  std::size_t cell = 0;
  double rx_height_m = 2.0;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<std::optional<double>> values;  ///< empty optional = no data

  double x(std::size_t i) const { return bounds.xmin + static_cast<double>(i) * resolution_m; }
  double y(std::size_t j) const { return bounds.ymin + static_cast<double>(j) * resolution_m; }
  const std::optional<double>& at(std::size_t i, std::size_t j) const { return values[j * nx + i]; }
};

/// Relative power (dB re. free space at 1 m) from `cell` over a grid of
/// receivers at `rx_height_m`. Points inside buildings or boxes, and points
/// coinciding with the antenna, carry no data.
inline Raster coverage_grid(const Scene& scene, std::size_t cell, double frequency_ghz, double resolution_m = 2.0,
                            double rx_height_m = 2.0, TraceConfig trace = {}, std::size_t workers = 1)
{
  if (!(resolution_m > 0.0))
    throw Error("coverage_grid: resolution must be > 0");
  if (cell >= scene.cells.size())
    throw Error("coverage_grid: cell " + std::to_string(cell) + " does not exist");
  trace.frequency_ghz = frequency_ghz;
  const Tracer tracer(scene, trace);

  Raster r;
  r.bounds = scene.bounds;
  r.resolution_m = resolution_m;
  r.frequency_ghz = frequency_ghz;
  r.cell = cell;
  r.rx_height_m = rx_height_m;
  r.nx = static_cast<std::size_t>(std::floor(scene.bounds.width() / resolution_m + 1e-9)) + 1;
  r.ny = static_cast<std::size_t>(std::floor(scene.bounds.depth() / resolution_m + 1e-9)) + 1;
  r.values.resize(r.nx * r.ny);
  const Vec3 tx = scene.cells[cell].antenna();
  parallel_for(r.ny, workers, [&](std::size_t j) {
    for (std::size_t i = 0; i < r.nx; ++i)
    {
      const Vec2 p{r.x(i), r.y(j)};
      const Vec3 rx = lift(p, rx_height_m);
      if (inside_opaque(scene, p) || rx == tx)
        continue;
      r.values[j * r.nx + i] = relative_power(tracer.trace(tx, rx), frequency_ghz);
    }
  });
  return r;
}

inline std::string raster_to_csv(const Raster& r)
{
  using report_detail::fixed;
  std::string out = "x,y,rel_power_db\n";
  for (std::size_t j = 0; j < r.ny; ++j)
  {
    for (std::size_t i = 0; i < r.nx; ++i)
    {
      out += fixed(r.x(i), 2) + ',' + fixed(r.y(j), 2) + ',';
      if (const auto& v = r.at(i, j))
        out += fixed(*v, 2);
      out += '\n';
    }
  }
  return out;
}

inline nlohmann::ordered_json raster_sidecar(const Raster& r)
{
  nlohmann::ordered_json j;
  j["bounds"] = {r.bounds.xmin, r.bounds.ymin, r.bounds.xmax, r.bounds.ymax};
  j["resolution_m"] = r.resolution_m;
  j["frequency_ghz"] = r.frequency_ghz;
  j["cell"] = r.cell;
  j["rx_height_m"] = r.rx_height_m;
  j["nx"] = r.nx;
  j["ny"] = r.ny;
  j["reference"] = "free-space received power at 1 m";
  return j;
}

inline constexpr double kDistanceBinWidth = 5.0;

/// Statistics of one horizontal-distance bin [start, start + width).
struct DistanceBin
{
  double start_m = 0.0;
  std::size_t count = 0;
  double p10_db = std::numeric_limits<double>::quiet_NaN();
  double median_db = std::numeric_limits<double>::quiet_NaN();
  double p90_db = std::numeric_limits<double>::quiet_NaN();
};

/// Pools relative power over every (cell, point) pair and summarizes it per
/// horizontal-distance bin. Bins run from 0 to the farthest sample; empty bins
/// are kept with count 0. Links without any path count as -inf.
inline std::vector<DistanceBin> distance_binned_stats(const Scene& scene, const std::vector<std::size_t>& cells,
                                                      const std::vector<Vec3>& points, const TraceConfig& trace,
                                                      std::size_t workers = 1,
                                                      double bin_width_m = kDistanceBinWidth)
{
  if (cells.empty())
    throw Error("distance_binned_stats: no cells");
  if (!(bin_width_m > 0.0))
    throw Error("distance_binned_stats: bin width must be > 0");
  for (std::size_t c : cells)
    if (c >= scene.cells.size())
      throw Error("distance_binned_stats: cell " + std::to_string(c) + " does not exist");
  const Tracer tracer(scene, trace);

  struct Sample
  {
    std::size_t bin;
    double value;
    bool valid;
  };
  std::vector<Sample> samples(cells.size() * points.size());
  parallel_for(samples.size(), workers, [&](std::size_t k) {
    const Vec3 tx = scene.cells[cells[k / points.size()]].antenna();
    const Vec3 rx = points[k % points.size()];
    if (tx == rx)
    {
      samples[k] = {0, 0.0, false};
      return;
    }
    const double d = distance(tx.xy(), rx.xy());
    samples[k] = {static_cast<std::size_t>(std::floor(d / bin_width_m)),
                  relative_power(tracer.trace(tx, rx), trace.frequency_ghz), true};
  });

  std::size_t nbins = 0;
  for (const auto& s : samples)
    if (s.valid)
      nbins = std::max(nbins, s.bin + 1);
  std::vector<std::vector<double>> pooled(nbins);
  for (const auto& s : samples)
    if (s.valid)
      pooled[s.bin].push_back(s.value);

  std::vector<DistanceBin> bins(nbins);
  for (std::size_t b = 0; b < nbins; ++b)
  {
    bins[b].start_m = static_cast<double>(b) * bin_width_m;
    auto& v = pooled[b];
    bins[b].count = v.size();
    if (v.empty())
      continue;
    std::sort(v.begin(), v.end());
    bins[b].p10_db = quantile_sorted(v, 0.1);
    bins[b].median_db = quantile_sorted(v, 0.5);
    bins[b].p90_db = quantile_sorted(v, 0.9);
  }
  return bins;
}

inline std::string bins_to_csv(const std::vector<DistanceBin>& bins)
{
  using report_detail::fixed;
  std::string out = "bin_start_m,count,p10_db,median_db,p90_db\n";
  for (const auto& b : bins)
  {
    out += fixed(b.start_m, 1) + ',' + std::to_string(b.count) + ',';
    if (b.count)
      out += fixed(b.p10_db, 2) + ',' + fixed(b.median_db, 2) + ',' + fixed(b.p90_db, 2);
    else
      out += ",,";
    out += '\n';
  }
  return out;
}

/// Copy of `scene` with an opaque box added. The box must lie inside bounds.
inline Scene insert_obstruction(const Scene& scene, const ObstructionBox& box)
{
  if (!(box.length > 0.0 && box.width > 0.0 && box.height > 0.0))
    throw Error("insert_obstruction: box dimensions must be > 0");
  for (Vec2 p : box.footprint())
    if (!scene.bounds.contains(p))
      throw Error("insert_obstruction: box extends outside the scene bounds");
  Scene out = scene;
  out.boxes.push_back(box);
  validate_scene(out);
  return out;
}

/// One straight piece of a breakline: segment `segment` runs from vertex
/// `segment` to vertex `segment + 1` of breakline `breakline`.
struct StreetSelector
{
  std::size_t breakline = 0;
  std::size_t segment = 0;
};

struct ObstructionReport
{
  std::size_t cell_a = 0;  ///< flanking cell before the box along the street
  std::size_t cell_b = 0;  ///< flanking cell after the box
  Vec2 street_from;
  Vec2 street_to;
  std::vector<IterationResult> baseline;
  std::vector<IterationResult> obstructed;
  double baseline_outage_pct = 0.0;
  double obstructed_outage_pct = 0.0;
  double outage_delta_pct = 0.0;  ///< obstructed minus baseline
  double baseline_edge_sinr_db = kNegInf;
  double obstructed_edge_sinr_db = kNegInf;
  double edge_sinr_degradation_db = 0.0;  ///< baseline minus obstructed
};

/// Mean SINR (dB) of the worst ceil(10%) of pooled users.
inline double cell_edge_sinr(const std::vector<IterationResult>& runs)
{
  std::vector<double> v;
  for (const auto& it : runs)
    for (const auto& u : it.users)
      v.push_back(u.sinr_db);
  if (v.empty())
    return kNegInf;
  std::sort(v.begin(), v.end());
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(v.size()))));
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    sum += v[i];
  return sum / static_cast<double>(k);
}

inline double outage_pct(const std::vector<IterationResult>& runs)
{
  std::size_t n = 0;
  std::size_t out = 0;
  for (const auto& it : runs)
    for (const auto& u : it.users)
    {
      ++n;
      out += u.outage ? 1 : 0;
    }
  return n ? 100.0 * static_cast<double>(out) / static_cast<double>(n) : 0.0;
}

/// The two cells closest to the box on either side along the street, among
/// cells within `corridor_m` of the street line.
inline std::pair<std::size_t, std::size_t> flanking_cells(const Scene& scene, Vec2 from, Vec2 to, Vec2 box_center,
                                                          double corridor_m)
{
  const Vec2 dir = to - from;
  const double len2 = dot(dir, dir);
  const double t_box = dot(box_center - from, dir) / len2;
  std::optional<std::size_t> before;
  std::optional<std::size_t> after;
  double t_before = -std::numeric_limits<double>::infinity();
  double t_after = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < scene.cells.size(); ++c)
  {
    const Vec2 p = scene.cells[c].position;
    if (distance_to_line(p, from, to) > corridor_m)
      continue;
    const double t = dot(p - from, dir) / len2;
    if (t < t_box && t > t_before)
    {
      t_before = t;
      before = c;
    }
    if (t > t_box && t < t_after)
    {
      t_after = t;
      after = c;
    }
  }
  if (!before || !after)
    throw Error("obstruction_study: the box is not flanked by a cell on both sides of the street");
  return {*before, *after};
}

/// Baseline vs. obstructed single-cell analysis (no inter-cell interference)
/// for users on the selected street between the two cells flanking the box.
/// Each of config.iterations drops uses seed config.seed + i; positions inside
/// buildings or the box are redrawn.
inline ObstructionReport obstruction_study(const Scene& scene, const ObstructionBox& box,
                                           const StreetSelector& street, CampaignConfig config,
                                           std::size_t workers = 1, double corridor_m = 15.0)
{
  config.validate();
  if (street.breakline >= scene.breaklines.size() ||
      street.segment + 1 >= scene.breaklines[street.breakline].size())
    throw Error("obstruction_study: street selector matches no breakline segment");
  const Vec2 from = scene.breaklines[street.breakline][street.segment];
  const Vec2 to = scene.breaklines[street.breakline][street.segment + 1];
  if (from == to)
    throw Error("obstruction_study: selected segment has zero length");

  config.interference = false;
  const Scene blocked = insert_obstruction(scene, box);
  ObstructionReport rep;
  rep.street_from = from;
  rep.street_to = to;
  std::tie(rep.cell_a, rep.cell_b) = flanking_cells(scene, from, to, box.center, corridor_m);

  // Users go on the part of the segment between the cells' projections.
  const Vec2 dir = to - from;
  const double len2 = dot(dir, dir);
  const double t0 = std::clamp(dot(scene.cells[rep.cell_a].position - from, dir) / len2, 0.0, 1.0);
  const double t1 = std::clamp(dot(scene.cells[rep.cell_b].position - from, dir) / len2, 0.0, 1.0);
  const std::size_t n = std::max<std::size_t>(1, user_count(config.density_per_km2, scene.bounds.area_km2()));

  const Tracer base_tracer(scene, config.trace);
  const Tracer box_tracer(blocked, config.trace);
  const std::vector<std::size_t> cells{rep.cell_a, rep.cell_b};
  const auto iterations = static_cast<std::size_t>(config.iterations);
  rep.baseline.resize(iterations);
  rep.obstructed.resize(iterations);
  parallel_for(iterations, workers, [&](std::size_t i) {
    const std::uint64_t seed = config.seed + i;
    Rng rng(seed);
    std::vector<UserTerminal> users;
    std::size_t attempts = 0;
    while (users.size() < n)
    {
      if (++attempts > 1000 * n)
        throw Error("obstruction_study: cannot place users outside obstacles on the street");
      UserTerminal u = config.user_prototype();
      u.position = from + (t0 + (t1 - t0) * uniform01(rng)) * dir;
      if (inside_opaque(blocked, u.position))
        continue;
      users.push_back(u);
    }
    rep.baseline[i] = evaluate_users(base_tracer, users, cells, config, seed);
    rep.obstructed[i] = evaluate_users(box_tracer, users, cells, config, seed);
  });

  rep.baseline_outage_pct = outage_pct(rep.baseline);
  rep.obstructed_outage_pct = outage_pct(rep.obstructed);
  rep.outage_delta_pct = rep.obstructed_outage_pct - rep.baseline_outage_pct;
  rep.baseline_edge_sinr_db = cell_edge_sinr(rep.baseline);
  rep.obstructed_edge_sinr_db = cell_edge_sinr(rep.obstructed);
  rep.edge_sinr_degradation_db = rep.baseline_edge_sinr_db - rep.obstructed_edge_sinr_db;
  return rep;
}

inline nlohmann::ordered_json obstruction_to_json(const ObstructionReport& r)
{
  using report_detail::db;
  using report_detail::rounded;
  nlohmann::ordered_json j;
  j["cells"] = {r.cell_a, r.cell_b};
  j["street"] = {{r.street_from.x, r.street_from.y}, {r.street_to.x, r.street_to.y}};
  j["iterations"] = r.baseline.size();
  j["users_per_iteration"] = r.baseline.empty() ? 0 : r.baseline.front().users.size();
  j["baseline_outage_pct"] = rounded(r.baseline_outage_pct, 2);
  j["obstructed_outage_pct"] = rounded(r.obstructed_outage_pct, 2);
  j["outage_delta_pct"] = rounded(r.outage_delta_pct, 2);
  j["baseline_edge_sinr_db"] = db(r.baseline_edge_sinr_db);
  j["obstructed_edge_sinr_db"] = db(r.obstructed_edge_sinr_db);
  j["edge_sinr_degradation_db"] = db(r.edge_sinr_degradation_db);
  return j;
}

/// Per-user baseline vs. obstructed table.
inline std::string obstruction_users_csv(const ObstructionReport& r)
{
  using report_detail::fixed;
  std::string out = "iteration,user,x,y,baseline_cell,baseline_sinr_db,baseline_outage,obstructed_cell,"
                    "obstructed_sinr_db,obstructed_outage\n";
  for (std::size_t i = 0; i < r.baseline.size(); ++i)
  {
    for (std::size_t k = 0; k < r.baseline[i].users.size(); ++k)
    {
      const auto& b = r.baseline[i].users[k];
      const auto& o = r.obstructed[i].users[k];
      out += std::to_string(i) + ',' + std::to_string(k) + ',' + fixed(b.position.x, 2) + ',' +
             fixed(b.position.y, 2) + ',' + std::to_string(b.cell) + ',' + fixed(b.sinr_db, 2) + ',' +
             (b.outage ? "1" : "0") + ',' + std::to_string(o.cell) + ',' + fixed(o.sinr_db, 2) + ',' +
             (o.outage ? "1" : "0") + '\n';
    }
  }
  return out;
}

} // namespace mmcell
