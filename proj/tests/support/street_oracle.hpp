#pragma once

// Straight-street obstruction fixture and an independent single-path budget
// oracle for scenes whose only obstacle is an axis-aligned box (no facades,
// so every link has exactly one path: direct or over the box top).

#include "mmcell/scene.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace mmcell::testing {

/// 110 m x 40 m street: breakline y = 10 from x = 5 to 105, cells at
/// (5, 13) and (105, 13). With `facade`, a 20 m building fills y in [25, 40].
inline Scene obstruction_street(bool facade)
{
  Scene s;
  s.bounds = {0.0, 0.0, 110.0, 40.0};
  s.breaklines.push_back({{5.0, 10.0}, {105.0, 10.0}});
  CellSite c;
  c.position = {5.0, 13.0};
  s.cells.push_back(c);
  c.position = {105.0, 13.0};
  s.cells.push_back(c);
  if (facade)
    s.buildings.push_back({{{0.0, 25.0}, {110.0, 25.0}, {110.0, 40.0}, {0.0, 40.0}}, 20.0});
  validate_scene(s);
  return s;
}

/// The bus of the study: 12 x 2.5 x 3 m, centred on the street.
inline ObstructionBox street_bus()
{
  ObstructionBox b;
  b.center = {35.0, 10.0};
  return b;
}

struct OracleLink
{
  bool blocked = false;      ///< direct line enters the box below its top
  double length_m = 0.0;     ///< unfolded path length
  double knife_db = 0.0;     ///< knife-edge loss over the box top
  double aod_az_deg = 0.0;
  double aod_el_deg = 0.0;
  double free_length_m = 0.0;
};

inline double oracle_knife(double nu)
{
  if (nu <= -0.78)
    return 0.0;
  return 6.9 + 20.0 * std::log10(std::sqrt((nu - 0.1) * (nu - 0.1) + 1.0) + nu - 0.1);
}

/// Geometry of the single tx -> rx path past an axis-aligned box (azimuth 0).
/// The screen sits at the middle of the stretch where the line is inside the
/// box footprint and below its top; the diffraction vertex is on the top.
inline OracleLink oracle_link(Vec3 tx, Vec3 rx, const ObstructionBox& box, double frequency_ghz)
{
  const double lambda = 299792458.0 / (frequency_ghz * 1e9);
  const double x0 = box.center.x - box.length / 2.0;
  const double x1 = box.center.x + box.length / 2.0;
  const double y0 = box.center.y - box.width / 2.0;
  const double y1 = box.center.y + box.width / 2.0;
  const double dx = rx.x - tx.x;
  const double dy = rx.y - tx.y;
  const double dz = rx.z - tx.z;
  const double length = std::sqrt(dx * dx + dy * dy + dz * dz);

  OracleLink out;
  out.free_length_m = length;
  auto direct = [&] {
    out.length_m = length;
    out.aod_az_deg = std::atan2(dy, dx) * 180.0 / M_PI;
    out.aod_el_deg = std::atan2(dz, std::hypot(dx, dy)) * 180.0 / M_PI;
    return out;
  };

  // Liang-Barsky clip of the horizontal projection.
  double t_in = 0.0;
  double t_out = 1.0;
  auto clip = [&](double p, double q) {
    if (p == 0.0)
      return q >= 0.0;
    const double r = q / p;
    if (p < 0.0)
      t_in = std::max(t_in, r);
    else
      t_out = std::min(t_out, r);
    return t_in <= t_out;
  };
  if (!(clip(-dx, tx.x - x0) && clip(dx, x1 - tx.x) && clip(-dy, tx.y - y0) && clip(dy, y1 - tx.y)) ||
      t_out - t_in <= 0.0)
    return direct();

  // Restrict to the part below the top: z(t) = tx.z + t dz < height.
  if (dz == 0.0)
  {
    if (tx.z >= box.height)
      return direct();
  }
  else
  {
    const double t_top = (box.height - tx.z) / dz;
    if (dz > 0.0)
      t_out = std::min(t_out, t_top);
    else
      t_in = std::max(t_in, t_top);
    if (t_out - t_in <= 0.0)
      return direct();
  }

  const double t = 0.5 * (t_in + t_out);
  const double s = t * length;
  const double z_line = tx.z + t * dz;
  const double h = box.height - z_line;
  const double nu = h * std::sqrt(2.0 * length / (lambda * s * (length - s)));
  const Vec3 v{tx.x + t * dx, tx.y + t * dy, std::max(box.height, z_line)};
  out.blocked = true;
  out.knife_db = oracle_knife(nu);
  out.length_m = std::sqrt((v.x - tx.x) * (v.x - tx.x) + (v.y - tx.y) * (v.y - tx.y) + (v.z - tx.z) * (v.z - tx.z)) +
                 std::sqrt((rx.x - v.x) * (rx.x - v.x) + (rx.y - v.y) * (rx.y - v.y) + (rx.z - v.z) * (rx.z - v.z));
  out.aod_az_deg = std::atan2(v.y - tx.y, v.x - tx.x) * 180.0 / M_PI;
  out.aod_el_deg = std::atan2(v.z - tx.z, std::hypot(v.x - tx.x, v.y - tx.y)) * 180.0 / M_PI;
  return out;
}

inline double oracle_fspl_db(double f_ghz, double d)
{
  return 20.0 * std::log10(4.0 * M_PI * d * f_ghz * 1e9 / 299792458.0);
}

struct OracleBudget
{
  double eirp_dbm = 40.0;
  double max_gain_dbi = 18.5;
  double hpbw_deg = 22.0;
  double grid_step_deg = 11.0;
  int grid_size = 33;
  double rx_gain_dbi = 5.0;
  double impairment_db = 8.0;
  double noise_dbm = -174.0 + 10.0 * std::log10(200e6) + 7.0;
  double frequency_ghz = 60.0;
  double window_db = 40.0;  ///< paths weaker than free space by more are dropped
};

/// Best-beam SNR (dB) of the single path, or nullopt when the path is dropped.
inline std::optional<double> oracle_snr(const OracleLink& l, const OracleBudget& b)
{
  const double excess = oracle_fspl_db(b.frequency_ghz, l.length_m) + l.knife_db -
                        oracle_fspl_db(b.frequency_ghz, l.free_length_m);
  if (excess > b.window_db)
    return std::nullopt;
  double best = -1e300;
  for (int k = 0; k < b.grid_size; ++k)
  {
    const double steer = k * b.grid_step_deg;
    const double daz = std::fmod(l.aod_az_deg - steer + 540.0, 360.0) - 180.0;
    const double att = std::min(12.0 * (daz / b.hpbw_deg) * (daz / b.hpbw_deg) +
                                    12.0 * (l.aod_el_deg / b.hpbw_deg) * (l.aod_el_deg / b.hpbw_deg),
                                40.0);
    best = std::max(best, b.max_gain_dbi - att);
  }
  return (b.eirp_dbm - b.max_gain_dbi) + best + b.rx_gain_dbi - oracle_fspl_db(b.frequency_ghz, l.length_m) -
         l.knife_db - b.impairment_db - b.noise_dbm;
}

} // namespace mmcell::testing
