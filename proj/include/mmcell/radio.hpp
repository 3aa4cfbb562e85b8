#pragma once

#include "mmcell/error.hpp"
#include "mmcell/geometry.hpp"
#include "mmcell/raytrace.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mmcell {

/// Parametric steerable beam: Gaussian main lobe in dB, clamped at a floor
/// below the peak, steered in azimuth only (elevation boresight fixed at 0).
struct AntennaPattern
{
  double max_gain_dbi = 18.5;
  double hpbw_az_deg = 22.0;
  double hpbw_el_deg = 22.0;
  double floor_db = 40.0;
  double steering_resolution_deg = 11.0;

  /// Pattern with elevation HPBW equal to azimuth HPBW and, unless given,
  /// a steering step of half the HPBW.
  static AntennaPattern make(double max_gain_dbi, double hpbw_deg, std::optional<double> resolution_deg = {},
                             double floor_db = 40.0)
  {
    return {max_gain_dbi, hpbw_deg, hpbw_deg, floor_db, resolution_deg.value_or(hpbw_deg / 2.0)};
  }

  std::vector<std::string> problems() const
  {
    std::vector<std::string> out;
    if (!(hpbw_az_deg > 0.0) || !(hpbw_el_deg > 0.0))
      out.push_back("pattern: hpbw must be > 0");
    if (!(floor_db > 0.0))
      out.push_back("pattern: floor must be > 0");
    if (!(steering_resolution_deg > 0.0))
      out.push_back("pattern: steering resolution must be > 0");
    return out;
  }
};

/// Antenna used for the baseline deployment: 22 deg HPBW, 18.5 dBi, 11 deg steps.
inline AntennaPattern wide_beam_pattern() { return AntennaPattern::make(18.5, 22.0, 11.0); }

/// Narrower alternative: 15 deg HPBW, 21.9 dBi, 6 deg steps.
inline AntennaPattern narrow_beam_pattern() { return AntennaPattern::make(21.9, 15.0, 6.0); }

inline double pattern_gain(const AntennaPattern& pattern, double steer_az_deg, Direction dir)
{
  const double daz = wrap_deg(dir.azimuth_deg - steer_az_deg) / pattern.hpbw_az_deg;
  const double del = dir.elevation_deg / pattern.hpbw_el_deg;
  return pattern.max_gain_dbi - std::min(12.0 * daz * daz + 12.0 * del * del, pattern.floor_db);
}

/// Steering azimuths 0, r, 2r, ... covering [0, 360).
inline std::vector<double> beam_grid(const AntennaPattern& pattern)
{
  const double r = pattern.steering_resolution_deg;
  if (!(r > 0.0))
    throw Error("beam_grid: steering resolution must be > 0");
  const auto n = static_cast<std::size_t>(std::ceil(360.0 / r - 1e-9));
  std::vector<double> grid(n);
  for (std::size_t k = 0; k < n; ++k)
    grid[k] = static_cast<double>(k) * r;
  return grid;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double linear_to_db(double lin)
{
  return lin > 0.0 ? 10.0 * std::log10(lin) : -std::numeric_limits<double>::infinity();
}

/// Non-coherent sum over paths of the per-path budget, in dBm.
inline double received_power(const std::vector<PathContribution>& paths, double tx_power_dbm,
                             const AntennaPattern& pattern, double steer_az_deg, double rx_gain_dbi,
                             double impairment_db)
{
  double sum_mw = 0.0;
  for (const auto& p : paths)
  {
    sum_mw += db_to_linear(tx_power_dbm + pattern_gain(pattern, steer_az_deg, p.aod) + rx_gain_dbi -
                           p.total_isotropic_loss() - impairment_db);
  }
  return linear_to_db(sum_mw);
}

struct BeamChoice
{
  double steer_az_deg = 0.0;
  double power_dbm = -std::numeric_limits<double>::infinity();
};

/// Exhaustive sweep of the beam grid; ties go to the smallest azimuth.
inline BeamChoice best_beam(const std::vector<PathContribution>& paths, double tx_power_dbm,
                            const AntennaPattern& pattern, double rx_gain_dbi, double impairment_db)
{
  if (paths.empty())
    throw Error("best_beam: no paths");
  BeamChoice best;
  bool first = true;
  for (double az : beam_grid(pattern))
  {
    const double p = received_power(paths, tx_power_dbm, pattern, az, rx_gain_dbi, impairment_db);
    if (first || p > best.power_dbm)
    {
      best = {az, p};
      first = false;
    }
  }
  return best;
}

struct LinkBudget
{
  double bandwidth_mhz = 200.0;
  double noise_figure_db = 7.0;
  double impairment_db = 8.0;
  double eirp_dbm = 40.0;

  /// Transmit power that keeps the EIRP for an antenna of the given peak gain.
  double tx_power_for(const AntennaPattern& pattern) const { return eirp_dbm - pattern.max_gain_dbi; }

  std::vector<std::string> problems() const
  {
    std::vector<std::string> out;
    if (!(bandwidth_mhz > 0.0))
      out.push_back("bandwidth_mhz must be > 0");
    if (!(noise_figure_db >= 0.0))
      out.push_back("noise_figure_db must be >= 0");
    if (!(impairment_db >= 0.0))
      out.push_back("impairment_db must be >= 0");
    return out;
  }
};

/// Thermal noise -174 dBm/Hz over the bandwidth plus the noise figure.
inline double noise_floor(const LinkBudget& budget)
{
  if (!(budget.bandwidth_mhz > 0.0))
    throw Error("noise_floor: bandwidth must be > 0");
  return -174.0 + 10.0 * std::log10(budget.bandwidth_mhz * 1e6) + budget.noise_figure_db;
}

/// Single-carrier PHY rates of the 60 GHz DMG MCS 1..12 at the 1760 MHz chip rate.
inline constexpr std::array<double, 12> kDmgSingleCarrierRatesMbps = {
    385.0, 770.0, 962.5, 1155.0, 1251.25, 1540.0, 1925.0, 2310.0, 2502.5, 3080.0, 3850.0, 4620.0};
inline constexpr double kDmgChipRateMhz = 1760.0;
inline constexpr double kSensitivityLowestDbm = -79.0;
inline constexpr double kSensitivityHighestDbm = -64.0;

struct McsEntry
{
  int index = 0;
  double sensitivity_dbm = 0.0;
  double sinr_req_db = 0.0;
  double rate_mbps = 0.0;
  double spectral_efficiency = 0.0;  ///< b/s/Hz
};

struct McsRow
{
  int index;
  double sensitivity_dbm;
  double rate_mbps;
};

class McsTable
{
public:
  /// Builds a table from receiver sensitivities: each SINR requirement is the
  /// sensitivity minus the noise floor of the budget.
  static McsTable from_rows(const std::vector<McsRow>& rows, const LinkBudget& budget)
  {
    std::vector<std::string> issues;
    if (rows.size() != 12)
      issues.push_back("mcs table: expected 12 rows, got " + std::to_string(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
      if (rows[i].index != static_cast<int>(i) + 1)
        issues.push_back("mcs table row " + std::to_string(i + 1) + ": index must be " + std::to_string(i + 1));
      if (!(rows[i].rate_mbps > 0.0))
        issues.push_back("mcs table row " + std::to_string(i + 1) + ": rate must be > 0");
      if (i > 0 && !(rows[i].sensitivity_dbm > rows[i - 1].sensitivity_dbm))
        issues.push_back("mcs table row " + std::to_string(i + 1) + ": sensitivity not strictly increasing");
      if (i > 0 && !(rows[i].rate_mbps > rows[i - 1].rate_mbps))
        issues.push_back("mcs table row " + std::to_string(i + 1) + ": rate not strictly increasing");
    }
    if (!issues.empty())
      throw ValidationError(std::move(issues));

    const double noise = noise_floor(budget);
    McsTable t;
    for (const auto& r : rows)
    {
      t.entries_.push_back({r.index, r.sensitivity_dbm, r.sensitivity_dbm - noise, r.rate_mbps,
                            r.rate_mbps / budget.bandwidth_mhz});
    }
    return t;
  }

  /// DMG single-carrier rates scaled to the budget bandwidth (rounded to
  /// 0.1 Mbps) with sensitivities evenly spaced from -79 to -64 dBm.
  static McsTable default_table(const LinkBudget& budget = {})
  {
    std::vector<McsRow> rows;
    for (int i = 0; i < 12; ++i)
    {
      const double rate = kDmgSingleCarrierRatesMbps[i] * budget.bandwidth_mhz / kDmgChipRateMhz;
      const double sens = kSensitivityLowestDbm + i * (kSensitivityHighestDbm - kSensitivityLowestDbm) / 11.0;
      rows.push_back({i + 1, sens, std::round(rate * 10.0) / 10.0});
    }
    return from_rows(rows, budget);
  }

  /// Parses `index,sensitivity_dbm,rate_mbps` CSV (header required).
  static McsTable parse_csv(const std::string& text, const LinkBudget& budget)
  {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
      throw Error("mcs table: empty file");
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line != "index,sensitivity_dbm,rate_mbps")
      throw Error("mcs table: header must be index,sensitivity_dbm,rate_mbps");
    std::vector<McsRow> rows;
    int lineno = 1;
    while (std::getline(in, line))
    {
      ++lineno;
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      if (line.empty())
        continue;
      McsRow row{};
      char c1 = 0;
      char c2 = 0;
      std::istringstream ls(line);
      if (!(ls >> row.index >> c1 >> row.sensitivity_dbm >> c2 >> row.rate_mbps) || c1 != ',' || c2 != ',')
        throw Error("mcs table line " + std::to_string(lineno) + ": expected index,sensitivity_dbm,rate_mbps");
      rows.push_back(row);
    }
    return from_rows(rows, budget);
  }

  const std::vector<McsEntry>& entries() const { return entries_; }
  const McsEntry& entry(int index) const { return entries_.at(static_cast<std::size_t>(index - 1)); }
  double lowest_requirement_db() const { return entries_.front().sinr_req_db; }

private:
  std::vector<McsEntry> entries_;
};

/// Highest entry whose requirement is met (inclusive), or none.
inline std::optional<McsEntry> select_mcs(double sinr_db, const McsTable& table)
{
  std::optional<McsEntry> best;
  for (const auto& e : table.entries())
  {
    if (e.sinr_req_db <= sinr_db)
      best = e;
  }
  return best;
}

} // namespace mmcell
