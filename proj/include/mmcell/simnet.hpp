#pragma once

#include "mmcell/error.hpp"
#include "mmcell/parallel.hpp"
#include "mmcell/radio.hpp"
#include "mmcell/raytrace.hpp"
#include "mmcell/scene.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mmcell {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Everything a Monte-Carlo campaign depends on. Worker count is deliberately
/// not part of it: results do not depend on parallelism.
struct CampaignConfig
{
  LinkBudget budget;
  AntennaPattern pattern = wide_beam_pattern();
  TraceConfig trace;
  /// Defaults to McsTable::default_table(budget).
  std::optional<McsTable> mcs;
  std::string mcs_table_path;  ///< echo only
  double rx_height_m = 2.0;
  double rx_gain_dbi = 5.0;
  double demand_mbps = 15.0;
  double density_per_km2 = 200.0;
  int iterations = 30;
  std::uint64_t seed = 1;
  bool interference = true;
  int max_rounds = 10;
  double load_tolerance = 1e-3;
  /// Traces every (cell, user) pair once per iteration; off re-traces on use.
  bool cache_paths = true;

  /// Cell transmit power holding the EIRP for the configured antenna.
  double tx_power_dbm() const { return budget.tx_power_for(pattern); }
  McsTable table() const { return mcs ? *mcs : McsTable::default_table(budget); }

  std::vector<std::string> problems() const
  {
    std::vector<std::string> out = budget.problems();
    for (auto& p : pattern.problems())
      out.push_back(std::move(p));
    for (auto& p : trace.problems())
      out.push_back(std::move(p));
    if (!(rx_height_m > 0.0))
      out.push_back("rx_height_m must be > 0");
    if (!(demand_mbps > 0.0))
      out.push_back("demand_mbps must be > 0");
    if (!(density_per_km2 > 0.0))
      out.push_back("density_per_km2 must be > 0");
    if (iterations < 1)
      out.push_back("iterations must be >= 1");
    if (max_rounds < 1)
      out.push_back("max_rounds must be >= 1");
    if (!(load_tolerance > 0.0))
      out.push_back("load_tolerance must be > 0");
    return out;
  }

  void validate() const
  {
    if (auto p = problems(); !p.empty())
      throw ValidationError(std::move(p));
  }

  UserTerminal user_prototype() const
  {
    UserTerminal u;
    u.height = rx_height_m;
    u.antenna_gain_dbi = rx_gain_dbi;
    u.demand_mbps = demand_mbps;
    return u;
  }
};

/// Path sets from a list of candidate cells ("slots") to every user.
class LinkSet
{
public:
  LinkSet(const Tracer& tracer, std::vector<std::size_t> cells, const std::vector<UserTerminal>& users, bool cached)
    : tracer_(&tracer), cells_(std::move(cells)), users_(users), cached_(cached)
  {
    for (std::size_t c : cells_)
      if (c >= tracer.scene().cells.size())
        throw Error("link set: cell " + std::to_string(c) + " does not exist");
    if (cached_)
    {
      paths_.resize(cells_.size() * users_.size());
      for (std::size_t s = 0; s < cells_.size(); ++s)
        for (std::size_t u = 0; u < users_.size(); ++u)
          paths_[s * users_.size() + u] = trace(s, u);
    }
  }

  const std::vector<std::size_t>& cells() const { return cells_; }
  const std::vector<UserTerminal>& users() const { return users_; }
  std::size_t slot_count() const { return cells_.size(); }
  std::size_t user_count() const { return users_.size(); }

  /// Calls fn(paths) for the (slot, user) pair.
  template <typename Fn>
  decltype(auto) with_paths(std::size_t slot, std::size_t user, Fn&& fn) const
  {
    if (cached_)
      return fn(paths_[slot * users_.size() + user]);
    const auto paths = trace(slot, user);
    return fn(paths);
  }

private:
  std::vector<PathContribution> trace(std::size_t slot, std::size_t user) const
  {
    const Vec3 tx = tracer_->scene().cells[cells_[slot]].antenna();
    const Vec3 rx = users_[user].antenna();
    if (tx == rx)
      return {};
    return tracer_->trace(tx, rx);
  }

  const Tracer* tracer_;
  std::vector<std::size_t> cells_;
  std::vector<UserTerminal> users_;
  bool cached_;
  std::vector<std::vector<PathContribution>> paths_;
};

struct Attachment
{
  std::size_t user = 0;
  std::size_t slot = 0;
  std::size_t cell = 0;  ///< scene cell index
  double steer_az_deg = 0.0;
  double signal_dbm = kNegInf;
  double snr_db = kNegInf;
  /// No path at all, or SNR below the lowest MCS requirement.
  bool outage_candidate = true;
};

/// Max-SNR attachment over every cell and beam of the grid. Ties go to the
/// earlier slot; users with no path stay on slot 0 with -inf SNR.
inline std::vector<Attachment> attach_users(const LinkSet& links, const CampaignConfig& config)
{
  const double tx = config.tx_power_dbm();
  const double noise = noise_floor(config.budget);
  const double req = config.table().lowest_requirement_db();
  std::vector<Attachment> out;
  out.reserve(links.user_count());
  for (std::size_t u = 0; u < links.user_count(); ++u)
  {
    Attachment a;
    a.user = u;
    a.cell = links.slot_count() ? links.cells()[0] : 0;
    const double rx_gain = links.users()[u].antenna_gain_dbi;
    for (std::size_t s = 0; s < links.slot_count(); ++s)
    {
      links.with_paths(s, u, [&](const std::vector<PathContribution>& paths) {
        if (paths.empty())
          return;
        const BeamChoice beam = best_beam(paths, tx, config.pattern, rx_gain, config.budget.impairment_db);
        if (beam.power_dbm > a.signal_dbm)
        {
          a.slot = s;
          a.cell = links.cells()[s];
          a.steer_az_deg = beam.steer_az_deg;
          a.signal_dbm = beam.power_dbm;
        }
      });
    }
    a.snr_db = a.signal_dbm - noise;
    a.outage_candidate = !(a.snr_db >= req);
    out.push_back(a);
  }
  return out;
}

struct CellState
{
  std::size_t cell = 0;
  double load = 0.0;
  /// Resource share requested before saturation scaling (may exceed 1).
  double requested = 0.0;
  std::vector<std::size_t> users;
};

struct UserState
{
  double interference_mw = 0.0;
  double sinr_db = kNegInf;
  std::optional<McsEntry> mcs;
  double tau = 0.0;
  double served_mbps = 0.0;
};

struct SystemState
{
  std::vector<CellState> cells;  ///< one per link slot
  std::vector<UserState> users;
  bool converged = false;
  int rounds = 0;
};

/// Load / interference fixed point under non-full-buffer traffic. Interference
/// at u is the load-weighted sum, over users v of other cells, of the power u
/// receives from v's cell steered at v. Iteration starts from SINR = SNR, or
/// from the SINRs of `warm_start` when given.
inline SystemState compute_system_state(const LinkSet& links, const std::vector<Attachment>& attachments,
                                        const CampaignConfig& config, const SystemState* warm_start = nullptr)
{
  const std::size_t n = attachments.size();
  if (n != links.user_count())
    throw Error("compute_system_state: attachment count does not match users");
  const McsTable table = config.table();
  const double noise_mw = db_to_linear(noise_floor(config.budget));
  const double tx = config.tx_power_dbm();

  // coupling[u][v]: power at u from v's serving cell aimed at v, in mW.
  std::vector<std::vector<std::pair<std::size_t, double>>> coupling(n);
  if (config.interference)
  {
    for (std::size_t u = 0; u < n; ++u)
    {
      const double rx_gain = links.users()[u].antenna_gain_dbi;
      for (std::size_t v = 0; v < n; ++v)
      {
        if (attachments[v].slot == attachments[u].slot || !std::isfinite(attachments[v].signal_dbm))
          continue;
        const double p = links.with_paths(attachments[v].slot, u, [&](const std::vector<PathContribution>& paths) {
          return db_to_linear(received_power(paths, tx, config.pattern, attachments[v].steer_az_deg, rx_gain,
                                             config.budget.impairment_db));
        });
        if (p > 0.0)
          coupling[u].emplace_back(v, p);
      }
    }
  }

  SystemState state;
  state.cells.resize(links.slot_count());
  for (std::size_t s = 0; s < links.slot_count(); ++s)
    state.cells[s].cell = links.cells()[s];
  for (std::size_t u = 0; u < n; ++u)
    state.cells[attachments[u].slot].users.push_back(u);
  state.users.resize(n);
  if (warm_start && warm_start->users.size() != n)
    throw Error("compute_system_state: warm start does not match users");
  for (std::size_t u = 0; u < n; ++u)
    state.users[u].sinr_db = warm_start ? warm_start->users[u].sinr_db : attachments[u].snr_db;

  auto allocate = [&] {
    for (auto& cell : state.cells)
    {
      double want = 0.0;
      for (std::size_t u : cell.users)
      {
        auto& us = state.users[u];
        us.mcs = select_mcs(us.sinr_db, table);
        us.tau = us.mcs ? links.users()[u].demand_mbps / us.mcs->rate_mbps : 0.0;
        want += us.tau;
      }
      cell.requested = want;
      const double scale = want > 1.0 ? 1.0 / want : 1.0;
      cell.load = 0.0;
      for (std::size_t u : cell.users)
      {
        auto& us = state.users[u];
        us.tau *= scale;
        us.served_mbps = us.mcs ? us.tau * us.mcs->rate_mbps : 0.0;
        cell.load += us.tau;
      }
      cell.load = std::min(cell.load, 1.0);
    }
  };

  allocate();
  for (int round = 1; round <= config.max_rounds; ++round)
  {
    std::vector<double> before;
    for (const auto& c : state.cells)
      before.push_back(c.load);
    for (std::size_t u = 0; u < n; ++u)
    {
      double interference = 0.0;
      for (const auto& [v, p] : coupling[u])
        interference += state.users[v].tau * p;
      state.users[u].interference_mw = interference;
      state.users[u].sinr_db = interference > 0.0
                                   ? linear_to_db(db_to_linear(attachments[u].signal_dbm) / (noise_mw + interference))
                                   : attachments[u].snr_db;
    }
    allocate();
    state.rounds = round;
    double delta = 0.0;
    for (std::size_t s = 0; s < state.cells.size(); ++s)
      delta = std::max(delta, std::abs(state.cells[s].load - before[s]));
    if (delta < config.load_tolerance)
    {
      state.converged = true;
      break;
    }
  }
  return state;
}

struct UserRecord
{
  std::size_t user = 0;
  Vec2 position;
  std::size_t cell = 0;
  double steer_az_deg = 0.0;
  double signal_dbm = kNegInf;
  double snr_db = kNegInf;
  double interference_dbm = kNegInf;  ///< -inf when no interferer is active
  double sinr_db = kNegInf;
  int mcs = 0;  ///< 0 when no scheme is feasible
  double rate_mbps = 0.0;  ///< PHY rate of the selected scheme
  double served_mbps = 0.0;
  double tau = 0.0;
  bool outage = true;
  double se = 0.0;  ///< b/s/Hz
};

struct IterationResult
{
  std::uint64_t seed = 0;
  std::vector<UserRecord> users;
  std::vector<double> cell_loads;  ///< one per active cell
  bool converged = true;
  int rounds = 0;
};

/// Evaluates a fixed user set against the given cells.
inline IterationResult evaluate_users(const Tracer& tracer, const std::vector<UserTerminal>& users,
                                      const std::vector<std::size_t>& cells, const CampaignConfig& config,
                                      std::uint64_t seed)
{
  IterationResult result;
  result.seed = seed;
  if (users.empty())
    return result;
  const LinkSet links(tracer, cells, users, config.cache_paths);
  const auto attachments = attach_users(links, config);
  const auto state = compute_system_state(links, attachments, config);
  result.converged = state.converged;
  result.rounds = state.rounds;
  for (const auto& c : state.cells)
    result.cell_loads.push_back(c.load);
  for (std::size_t u = 0; u < users.size(); ++u)
  {
    const auto& a = attachments[u];
    const auto& s = state.users[u];
    UserRecord r;
    r.user = u;
    r.position = users[u].position;
    r.cell = a.cell;
    r.steer_az_deg = a.steer_az_deg;
    r.signal_dbm = a.signal_dbm;
    r.snr_db = a.snr_db;
    r.interference_dbm = linear_to_db(s.interference_mw);
    r.sinr_db = s.sinr_db;
    r.outage = !s.mcs.has_value();
    if (s.mcs)
    {
      r.mcs = s.mcs->index;
      r.rate_mbps = s.mcs->rate_mbps;
      r.se = s.mcs->spectral_efficiency;
    }
    r.served_mbps = s.served_mbps;
    r.tau = s.tau;
    result.users.push_back(r);
  }
  return result;
}

inline std::vector<std::size_t> all_cells(const Scene& scene)
{
  std::vector<std::size_t> cells(scene.cells.size());
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  return cells;
}

/// One Monte-Carlo drop: users -> attachment -> fixed point -> metrics.
inline IterationResult run_iteration(const Tracer& tracer, const CampaignConfig& config, std::uint64_t seed)
{
  const Scene& scene = tracer.scene();
  if (scene.cells.empty())
    throw Error("run_iteration: scene has no cells");
  const auto users = drop_users(scene, config.density_per_km2, seed, config.user_prototype());
  return evaluate_users(tracer, users, all_cells(scene), config, seed);
}

inline IterationResult run_iteration(const Scene& scene, const CampaignConfig& config, std::uint64_t seed)
{
  config.validate();
  const Tracer tracer(scene, config.trace);
  return run_iteration(tracer, config, seed);
}

/// Order statistic used for every percentile: sorted[min(floor(p n), n - 1)].
inline double quantile_sorted(const std::vector<double>& sorted, double p)
{
  if (sorted.empty())
    return std::numeric_limits<double>::quiet_NaN();
  const auto k = static_cast<std::size_t>(std::floor(p * static_cast<double>(sorted.size())));
  return sorted[std::min(k, sorted.size() - 1)];
}

inline double quantile(std::vector<double> samples, double p)
{
  std::sort(samples.begin(), samples.end());
  return quantile_sorted(samples, p);
}

struct SimulationReport
{
  CampaignConfig config;
  std::vector<IterationResult> iterations;
  std::size_t user_samples = 0;
  double outage_pct = 0.0;
  double unsatisfied_demand_pct = 0.0;
  double mean_se = 0.0;
  double cell_edge_se = 0.0;
  double mean_load = 0.0;
  double max_load = 0.0;
  double mean_signal_dbm = kNegInf;  ///< linear average, in dBm
  double mean_interference_dbm = kNegInf;  ///< linear average over all users, in dBm
  double p90_interference_dbm = kNegInf;
  double mean_sinr_db = kNegInf;  ///< average of finite dB values
  std::size_t unconverged_iterations = 0;
  std::vector<double> interference_samples;  ///< pooled, sorted, may hold -inf
  std::vector<double> sinr_samples;  ///< pooled, sorted, may hold -inf
};

/// Pools the iteration results (in iteration order) into campaign metrics.
inline SimulationReport aggregate(const CampaignConfig& config, std::vector<IterationResult> iterations)
{
  SimulationReport r;
  r.config = config;
  r.iterations = std::move(iterations);

  std::vector<double> se;
  double signal_mw = 0.0;
  double interference_mw = 0.0;
  double sinr_sum = 0.0;
  std::size_t sinr_count = 0;
  std::size_t outages = 0;
  double demand = 0.0;
  double served = 0.0;
  std::size_t load_count = 0;
  double load_sum = 0.0;
  for (const auto& it : r.iterations)
  {
    if (!it.converged)
      ++r.unconverged_iterations;
    for (double l : it.cell_loads)
    {
      load_sum += l;
      r.max_load = std::max(r.max_load, l);
      ++load_count;
    }
    for (const auto& u : it.users)
    {
      se.push_back(u.se);
      signal_mw += db_to_linear(u.signal_dbm);
      interference_mw += db_to_linear(u.interference_dbm);
      if (std::isfinite(u.sinr_db))
      {
        sinr_sum += u.sinr_db;
        ++sinr_count;
      }
      r.interference_samples.push_back(u.interference_dbm);
      r.sinr_samples.push_back(u.sinr_db);
      if (u.outage)
        ++outages;
      else
      {
        demand += config.demand_mbps;
        served += u.served_mbps;
      }
    }
  }
  const std::size_t n = se.size();
  r.user_samples = n;
  r.mean_load = load_count ? load_sum / static_cast<double>(load_count) : 0.0;
  std::sort(r.interference_samples.begin(), r.interference_samples.end());
  std::sort(r.sinr_samples.begin(), r.sinr_samples.end());
  if (n == 0)
    return r;
  const double dn = static_cast<double>(n);
  r.outage_pct = 100.0 * static_cast<double>(outages) / dn;
  r.unsatisfied_demand_pct = demand > 0.0 ? 100.0 * std::max(0.0, demand - served) / demand : 0.0;
  r.mean_se = std::accumulate(se.begin(), se.end(), 0.0) / dn;
  std::sort(se.begin(), se.end());
  const std::size_t edge = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.1 * dn)));
  r.cell_edge_se = std::accumulate(se.begin(), se.begin() + static_cast<std::ptrdiff_t>(edge), 0.0) /
                   static_cast<double>(edge);
  r.mean_signal_dbm = linear_to_db(signal_mw / dn);
  r.mean_interference_dbm = linear_to_db(interference_mw / dn);
  r.p90_interference_dbm = quantile_sorted(r.interference_samples, 0.9);
  r.mean_sinr_db = sinr_count ? sinr_sum / static_cast<double>(sinr_count) : kNegInf;
  return r;
}

/// Runs iterations with seeds seed, seed + 1, ... in parallel and pools them.
inline SimulationReport run_campaign(const Scene& scene, const CampaignConfig& config, std::size_t workers = 1)
{
  config.validate();
  if (scene.cells.empty())
    throw Error("run_campaign: scene has no cells");
  const Tracer tracer(scene, config.trace);
  std::vector<IterationResult> results(static_cast<std::size_t>(config.iterations));
  parallel_for(results.size(), workers,
               [&](std::size_t i) { results[i] = run_iteration(tracer, config, config.seed + i); });
  return aggregate(config, std::move(results));
}

struct AntennaComparison
{
  SimulationReport a;
  SimulationReport b;
  double tx_power_a_dbm = 0.0;
  double tx_power_b_dbm = 0.0;
  // b minus a
  double delta_signal_db = 0.0;
  double delta_interference_db = 0.0;
  double delta_sinr_db = 0.0;
  double delta_outage_pct = 0.0;
};

/// Same scene, drops and EIRP; only the cell antenna differs.
inline AntennaComparison compare_antennas(const Scene& scene, const CampaignConfig& config,
                                          const AntennaPattern& pattern_a, const AntennaPattern& pattern_b,
                                          std::size_t workers = 1)
{
  CampaignConfig ca = config;
  ca.pattern = pattern_a;
  CampaignConfig cb = config;
  cb.pattern = pattern_b;
  AntennaComparison out;
  out.a = run_campaign(scene, ca, workers);
  out.b = run_campaign(scene, cb, workers);
  out.tx_power_a_dbm = ca.tx_power_dbm();
  out.tx_power_b_dbm = cb.tx_power_dbm();
  out.delta_signal_db = out.b.mean_signal_dbm - out.a.mean_signal_dbm;
  out.delta_interference_db = out.b.mean_interference_dbm - out.a.mean_interference_dbm;
  out.delta_sinr_db = out.b.mean_sinr_db - out.a.mean_sinr_db;
  out.delta_outage_pct = out.b.outage_pct - out.a.outage_pct;
  return out;
}

// ---------------------------------------------------------------------------
// Serialization. Numbers are rounded (dB to 0.01, rates to 0.1 Mbps) so the
// outputs are byte-stable.

namespace report_detail {

using nlohmann::ordered_json;

inline double rounded(double x, int decimals)
{
  const double scale = std::pow(10.0, decimals);
  const double r = std::round(x * scale) / scale;
  return r == 0.0 ? 0.0 : r;  // no "-0"
}

inline ordered_json db(double x)
{
  if (!std::isfinite(x))
    return nullptr;
  return rounded(x, 2);
}

inline std::string fixed(double x, int decimals)
{
  if (std::isinf(x))
    return x < 0 ? "-inf" : "inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, rounded(x, decimals));
  return buf;
}

} // namespace report_detail

inline nlohmann::ordered_json campaign_config_to_json(const CampaignConfig& c)
{
  using nlohmann::ordered_json;
  ordered_json j;
  j["frequency_ghz"] = c.trace.frequency_ghz;
  j["bandwidth_mhz"] = c.budget.bandwidth_mhz;
  j["eirp_dbm"] = c.budget.eirp_dbm;
  j["noise_figure_db"] = c.budget.noise_figure_db;
  j["impairment_db"] = c.budget.impairment_db;
  j["pattern"] = {{"max_gain_dbi", c.pattern.max_gain_dbi},
                  {"hpbw_deg", c.pattern.hpbw_az_deg},
                  {"hpbw_el_deg", c.pattern.hpbw_el_deg},
                  {"steering_resolution_deg", c.pattern.steering_resolution_deg},
                  {"floor_db", c.pattern.floor_db}};
  j["rx_height_m"] = c.rx_height_m;
  j["rx_gain_dbi"] = c.rx_gain_dbi;
  j["demand_mbps"] = c.demand_mbps;
  j["density_per_km2"] = c.density_per_km2;
  j["iterations"] = c.iterations;
  j["seed"] = c.seed;
  j["interference"] = c.interference;
  j["max_rounds"] = c.max_rounds;
  j["load_tolerance"] = c.load_tolerance;
  j["trace"] = {{"max_reflection_order", c.trace.max_reflection_order},
                {"enable_edge_diffraction", c.trace.enable_edge_diffraction},
                {"combine_edge_with_reflection", c.trace.combine_edge_with_reflection},
                {"reflect_off_boxes", c.trace.reflect_off_boxes},
                {"box_lateral_diffraction", c.trace.box_lateral_diffraction},
                {"enable_diffuse", c.trace.enable_diffuse},
                {"max_paths", c.trace.max_paths},
                {"reflection_loss_db", c.trace.reflection_loss_db},
                {"min_path_power_rel_db", c.trace.min_path_power_rel_db}};
  if (c.mcs)
  {
    ordered_json rows = ordered_json::array();
    for (const auto& e : c.mcs->entries())
      rows.push_back({{"index", e.index}, {"sensitivity_dbm", e.sensitivity_dbm}, {"rate_mbps", e.rate_mbps}});
    j["mcs_table"] = rows;
  }
  return j;
}

/// Parses a campaign config document. Every problem found (unknown keys,
/// wrong types, out-of-range values) is reported together. A relative
/// `mcs_table` path is resolved against `base_dir`.
inline CampaignConfig parse_campaign_config(const std::string& text, const std::string& base_dir = ".")
{
  using nlohmann::json;
  json doc;
  try
  {
    doc = json::parse(text);
  }
  catch (const json::parse_error& e)
  {
    throw Error(std::string("config: parse error: ") + e.what());
  }
  if (!doc.is_object())
    throw Error("config: top level must be an object");

  std::vector<std::string> issues;
  CampaignConfig c;
  auto num = [&](const json& obj, const char* key, const std::string& where, auto& target) {
    auto it = obj.find(key);
    if (it == obj.end())
      return;
    if (!it->is_number())
    {
      issues.push_back(where + key + ": expected a number");
      return;
    }
    using T = std::decay_t<decltype(target)>;
    if constexpr (std::is_integral_v<T>)
    {
      if (!it->is_number_integer() || (std::is_unsigned_v<T> && it->get<double>() < 0))
      {
        issues.push_back(where + key + ": expected a non-negative integer");
        return;
      }
    }
    target = it->get<T>();
  };
  auto flag = [&](const json& obj, const char* key, const std::string& where, bool& target) {
    auto it = obj.find(key);
    if (it == obj.end())
      return;
    if (!it->is_boolean())
    {
      issues.push_back(where + key + ": expected true or false");
      return;
    }
    target = it->get<bool>();
  };
  auto check_keys = [&](const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items())
      if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; }) ==
          allowed.end())
        issues.push_back(where + "unknown key \"" + item.key() + "\"");
  };

  check_keys(doc, "config: ",
             {"frequency_ghz", "bandwidth_mhz", "eirp_dbm", "noise_figure_db", "impairment_db", "pattern",
              "rx_height_m", "rx_gain_dbi", "demand_mbps", "density_per_km2", "iterations", "seed", "interference",
              "max_rounds", "load_tolerance", "trace", "mcs_table"});
  num(doc, "frequency_ghz", "", c.trace.frequency_ghz);
  num(doc, "bandwidth_mhz", "", c.budget.bandwidth_mhz);
  num(doc, "eirp_dbm", "", c.budget.eirp_dbm);
  num(doc, "noise_figure_db", "", c.budget.noise_figure_db);
  num(doc, "impairment_db", "", c.budget.impairment_db);
  num(doc, "rx_height_m", "", c.rx_height_m);
  num(doc, "rx_gain_dbi", "", c.rx_gain_dbi);
  num(doc, "demand_mbps", "", c.demand_mbps);
  num(doc, "density_per_km2", "", c.density_per_km2);
  num(doc, "iterations", "", c.iterations);
  num(doc, "seed", "", c.seed);
  flag(doc, "interference", "", c.interference);
  num(doc, "max_rounds", "", c.max_rounds);
  num(doc, "load_tolerance", "", c.load_tolerance);

  if (auto it = doc.find("pattern"); it != doc.end())
  {
    if (!it->is_object())
      issues.push_back("pattern: expected an object");
    else
    {
      check_keys(*it, "pattern: ", {"max_gain_dbi", "hpbw_deg", "hpbw_el_deg", "steering_resolution_deg", "floor_db"});
      const bool has_el = it->contains("hpbw_el_deg");
      const bool has_res = it->contains("steering_resolution_deg");
      num(*it, "max_gain_dbi", "pattern.", c.pattern.max_gain_dbi);
      num(*it, "hpbw_deg", "pattern.", c.pattern.hpbw_az_deg);
      num(*it, "floor_db", "pattern.", c.pattern.floor_db);
      c.pattern.hpbw_el_deg = c.pattern.hpbw_az_deg;
      c.pattern.steering_resolution_deg = c.pattern.hpbw_az_deg / 2.0;
      if (has_el)
        num(*it, "hpbw_el_deg", "pattern.", c.pattern.hpbw_el_deg);
      if (has_res)
        num(*it, "steering_resolution_deg", "pattern.", c.pattern.steering_resolution_deg);
    }
  }

  if (auto it = doc.find("trace"); it != doc.end())
  {
    if (!it->is_object())
      issues.push_back("trace: expected an object");
    else
    {
      check_keys(*it, "trace: ",
                 {"max_reflection_order", "enable_edge_diffraction", "combine_edge_with_reflection",
                  "reflect_off_boxes", "box_lateral_diffraction", "enable_diffuse", "max_paths",
                  "reflection_loss_db", "min_path_power_rel_db"});
      num(*it, "max_reflection_order", "trace.", c.trace.max_reflection_order);
      flag(*it, "enable_edge_diffraction", "trace.", c.trace.enable_edge_diffraction);
      flag(*it, "combine_edge_with_reflection", "trace.", c.trace.combine_edge_with_reflection);
      flag(*it, "reflect_off_boxes", "trace.", c.trace.reflect_off_boxes);
      flag(*it, "box_lateral_diffraction", "trace.", c.trace.box_lateral_diffraction);
      flag(*it, "enable_diffuse", "trace.", c.trace.enable_diffuse);
      num(*it, "max_paths", "trace.", c.trace.max_paths);
      num(*it, "reflection_loss_db", "trace.", c.trace.reflection_loss_db);
      num(*it, "min_path_power_rel_db", "trace.", c.trace.min_path_power_rel_db);
    }
  }

  for (auto& p : c.problems())
    issues.push_back(std::move(p));

  if (auto it = doc.find("mcs_table"); it != doc.end() && issues.empty())
  {
    if (!it->is_string())
      issues.push_back("mcs_table: expected a file path");
    else
    {
      c.mcs_table_path = it->get<std::string>();
      std::string path = c.mcs_table_path;
      if (!path.empty() && path.front() != '/')
        path = base_dir + "/" + path;
      std::ifstream in(path);
      if (!in)
        issues.push_back("mcs_table: cannot open " + path);
      else
      {
        std::stringstream ss;
        ss << in.rdbuf();
        try
        {
          c.mcs = McsTable::parse_csv(ss.str(), c.budget);
        }
        catch (const ValidationError& e)
        {
          for (const auto& s : e.issues())
            issues.push_back(s);
        }
        catch (const Error& e)
        {
          issues.push_back(e.what());
        }
      }
    }
  }

  if (!issues.empty())
    throw ValidationError(std::move(issues));
  return c;
}

inline nlohmann::ordered_json report_to_json(const SimulationReport& r)
{
  using report_detail::db;
  using report_detail::rounded;
  nlohmann::ordered_json j;
  j["iterations"] = r.iterations.size();
  j["user_samples"] = r.user_samples;
  j["tx_power_dbm"] = db(r.config.tx_power_dbm());
  j["noise_floor_dbm"] = db(noise_floor(r.config.budget));
  j["outage_pct"] = rounded(r.outage_pct, 2);
  j["unsatisfied_demand_pct"] = rounded(r.unsatisfied_demand_pct, 2);
  j["mean_se_bps_hz"] = rounded(r.mean_se, 3);
  j["cell_edge_se_bps_hz"] = rounded(r.cell_edge_se, 3);
  j["mean_load_pct"] = rounded(100.0 * r.mean_load, 2);
  j["max_load_pct"] = rounded(100.0 * r.max_load, 2);
  j["mean_signal_dbm"] = db(r.mean_signal_dbm);
  j["mean_interference_dbm"] = db(r.mean_interference_dbm);
  j["p90_interference_dbm"] = db(r.p90_interference_dbm);
  j["mean_sinr_db"] = db(r.mean_sinr_db);
  j["unconverged_iterations"] = r.unconverged_iterations;
  j["config"] = campaign_config_to_json(r.config);
  return j;
}

inline std::string report_to_string(const SimulationReport& r) { return report_to_json(r).dump(2) + "\n"; }

inline std::string users_to_csv(const SimulationReport& r)
{
  using report_detail::fixed;
  std::string out = "iteration,seed,user,x,y,cell,steer_az_deg,signal_dbm,snr_db,interference_dbm,sinr_db,mcs,"
                    "rate_mbps,served_mbps,tau,outage,se_bps_hz\n";
  for (std::size_t i = 0; i < r.iterations.size(); ++i)
  {
    const auto& it = r.iterations[i];
    for (const auto& u : it.users)
    {
      out += std::to_string(i) + ',' + std::to_string(it.seed) + ',' + std::to_string(u.user) + ',' +
             fixed(u.position.x, 2) + ',' + fixed(u.position.y, 2) + ',' + std::to_string(u.cell) + ',' +
             fixed(u.steer_az_deg, 2) + ',' + fixed(u.signal_dbm, 2) + ',' + fixed(u.snr_db, 2) + ',' +
             fixed(u.interference_dbm, 2) + ',' + fixed(u.sinr_db, 2) + ',' + std::to_string(u.mcs) + ',' +
             fixed(u.rate_mbps, 1) + ',' + fixed(u.served_mbps, 1) + ',' + fixed(u.tau, 5) + ',' +
             (u.outage ? "1" : "0") + ',' + fixed(u.se, 3) + '\n';
    }
  }
  return out;
}

/// Empirical CDF of pooled samples: one row per finite sample, with the
/// cumulative fraction over all samples (so -inf samples lift the start).
inline std::string cdf_to_csv(const std::vector<double>& sorted)
{
  using report_detail::fixed;
  std::string out = "value_db,cdf\n";
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i)
  {
    if (!std::isfinite(sorted[i]))
      continue;
    out += fixed(sorted[i], 2) + ',' + fixed(static_cast<double>(i + 1) / n, 6) + '\n';
  }
  return out;
}

} // namespace mmcell
