#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage/config error,
// 2 validation findings. Every command that writes results collects its
// payloads in memory first and writes them all (plus manifest.json) only
// once everything succeeded, so an error leaves no partial output.

#include "mmcell/error.hpp"
#include "mmcell/manhattan.hpp"
#include "mmcell/parallel.hpp"
#include "mmcell/raytrace.hpp"
#include "mmcell/scenariolab.hpp"
#include "mmcell/scene_io.hpp"
#include "mmcell/simnet.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mmcell::cli {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kWorkersEnv = "MMCELL_WORKERS";

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view s)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s)
  {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v)
{
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string utc_now()
{
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Campaign config from a JSON file; relative paths inside resolve against
/// the file's directory.
inline CampaignConfig load_campaign_config(const std::string& path)
{
  const std::string text = read_file(path);
  const std::string base = std::filesystem::path(path).parent_path().string();
  try
  {
    return parse_campaign_config(text, base.empty() ? "." : base);
  }
  catch (const ValidationError& e)
  {
    std::vector<std::string> issues;
    for (const auto& s : e.issues())
      issues.push_back(path + ": " + s);
    throw ValidationError(std::move(issues));
  }
  catch (const Error& e)
  {
    throw Error(path + ": " + e.what());
  }
}

/// Payloads of one command, written all-or-nothing.
class OutputSet
{
public:
  void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

  std::vector<std::string> names() const
  {
    std::vector<std::string> out;
    for (const auto& f : files_)
      out.push_back(f.first);
    return out;
  }

  /// Writes every payload and the manifest into `dir`. Files are staged under
  /// temporary names and renamed at the end; on failure the staged files and
  /// a directory created here are removed.
  void commit(const std::filesystem::path& dir, const nlohmann::ordered_json& manifest) const
  {
    namespace fs = std::filesystem;
    std::vector<std::pair<std::string, std::string>> all = files_;
    all.emplace_back("manifest.json", manifest.dump(2) + "\n");

    const bool created = !fs::exists(dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
      throw Error("cannot create output directory " + dir.string());

    std::vector<fs::path> staged;
    auto cleanup = [&] {
      for (const auto& p : staged)
        fs::remove(p, ec);
      if (created)
        fs::remove(dir, ec);
    };
    for (const auto& [name, content] : all)
    {
      const fs::path tmp = dir / ("." + name + ".tmp");
      staged.push_back(tmp);
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << content;
      out.close();
      if (!out)
      {
        cleanup();
        throw Error("cannot write " + (dir / name).string());
      }
    }
    for (std::size_t i = 0; i < all.size(); ++i)
    {
      fs::rename(staged[i], dir / all[i].first, ec);
      if (ec)
      {
        cleanup();
        throw Error("cannot write " + (dir / all[i].first).string());
      }
    }
  }

private:
  std::vector<std::pair<std::string, std::string>> files_;
};

/// Manifest for a run; `hash_input` must hold everything that determines the
/// payloads (scene, effective config, command parameters).
inline nlohmann::ordered_json make_manifest(const std::string& command, const nlohmann::ordered_json& hash_input,
                                            std::uint64_t seed, const std::string& started,
                                            const std::vector<std::string>& files)
{
  nlohmann::ordered_json m;
  m["tool"] = "mmcell";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["config_hash"] = hex64(fnv1a64(hash_input.dump()));
  m["seed"] = seed;
  m["started_utc"] = started;
  m["finished_utc"] = utc_now();
  m["files"] = files;
  return m;
}

inline Vec3 parse_point(const std::string& s, double default_z)
{
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
  {
    try
    {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size())
        throw Error("");
    }
    catch (const std::exception&)
    {
      throw Error("bad point \"" + s + "\": expected x,y or x,y,z");
    }
  }
  if (v.size() != 2 && v.size() != 3)
    throw Error("bad point \"" + s + "\": expected x,y or x,y,z");
  return {v[0], v[1], v.size() == 3 ? v[2] : default_z};
}

struct CampaignOverrides
{
  std::string config_path;
  std::optional<double> density;
  std::optional<int> iterations;
  std::optional<std::uint64_t> seed;
  std::optional<double> eirp;

  void attach(CLI::App* cmd)
  {
    cmd->add_option("--config", config_path, "Campaign config JSON (defaults apply when omitted)");
    cmd->add_option("--density", density, "Override user density (users/km^2)");
    cmd->add_option("--iterations", iterations, "Override Monte-Carlo iteration count");
    cmd->add_option("--seed", seed, "Override base seed");
    cmd->add_option("--eirp", eirp, "Override EIRP (dBm)");
  }

  CampaignConfig resolve() const
  {
    CampaignConfig c = config_path.empty() ? CampaignConfig{} : load_campaign_config(config_path);
    if (density)
      c.density_per_km2 = *density;
    if (iterations)
      c.iterations = *iterations;
    if (seed)
      c.seed = *seed;
    if (eirp)
      c.budget.eirp_dbm = *eirp;
    c.validate();
    return c;
  }
};

struct PatternOptions
{
  double gain = 0.0;
  double hpbw = 0.0;
  double step = 0.0;

  void attach(CLI::App* cmd, const std::string& prefix, const AntennaPattern& def)
  {
    gain = def.max_gain_dbi;
    hpbw = def.hpbw_az_deg;
    step = def.steering_resolution_deg;
    cmd->add_option("--" + prefix + "-gain", gain, "Max gain (dBi)")->capture_default_str();
    cmd->add_option("--" + prefix + "-hpbw", hpbw, "Half-power beamwidth (deg)")->capture_default_str();
    cmd->add_option("--" + prefix + "-step", step, "Steering resolution (deg)")->capture_default_str();
  }

  AntennaPattern pattern() const
  {
    const AntennaPattern p = AntennaPattern::make(gain, hpbw, step);
    if (auto issues = p.problems(); !issues.empty())
      throw ValidationError(std::move(issues));
    return p;
  }
};

inline nlohmann::ordered_json pattern_json(const AntennaPattern& p)
{
  nlohmann::ordered_json j;
  j["max_gain_dbi"] = p.max_gain_dbi;
  j["hpbw_deg"] = p.hpbw_az_deg;
  j["steering_resolution_deg"] = p.steering_resolution_deg;
  return j;
}

// ---------------------------------------------------------------------------
// Commands. Each returns the process exit code.

inline int cmd_scene_validate(const std::string& path, std::ostream& out)
{
  const Scene scene = load_scene(path);
  const auto findings = validate_topology(scene);
  std::size_t warnings = 0;
  for (const auto& f : findings)
  {
    const bool violation = f.severity == TopologyFinding::Severity::violation;
    warnings += violation ? 0 : 1;
    out << (violation ? "violation: " : "warning: ") << f.message << "\n";
  }
  const std::size_t violations = count_violations(findings);
  out << violations << " violations, " << warnings << " warnings\n";
  return violations ? 2 : 0;
}

struct GenerateOptions
{
  std::string blocks = "3x3";
  double street = 20.0;
  double height = 15.0;
  double block_size = 80.0;
  double jitter = 0.0;
  std::optional<double> tree_spacing;
  bool no_cells = false;
  double cell_height = 7.0;
  double setback = 1.0;
  std::uint64_t seed = 1;
  std::string output;
};

inline int cmd_scene_generate(const GenerateOptions& o, std::ostream& out)
{
  static const std::regex kBlocks(R"((\d+)x(\d+))");
  std::smatch m;
  if (!std::regex_match(o.blocks, m, kBlocks))
    throw Error("--blocks must look like 3x3");
  ManhattanParams p;
  p.blocks_x = std::stoi(m[1]);
  p.blocks_y = std::stoi(m[2]);
  p.street_width = o.street;
  p.building_height = o.height;
  p.block_size = o.block_size;
  p.height_jitter = o.jitter;
  if (o.tree_spacing)
  {
    TreeSpec t;
    t.spacing = *o.tree_spacing;
    p.trees = t;
  }
  p.place_cells = !o.no_cells;
  p.cell_height = o.cell_height;
  p.cell_setback = o.setback;
  p.seed = o.seed;
  const Scene scene = generate_manhattan(p);

  namespace fs = std::filesystem;
  const fs::path target(o.output);
  const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f << dump_scene(scene);
    f.close();
    if (!f)
    {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("cannot write " + o.output);
    }
  }
  fs::rename(tmp, target);
  out << "wrote " << o.output << ": " << scene.buildings.size() << " buildings, " << scene.cells.size()
      << " cells, " << scene.vegetation.size() << " vegetation blocks\n";
  return 0;
}

struct TraceOptions
{
  std::string scene;
  std::size_t cell = 0;
  std::string rx;
  std::optional<double> freq;
  std::optional<int> max_order;
  bool no_edges = false;
  std::string config;
  std::string out_dir;
};

inline int cmd_trace(const TraceOptions& o, std::ostream& out)
{
  const std::string started = utc_now();
  const Scene scene = load_scene(o.scene);
  CampaignConfig c = o.config.empty() ? CampaignConfig{} : load_campaign_config(o.config);
  if (o.freq)
    c.trace.frequency_ghz = *o.freq;
  if (o.max_order)
    c.trace.max_reflection_order = *o.max_order;
  if (o.no_edges)
    c.trace.enable_edge_diffraction = false;
  c.validate();
  if (o.cell >= scene.cells.size())
    throw Error("cell " + std::to_string(o.cell) + " does not exist (scene has " +
                std::to_string(scene.cells.size()) + ")");
  const Vec3 rx = parse_point(o.rx, c.rx_height_m);
  if (!scene.bounds.contains(rx.xy()))
    throw Error("receiver point is outside the scene bounds");
  const Vec3 tx = scene.cells[o.cell].antenna();
  if (tx == rx)
    throw Error("receiver coincides with the cell antenna");

  const Tracer tracer(scene, c.trace);
  const auto paths = tracer.trace(tx, rx);
  using report_detail::db;
  using report_detail::fixed;
  nlohmann::ordered_json summary;
  summary["cell"] = o.cell;
  summary["rx"] = {rx.x, rx.y, rx.z};
  summary["frequency_ghz"] = c.trace.frequency_ghz;
  summary["paths"] = paths.size();
  const double rel = paths.empty() ? kNegInf : relative_power(paths, c.trace.frequency_ghz);
  summary["rel_power_db"] = db(rel);
  std::optional<BeamChoice> beam;
  if (!paths.empty())
    beam = best_beam(paths, c.tx_power_dbm(), c.pattern, c.rx_gain_dbi, c.budget.impairment_db);
  summary["best_beam_az_deg"] = beam ? nlohmann::ordered_json(beam->steer_az_deg) : nlohmann::ordered_json(nullptr);
  summary["best_beam_power_dbm"] = beam ? db(beam->power_dbm) : nlohmann::ordered_json(nullptr);

  out << "paths: " << paths.size() << "\n";
  out << "rel_power_db: " << fixed(rel, 2) << "\n";
  if (beam)
    out << "best_beam_az_deg: " << fixed(beam->steer_az_deg, 2) << "\n"
        << "best_beam_power_dbm: " << fixed(beam->power_dbm, 2) << "\n";
  else
    out << "best_beam: none\n";

  const std::string csv = paths_to_csv(paths);
  if (o.out_dir.empty())
  {
    out << csv;
    return 0;
  }
  OutputSet files;
  files.add("paths.csv", csv);
  files.add("summary.json", summary.dump(2) + "\n");
  nlohmann::ordered_json hash_input;
  hash_input["command"] = "trace";
  hash_input["scene"] = scene_to_json(scene);
  hash_input["config"] = campaign_config_to_json(c);
  hash_input["cell"] = o.cell;
  hash_input["rx"] = {rx.x, rx.y, rx.z};
  files.commit(o.out_dir, make_manifest("trace", hash_input, c.seed, started, files.names()));
  return 0;
}

inline nlohmann::ordered_json campaign_hash_input(const std::string& command, const Scene& scene,
                                                  const CampaignConfig& c)
{
  nlohmann::ordered_json h;
  h["command"] = command;
  h["scene"] = scene_to_json(scene);
  h["config"] = campaign_config_to_json(c);
  return h;
}

inline int cmd_simulate(const std::string& scene_path, const CampaignOverrides& ov, const std::string& out_dir,
                        std::size_t workers, std::ostream& out)
{
  const std::string started = utc_now();
  const Scene scene = load_scene(scene_path);
  const CampaignConfig c = ov.resolve();
  const SimulationReport r = run_campaign(scene, c, workers);

  OutputSet files;
  files.add("config.json", campaign_config_to_json(c).dump(2) + "\n");
  files.add("report.json", report_to_string(r));
  files.add("users.csv", users_to_csv(r));
  files.add("sinr_cdf.csv", cdf_to_csv(r.sinr_samples));
  files.add("interference_cdf.csv", cdf_to_csv(r.interference_samples));
  files.commit(out_dir, make_manifest("simulate", campaign_hash_input("simulate", scene, c), c.seed, started,
                                      files.names()));

  using report_detail::fixed;
  out << "users: " << r.user_samples << " over " << r.iterations.size() << " iterations\n"
      << "mean load: " << fixed(100.0 * r.mean_load, 2) << " %\n"
      << "outage: " << fixed(r.outage_pct, 2) << " %\n"
      << "mean SINR: " << fixed(r.mean_sinr_db, 2) << " dB\n"
      << "P90 interference: " << fixed(r.p90_interference_dbm, 2) << " dBm\n"
      << "wrote " << out_dir << "\n";
  return 0;
}

inline int cmd_compare(const std::string& scene_path, const std::string& scene_b_path, const CampaignOverrides& ov,
                       const PatternOptions& pa, const PatternOptions& pb, const std::string& out_dir,
                       std::size_t workers, std::ostream& out)
{
  const std::string started = utc_now();
  const Scene scene = load_scene(scene_path);
  if (!scene_b_path.empty() && dump_scene(load_scene(scene_b_path)) != dump_scene(scene))
    throw Error("mismatched scenes: " + scene_path + " and " + scene_b_path + " differ");
  const CampaignConfig c = ov.resolve();
  const AntennaPattern a = pa.pattern();
  const AntennaPattern b = pb.pattern();
  const AntennaComparison cmp = compare_antennas(scene, c, a, b, workers);

  using report_detail::db;
  using report_detail::fixed;
  using report_detail::rounded;
  nlohmann::ordered_json j;
  j["pattern_a"] = pattern_json(a);
  j["pattern_b"] = pattern_json(b);
  j["tx_power_a_dbm"] = rounded(cmp.tx_power_a_dbm, 2);
  j["tx_power_b_dbm"] = rounded(cmp.tx_power_b_dbm, 2);
  j["delta_signal_db"] = db(cmp.delta_signal_db);
  j["delta_interference_db"] = db(cmp.delta_interference_db);
  j["delta_sinr_db"] = db(cmp.delta_sinr_db);
  j["delta_outage_pct"] = rounded(cmp.delta_outage_pct, 2);
  j["a"] = report_to_json(cmp.a);
  j["b"] = report_to_json(cmp.b);

  OutputSet files;
  files.add("comparison.json", j.dump(2) + "\n");
  files.add("users_a.csv", users_to_csv(cmp.a));
  files.add("users_b.csv", users_to_csv(cmp.b));
  auto hash_input = campaign_hash_input("compare", scene, c);
  hash_input["pattern_a"] = pattern_json(a);
  hash_input["pattern_b"] = pattern_json(b);
  auto manifest = make_manifest("compare", hash_input, c.seed, started, files.names());
  manifest["tx_power_dbm"] = {{"a", rounded(cmp.tx_power_a_dbm, 2)}, {"b", rounded(cmp.tx_power_b_dbm, 2)}};
  files.commit(out_dir, manifest);

  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-20s %10s %10s %10s\n", "metric", "A", "B", "B-A");
  out << buf;
  auto row = [&](const char* name, double va, double vb) {
    std::snprintf(buf, sizeof(buf), "%-20s %10s %10s %10s\n", name, fixed(va, 2).c_str(), fixed(vb, 2).c_str(),
                  fixed(vb - va, 2).c_str());
    out << buf;
  };
  row("tx_power_dbm", cmp.tx_power_a_dbm, cmp.tx_power_b_dbm);
  row("mean_signal_dbm", cmp.a.mean_signal_dbm, cmp.b.mean_signal_dbm);
  row("mean_interf_dbm", cmp.a.mean_interference_dbm, cmp.b.mean_interference_dbm);
  row("mean_sinr_db", cmp.a.mean_sinr_db, cmp.b.mean_sinr_db);
  row("outage_pct", cmp.a.outage_pct, cmp.b.outage_pct);
  return 0;
}

struct ObstructOptions
{
  std::string scene;
  std::string box;
  double length = 12.0;
  double width = 2.5;
  double height = 3.0;
  double azimuth = 0.0;
  std::string street = "0:0";
  double corridor = 15.0;
  std::string out_dir;
};

inline int cmd_obstruct(const ObstructOptions& o, const CampaignOverrides& ov, std::size_t workers,
                        std::ostream& out)
{
  const std::string started = utc_now();
  const Scene scene = load_scene(o.scene);
  const CampaignConfig c = ov.resolve();
  static const std::regex kStreet(R"((\d+):(\d+))");
  std::smatch m;
  if (!std::regex_match(o.street, m, kStreet))
    throw Error("--street must look like BREAKLINE:SEGMENT, e.g. 0:0");
  const StreetSelector street{std::stoul(m[1]), std::stoul(m[2])};
  ObstructionBox box;
  const Vec3 centre = parse_point(o.box, 0.0);
  box.center = centre.xy();
  box.length = o.length;
  box.width = o.width;
  box.height = o.height;
  box.azimuth_deg = o.azimuth;
  const ObstructionReport r = obstruction_study(scene, box, street, c, workers, o.corridor);

  nlohmann::ordered_json j = obstruction_to_json(r);
  j["box"] = {{"center", {box.center.x, box.center.y}},
              {"length", box.length},
              {"width", box.width},
              {"height", box.height},
              {"azimuth_deg", box.azimuth_deg}};
  OutputSet files;
  files.add("obstruction.json", j.dump(2) + "\n");
  files.add("users.csv", obstruction_users_csv(r));
  auto hash_input = campaign_hash_input("obstruct", scene, c);
  hash_input["box"] = j["box"];
  hash_input["street"] = o.street;
  hash_input["corridor_m"] = o.corridor;
  files.commit(o.out_dir, make_manifest("obstruct", hash_input, c.seed, started, files.names()));

  using report_detail::fixed;
  out << "cells: " << r.cell_a << ", " << r.cell_b << "\n"
      << "outage: " << fixed(r.baseline_outage_pct, 2) << " % -> " << fixed(r.obstructed_outage_pct, 2)
      << " % (delta " << fixed(r.outage_delta_pct, 2) << ")\n"
      << "cell-edge SINR: " << fixed(r.baseline_edge_sinr_db, 2) << " dB -> "
      << fixed(r.obstructed_edge_sinr_db, 2) << " dB (degradation " << fixed(r.edge_sinr_degradation_db, 2)
      << " dB)\n";
  return 0;
}

// ---------------------------------------------------------------------------

/// Parses argv and runs the selected command.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
  CLI::App app{"mmcell: site-specific mmWave small-cell simulator"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  std::size_t workers = default_workers();
  std::function<int()> action;

  auto* scene_cmd = app.add_subcommand("scene", "Scene tooling");
  scene_cmd->require_subcommand(1);
  std::string validate_path;
  auto* validate_cmd = scene_cmd->add_subcommand("validate", "Check cell line-of-sight topology");
  validate_cmd->add_option("scene", validate_path, "Scene JSON")->required();
  validate_cmd->callback([&] { action = [&] { return cmd_scene_validate(validate_path, out); }; });

  GenerateOptions gen;
  auto* gen_cmd = scene_cmd->add_subcommand("generate", "Write a synthetic Manhattan scene");
  gen_cmd->add_option("--blocks", gen.blocks, "Blocks as NxM")->capture_default_str();
  gen_cmd->add_option("--street", gen.street, "Street width (m)")->capture_default_str();
  gen_cmd->add_option("--height", gen.height, "Building height (m)")->capture_default_str();
  gen_cmd->add_option("--block-size", gen.block_size, "Block side (m)")->capture_default_str();
  gen_cmd->add_option("--height-jitter", gen.jitter, "Relative height jitter in [0, 1)")->capture_default_str();
  gen_cmd->add_option("--trees", gen.tree_spacing, "Plant street trees at this spacing (m)");
  gen_cmd->add_flag("--no-cells", gen.no_cells, "Do not place intersection cells");
  gen_cmd->add_option("--cell-height", gen.cell_height, "Cell antenna height (m)")->capture_default_str();
  gen_cmd->add_option("--cell-setback", gen.setback, "Cell setback from facades (m)")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Seed for jitter")->capture_default_str();
  gen_cmd->add_option("-o,--output", gen.output, "Output scene JSON")->required();
  gen_cmd->callback([&] { action = [&] { return cmd_scene_generate(gen, out); }; });

  TraceOptions tr;
  auto* trace_cmd = app.add_subcommand("trace", "Trace one cell-to-point link");
  trace_cmd->add_option("scene", tr.scene, "Scene JSON")->required();
  trace_cmd->add_option("--cell", tr.cell, "Transmitting cell id")->required();
  trace_cmd->add_option("--rx", tr.rx, "Receiver x,y[,z] (z defaults to the config rx height)")->required();
  trace_cmd->add_option("--freq", tr.freq, "Frequency (GHz)");
  trace_cmd->add_option("--max-order", tr.max_order, "Maximum reflection order (0-2)");
  trace_cmd->add_flag("--no-edges", tr.no_edges, "Disable vertical-edge diffraction");
  trace_cmd->add_option("--config", tr.config, "Campaign config JSON for budget and antenna");
  trace_cmd->add_option("--out", tr.out_dir, "Output directory (paths.csv, summary.json, manifest.json)");
  trace_cmd->callback([&] { action = [&] { return cmd_trace(tr, out); }; });

  std::string sim_scene;
  std::string sim_out;
  CampaignOverrides sim_ov;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a Monte-Carlo campaign");
  sim_cmd->add_option("scene", sim_scene, "Scene JSON")->required();
  sim_ov.attach(sim_cmd);
  sim_cmd->add_option("--out", sim_out, "Output directory")->required();
  sim_cmd->add_option("--workers", workers, std::string("Worker threads (default: $") + kWorkersEnv +
                                                " or hardware concurrency)");
  sim_cmd->callback([&] { action = [&] { return cmd_simulate(sim_scene, sim_ov, sim_out, workers, out); }; });

  std::string cmp_scene;
  std::string cmp_scene_b;
  std::string cmp_out;
  CampaignOverrides cmp_ov;
  PatternOptions pa;
  PatternOptions pb;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare two cell antennas at constant EIRP");
  cmp_cmd->add_option("scene", cmp_scene, "Scene JSON")->required();
  cmp_cmd->add_option("--scene-b", cmp_scene_b, "Second scene; must match the first");
  cmp_ov.attach(cmp_cmd);
  pa.attach(cmp_cmd, "a", wide_beam_pattern());
  pb.attach(cmp_cmd, "b", narrow_beam_pattern());
  cmp_cmd->add_option("--out", cmp_out, "Output directory")->required();
  cmp_cmd->add_option("--workers", workers, "Worker threads");
  cmp_cmd->callback(
      [&] { action = [&] { return cmd_compare(cmp_scene, cmp_scene_b, cmp_ov, pa, pb, cmp_out, workers, out); }; });

  ObstructOptions ob;
  CampaignOverrides ob_ov;
  auto* ob_cmd = app.add_subcommand("obstruct", "In-street obstruction study");
  ob_cmd->add_option("scene", ob.scene, "Scene JSON")->required();
  ob_cmd->add_option("--box", ob.box, "Box centre x,y")->required();
  ob_cmd->add_option("--box-length", ob.length, "Box length (m)")->capture_default_str();
  ob_cmd->add_option("--box-width", ob.width, "Box width (m)")->capture_default_str();
  ob_cmd->add_option("--box-height", ob.height, "Box height (m)")->capture_default_str();
  ob_cmd->add_option("--box-azimuth", ob.azimuth, "Box azimuth (deg)")->capture_default_str();
  ob_cmd->add_option("--street", ob.street, "Breakline segment as BREAKLINE:SEGMENT")->capture_default_str();
  ob_cmd->add_option("--corridor", ob.corridor, "Max cell distance from the street (m)")->capture_default_str();
  ob_ov.attach(ob_cmd);
  ob_cmd->add_option("--out", ob.out_dir, "Output directory")->required();
  ob_cmd->add_option("--workers", workers, "Worker threads");
  ob_cmd->callback([&] { action = [&] { return cmd_obstruct(ob, ob_ov, workers, out); }; });

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    if (e.get_exit_code() == 0)
    {
      app.exit(e, out, err);
      return 0;
    }
    err << "error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return 1;
  }

  try
  {
    if (workers == 0)
      throw Error("--workers must be >= 1");
    return action ? action() : 1;
  }
  catch (const ValidationError& e)
  {
    err << "error: invalid input\n";
    for (const auto& issue : e.issues())
      err << "  " << issue << "\n";
    return 1;
  }
  catch (const std::exception& e)
  {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

} // namespace mmcell::cli
