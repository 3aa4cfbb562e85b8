#pragma once

#include "mmcell/error.hpp"
#include "mmcell/scene.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>

namespace mmcell {

namespace json_detail {

using nlohmann::json;

/// Rejects keys outside `allowed`, reporting the JSON path of the object.
inline void reject_unknown_keys(const json& obj, const std::string& where,
                                std::initializer_list<const char*> allowed)
{
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items())
  {
    if (!ok.count(item.key()))
      throw Error(where + ": unknown key \"" + item.key() + "\"");
  }
}

inline const json& require(const json& obj, const char* key, const std::string& where)
{
  if (!obj.is_object())
    throw Error(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw Error(where + ": missing key \"" + key + "\"");
  return *it;
}

inline double number(const json& v, const std::string& where)
{
  if (!v.is_number())
    throw Error(where + ": expected a number");
  return v.get<double>();
}

inline Vec2 point(const json& v, const std::string& where)
{
  if (!v.is_array() || v.size() != 2)
    throw Error(where + ": expected [x, y]");
  return {number(v[0], where + "[0]"), number(v[1], where + "[1]")};
}

inline std::vector<Vec2> points(const json& v, const std::string& where)
{
  if (!v.is_array())
    throw Error(where + ": expected a list of [x, y]");
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(point(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline const json& array_field(const json& doc, const char* key)
{
  static const json empty = json::array();
  auto it = doc.find(key);
  if (it == doc.end())
    return empty;
  if (!it->is_array())
    throw Error(std::string(key) + ": expected a list");
  return *it;
}

inline json to_json(Vec2 p) { return json::array({p.x, p.y}); }

inline json to_json(const std::vector<Vec2>& pts)
{
  json out = json::array();
  for (Vec2 p : pts)
    out.push_back(to_json(p));
  return out;
}

/// Frequency keys are written in shortest round-trip form ("2.4", "60").
inline std::string frequency_key(double f)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.15g", f);
  return buf;
}

} // namespace json_detail

/// Parses and validates a scene document. Syntax and schema errors carry the
/// JSON path of the offending field; invariant violations list every entity.
inline Scene parse_scene(const std::string& text)
{
  using namespace json_detail;
  json doc;
  try
  {
    doc = json::parse(text);
  }
  catch (const json::parse_error& e)
  {
    throw Error(std::string("scene: parse error: ") + e.what());
  }
  if (!doc.is_object())
    throw Error("scene: top level must be an object");
  reject_unknown_keys(doc, "scene", {"bounds", "buildings", "vegetation", "boxes", "breaklines", "cells"});

  Scene scene;
  const auto& buildings = array_field(doc, "buildings");
  for (std::size_t i = 0; i < buildings.size(); ++i)
  {
    const auto where = "buildings[" + std::to_string(i) + "]";
    const auto& b = buildings[i];
    reject_unknown_keys(b, where, {"polygon", "height"});
    scene.buildings.push_back({points(require(b, "polygon", where), where + ".polygon"),
                               number(require(b, "height", where), where + ".height")});
  }

  const auto& vegetation = array_field(doc, "vegetation");
  for (std::size_t i = 0; i < vegetation.size(); ++i)
  {
    const auto where = "vegetation[" + std::to_string(i) + "]";
    const auto& v = vegetation[i];
    reject_unknown_keys(v, where, {"polygon", "height", "class", "attenuation"});
    VegBlock block;
    block.footprint = points(require(v, "polygon", where), where + ".polygon");
    block.height = number(require(v, "height", where), where + ".height");
    if (auto it = v.find("class"); it != v.end())
    {
      const auto kind = it->is_string() ? veg_class_from_string(it->get<std::string>()) : std::nullopt;
      if (!kind)
        throw Error(where + ".class: expected one of woods, tree, hedge");
      block.kind = *kind;
    }
    if (auto it = v.find("attenuation"); it != v.end())
    {
      if (!it->is_object())
        throw Error(where + ".attenuation: expected an object of frequency -> dB/m");
      block.attenuation.clear();
      for (const auto& item : it->items())
      {
        double f = 0.0;
        try
        {
          std::size_t used = 0;
          f = std::stod(item.key(), &used);
          if (used != item.key().size())
            throw std::invalid_argument(item.key());
        }
        catch (const std::exception&)
        {
          throw Error(where + ".attenuation: key \"" + item.key() + "\" is not a frequency in GHz");
        }
        block.attenuation[f] = number(item.value(), where + ".attenuation." + item.key());
      }
      block.attenuation.try_emplace(60.0, kDefaultFoliageAttenuation60GHz);
    }
    scene.vegetation.push_back(std::move(block));
  }

  const auto& boxes = array_field(doc, "boxes");
  for (std::size_t i = 0; i < boxes.size(); ++i)
  {
    const auto where = "boxes[" + std::to_string(i) + "]";
    const auto& b = boxes[i];
    reject_unknown_keys(b, where, {"center", "length", "width", "height", "azimuth_deg"});
    ObstructionBox box;
    box.center = point(require(b, "center", where), where + ".center");
    if (b.contains("length"))
      box.length = number(b["length"], where + ".length");
    if (b.contains("width"))
      box.width = number(b["width"], where + ".width");
    if (b.contains("height"))
      box.height = number(b["height"], where + ".height");
    if (b.contains("azimuth_deg"))
      box.azimuth_deg = number(b["azimuth_deg"], where + ".azimuth_deg");
    scene.boxes.push_back(box);
  }

  const auto& breaklines = array_field(doc, "breaklines");
  for (std::size_t i = 0; i < breaklines.size(); ++i)
    scene.breaklines.push_back(points(breaklines[i], "breaklines[" + std::to_string(i) + "]"));

  const auto& cells = array_field(doc, "cells");
  for (std::size_t i = 0; i < cells.size(); ++i)
  {
    const auto where = "cells[" + std::to_string(i) + "]";
    const auto& c = cells[i];
    reject_unknown_keys(c, where, {"position", "height", "pattern", "tx_power_dbm"});
    CellSite cell;
    cell.position = point(require(c, "position", where), where + ".position");
    if (c.contains("height"))
      cell.height = number(c["height"], where + ".height");
    if (c.contains("pattern"))
    {
      if (!c["pattern"].is_string())
        throw Error(where + ".pattern: expected a string");
      cell.pattern = c["pattern"].get<std::string>();
    }
    if (c.contains("tx_power_dbm"))
      cell.tx_power_dbm = number(c["tx_power_dbm"], where + ".tx_power_dbm");
    scene.cells.push_back(cell);
  }

  if (auto it = doc.find("bounds"); it != doc.end())
  {
    if (!it->is_array() || it->size() != 4)
      throw Error("bounds: expected [xmin, ymin, xmax, ymax]");
    scene.bounds = {number((*it)[0], "bounds[0]"), number((*it)[1], "bounds[1]"), number((*it)[2], "bounds[2]"),
                    number((*it)[3], "bounds[3]")};
  }
  else
  {
    // Bounds default to the bounding rectangle of all geometry.
    std::vector<Vec2> all;
    for (const auto& b : scene.buildings)
      all.insert(all.end(), b.footprint.begin(), b.footprint.end());
    for (const auto& v : scene.vegetation)
      all.insert(all.end(), v.footprint.begin(), v.footprint.end());
    for (const auto& b : scene.boxes)
    {
      const auto fp = b.footprint();
      all.insert(all.end(), fp.begin(), fp.end());
    }
    for (const auto& l : scene.breaklines)
      all.insert(all.end(), l.begin(), l.end());
    for (const auto& c : scene.cells)
      all.push_back(c.position);
    if (all.empty())
      throw Error("bounds: missing and the scene has no geometry to derive them from");
    const Box2 box = bounding_box(all);
    scene.bounds = {box.xmin, box.ymin, box.xmax, box.ymax};
  }

  validate_scene(scene);
  for (auto& b : scene.buildings)
    b.footprint = make_ccw(std::move(b.footprint));
  for (auto& v : scene.vegetation)
    v.footprint = make_ccw(std::move(v.footprint));
  return scene;
}

inline Scene load_scene(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open scene file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try
  {
    return parse_scene(ss.str());
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

inline nlohmann::json scene_to_json(const Scene& scene)
{
  using namespace json_detail;
  json doc;
  doc["bounds"] = json::array({scene.bounds.xmin, scene.bounds.ymin, scene.bounds.xmax, scene.bounds.ymax});
  doc["buildings"] = json::array();
  for (const auto& b : scene.buildings)
    doc["buildings"].push_back({{"polygon", to_json(b.footprint)}, {"height", b.height}});
  doc["vegetation"] = json::array();
  for (const auto& v : scene.vegetation)
  {
    json att = json::object();
    for (const auto& [f, a] : v.attenuation)
      att[frequency_key(f)] = a;
    doc["vegetation"].push_back(
        {{"polygon", to_json(v.footprint)}, {"height", v.height}, {"class", to_string(v.kind)}, {"attenuation", att}});
  }
  if (!scene.boxes.empty())
  {
    doc["boxes"] = json::array();
    for (const auto& b : scene.boxes)
      doc["boxes"].push_back({{"center", to_json(b.center)},
                              {"length", b.length},
                              {"width", b.width},
                              {"height", b.height},
                              {"azimuth_deg", b.azimuth_deg}});
  }
  doc["breaklines"] = json::array();
  for (const auto& l : scene.breaklines)
    doc["breaklines"].push_back(to_json(l));
  doc["cells"] = json::array();
  for (const auto& c : scene.cells)
    doc["cells"].push_back({{"position", to_json(c.position)},
                            {"height", c.height},
                            {"pattern", c.pattern},
                            {"tx_power_dbm", c.tx_power_dbm}});
  return doc;
}

inline std::string dump_scene(const Scene& scene) { return scene_to_json(scene).dump(2) + "\n"; }

} // namespace mmcell
