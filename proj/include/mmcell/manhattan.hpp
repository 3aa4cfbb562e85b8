#pragma once

#include "mmcell/error.hpp"
#include "mmcell/random.hpp"
#include "mmcell/scene.hpp"

#include <cmath>
#include <cstdint>
#include <optional>

namespace mmcell {

struct TreeSpec
{
  double spacing = 10.0;
  double canopy_radius = 2.0;
  double height = 8.0;
};

/// Synthetic grid city: blocks_x x blocks_y buildings separated and
/// surrounded by streets. Breaklines follow every street centerline.
struct ManhattanParams
{
  int blocks_x = 3;
  int blocks_y = 3;
  double street_width = 20.0;
  double building_height = 15.0;
  double block_size = 80.0;
  /// Building heights are drawn in building_height * (1 +/- height_jitter).
  double height_jitter = 0.0;
  std::optional<TreeSpec> trees;
  /// One lamppost cell per street intersection, set back from both facades.
  bool place_cells = true;
  double cell_height = 7.0;
  double cell_setback = 1.0;
  std::uint64_t seed = 1;
};

inline Scene generate_manhattan(const ManhattanParams& p)
{
  if (p.blocks_x <= 0 || p.blocks_y <= 0)
    throw Error("generate_manhattan: block counts must be > 0");
  if (!(p.street_width > 0.0) || !(p.building_height > 0.0) || !(p.block_size > 0.0))
    throw Error("generate_manhattan: street width, building height and block size must be > 0");
  if (p.height_jitter < 0.0 || p.height_jitter >= 1.0)
    throw Error("generate_manhattan: height jitter must be in [0, 1)");
  if (p.trees)
  {
    const auto& t = *p.trees;
    if (!(t.spacing > 0.0) || !(t.canopy_radius > 0.0) || !(t.height > 0.0))
      throw Error("generate_manhattan: tree spacing, canopy radius and height must be > 0");
    if (2.0 * t.canopy_radius + 0.5 > p.street_width / 2.0)
      throw Error("generate_manhattan: tree canopy does not fit in the street half-width");
  }
  if (p.place_cells && (!(p.cell_height > 0.0) || p.cell_setback < 0.0 || p.cell_setback >= p.street_width / 2.0))
    throw Error("generate_manhattan: cell height must be > 0 and setback within the street half-width");

  const double w = p.street_width;
  const double b = p.block_size;
  const double pitch = b + w;
  const double width = p.blocks_x * b + (p.blocks_x + 1) * w;
  const double depth = p.blocks_y * b + (p.blocks_y + 1) * w;

  Scene scene;
  scene.bounds = {0.0, 0.0, width, depth};
  Rng rng(p.seed);

  for (int j = 0; j < p.blocks_y; ++j)
  {
    for (int i = 0; i < p.blocks_x; ++i)
    {
      const double x0 = w + i * pitch;
      const double y0 = w + j * pitch;
      const double jitter = p.height_jitter > 0.0 ? p.height_jitter * (2.0 * uniform01(rng) - 1.0) : 0.0;
      scene.buildings.push_back(
          {{{x0, y0}, {x0 + b, y0}, {x0 + b, y0 + b}, {x0, y0 + b}}, p.building_height * (1.0 + jitter)});
    }
  }

  for (int k = 0; k <= p.blocks_y; ++k)
  {
    const double y = w / 2.0 + k * pitch;
    scene.breaklines.push_back({{w / 2.0, y}, {width - w / 2.0, y}});
  }
  for (int k = 0; k <= p.blocks_x; ++k)
  {
    const double x = w / 2.0 + k * pitch;
    scene.breaklines.push_back({{x, w / 2.0}, {x, depth - w / 2.0}});
  }

  if (p.trees)
  {
    const auto& t = *p.trees;
    const double r = t.canopy_radius;
    const double offset = r + 0.5;
    auto add_tree = [&](Vec2 c) {
      VegBlock v;
      v.kind = VegClass::tree;
      v.height = t.height;
      v.footprint = {{c.x - r, c.y - r}, {c.x + r, c.y - r}, {c.x + r, c.y + r}, {c.x - r, c.y + r}};
      scene.vegetation.push_back(std::move(v));
    };
    const int n = static_cast<int>(std::floor(b / t.spacing + 1e-9));
    const double start = (b - n * t.spacing) / 2.0;
    for (const auto& bld : scene.buildings)
    {
      const Vec2 lo = bld.footprint[0];
      for (int k = 0; k < n; ++k)
      {
        const double along = start + (k + 0.5) * t.spacing;
        add_tree({lo.x + along, lo.y - offset});
        add_tree({lo.x + b + offset, lo.y + along});
        add_tree({lo.x + b - along, lo.y + b + offset});
        add_tree({lo.x - offset, lo.y + b - along});
      }
    }
  }

  if (p.place_cells)
  {
    const double d = w / 2.0 - p.cell_setback;
    for (int l = 0; l <= p.blocks_y; ++l)
    {
      for (int k = 0; k <= p.blocks_x; ++k)
      {
        CellSite c;
        c.position = {w / 2.0 + k * pitch + d, w / 2.0 + l * pitch + d};
        c.height = p.cell_height;
        scene.cells.push_back(c);
      }
    }
  }

  validate_scene(scene);
  return scene;
}

} // namespace mmcell
