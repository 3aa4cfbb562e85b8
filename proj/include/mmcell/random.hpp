#pragma once

#include <cstdint>
#include <random>

namespace mmcell {

// std::mt19937_64 output is fixed by the standard; the distribution below is
// spelled out so drops are identical across standard libraries.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng)
{
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

} // namespace mmcell
