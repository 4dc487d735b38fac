#pragma once

#include <cmath>

#include "metastab/map_model.hpp"
#include "metastab/rng.hpp"

namespace metastab::detail {

// Symmetric sub-ulp perturbation, reflected at 0 and 1 so that the fixed
// endpoints cannot trap the orbit.
inline double dither_point(double x, RandomStream& rng) {
  constexpr double kScale = 0x1p-84; // 2^-32 · 2^-52
  x += (static_cast<double>(rng.next_u32()) - 2147483648.0) * kScale;
  if (x < 0.0) x = -x;
  if (x > 1.0) x = 2.0 - x;
  return x;
}

inline double advance(const BranchTable& table, double x, RandomStream* dither) {
  if (dither) x = dither_point(x, *dither);
  return table(x, Side::right);
}

// Stream indices for the dither draws of different experiment kinds, kept
// apart so that no two orbits share a stream.
inline constexpr std::uint64_t kDitherBatch = 0;
inline constexpr std::uint64_t kDitherGreenKubo = std::uint64_t{1} << 40;
inline constexpr std::uint64_t kDitherPilot = std::uint64_t{2} << 40;
inline constexpr std::uint64_t kDitherHistogram = std::uint64_t{3} << 40;

} // namespace metastab::detail
