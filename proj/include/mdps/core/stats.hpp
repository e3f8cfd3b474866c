#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mdps/core/volume.hpp"

namespace mdps {

// Root-sum-of-squares channel combination: out = sqrt(sum_j |v_j|^2),
// computed voxel-wise. Output is real, non-negative, on the shared grid.
inline RealVolume rss_combine(const std::vector<ComplexVolume>& vols) {
  detail::require(!vols.empty(), "rss_combine: need at least one volume");
  for (const auto& v : vols)
    detail::require(v.shape == vols[0].shape,
                    "rss_combine: volumes must share one shape");
  RealVolume out(vols[0].shape, vols[0].spacing);
  for (std::int64_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (const auto& v : vols) acc += std::norm(v[i]);
    out[i] = std::sqrt(acc);
  }
  return out;
}

inline RealVolume rss_combine(const CoilSet& coils) {
  return rss_combine(coils.maps);
}

// q-th percentile (q in [0, 100]) with linear interpolation between order
// statistics: rank r = q/100 * (n-1), result = lerp(sorted[floor(r)],
// sorted[ceil(r)]). Matches the numpy default definition.
inline double percentile(std::vector<double> values, double q) {
  detail::require(!values.empty(), "percentile: empty input");
  detail::require(q >= 0.0 && q <= 100.0, "percentile: q outside [0, 100]");
  std::sort(values.begin(), values.end());
  const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

inline double percentile(const RealVolume& v, double q) {
  return percentile(v.data, q);
}

}  // namespace mdps
