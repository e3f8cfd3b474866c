#pragma once

#include <utility>
#include <vector>

#include "mdps/acquisition/forward.hpp"
#include "mdps/core/stats.hpp"

// Intensity normalization of a measurement set.
//
// The reference image is the zero-filled adjoint: every state's samples are
// scattered onto one common grid (groups are disjoint, so this is a plain
// union), inverse-transformed per coil, and combined by root-sum-of-squares.
// The normalization scale is the 99th percentile of that RSS magnitude; the
// data fidelity weight sigma = 1 is calibrated for measurements divided by
// this scale.

namespace mdps {

// Coil-wise inverse DFT of the zero-filled measurements (all states merged).
inline CoilSet zero_filled_coil_images(const KSpaceSet& z,
                                       const SamplingPlan& plan,
                                       const Spacing3& spacing = {}) {
  detail::require(z.num_times() == plan.num_states(),
                  "zero_filled_coil_images: states != plan states");
  detail::require(z.num_coils > 0, "zero_filled_coil_images: no coils");
  std::vector<ComplexVolume> grids(
      static_cast<std::size_t>(z.num_coils),
      ComplexVolume(plan.grid_shape, spacing));
  for (int t = 0; t < z.num_times(); ++t) {
    const auto idx = plan.state_grid_indices(t);
    for (int j = 0; j < z.num_coils; ++j) {
      const cd* block = z.coil_block(t, j);
      auto& g = grids[static_cast<std::size_t>(j)];
      for (std::size_t k = 0; k < idx.size(); ++k) g[idx[k]] = block[k];
    }
  }
  std::vector<ComplexVolume> imgs(grids.size());
  parallel_for(z.num_coils, [&](std::int64_t j) {
    imgs[static_cast<std::size_t>(j)] =
        ifft3(grids[static_cast<std::size_t>(j)]);
  });
  return CoilSet(std::move(imgs));
}

inline RealVolume zero_filled_rss(const KSpaceSet& z, const SamplingPlan& plan,
                                  const Spacing3& spacing = {}) {
  return rss_combine(zero_filled_coil_images(z, plan, spacing));
}

// Divides every sample by the 99th-percentile RSS magnitude of the
// zero-filled reconstruction and returns (normalized set, scale). The scale
// is recorded in the set's norm_scale (composed with any prior scale).
// Scale-equivariant: normalize(a * z) == normalize(z) for a > 0.
inline std::pair<KSpaceSet, double> percentile_normalize(
    const KSpaceSet& z, const SamplingPlan& plan, double q = 99.0) {
  const RealVolume rss = zero_filled_rss(z, plan);
  const double scale = percentile(rss, q);
  detail::require(scale > 0.0,
                  "percentile_normalize: degenerate (all-zero) measurements");
  KSpaceSet out = z;
  const double inv = 1.0 / scale;
  for (auto& block : out.data)
    for (cd& s : block) s *= inv;
  out.noise_sigma = z.noise_sigma * inv;
  out.norm_scale = z.norm_scale * scale;
  return {std::move(out), scale};
}

}  // namespace mdps
