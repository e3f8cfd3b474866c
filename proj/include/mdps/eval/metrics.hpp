#pragma once

#include <array>
#include <cmath>
#include <limits>

#include "mdps/core/stats.hpp"
#include "mdps/core/volume.hpp"
#include "mdps/motion/state.hpp"

// Quantitative evaluation: PSNR and SSIM on magnitude volumes, motion RMSE
// on gauge-fixed trajectories.
//
// Unless given explicitly, data_range defaults to the 99.9th percentile of
// the reference magnitude (the evaluation normalization convention used
// throughout this project).

namespace mdps {

inline RealVolume magnitude(const ComplexVolume& v) {
  RealVolume out(v.shape, v.spacing);
  for (std::size_t i = 0; i < v.data.size(); ++i)
    out.data[i] = std::abs(v.data[i]);
  return out;
}

inline double default_data_range(const RealVolume& ref) {
  return percentile(ref, 99.9);
}

// 10 log10(range^2 / MSE); identical volumes yield +infinity.
inline double psnr(const RealVolume& ref, const RealVolume& test,
                   double data_range = 0.0) {
  detail::require(ref.shape == test.shape, "psnr: shape mismatch");
  const double range = data_range > 0.0 ? data_range : default_data_range(ref);
  detail::require(range > 0.0, "psnr: data range must be positive");
  double mse = 0.0;
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    const double d = ref.data[i] - test.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(ref.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(range * range / mse);
}

inline double psnr(const ComplexVolume& ref, const ComplexVolume& test,
                   double data_range = 0.0) {
  return psnr(magnitude(ref), magnitude(test), data_range);
}

// Mean local SSIM over all fully interior 7^3 windows, uniform weights,
// sample (N-1) second moments, C1 = (0.01 range)^2, C2 = (0.03 range)^2.
// Window sums come from 3-D summed-area tables, so the cost is independent
// of the window size.
inline double ssim3d(const RealVolume& ref, const RealVolume& test,
                     double data_range = 0.0, int window = 7) {
  detail::require(ref.shape == test.shape, "ssim3d: shape mismatch");
  detail::require(window >= 2 && window % 2 == 1,
                  "ssim3d: window must be odd and >= 3");
  const Shape3 s = ref.shape;
  detail::require(s.nz >= window && s.ny >= window && s.nx >= window,
                  "ssim3d: window larger than the volume");
  const double range = data_range > 0.0 ? data_range : default_data_range(ref);
  detail::require(range > 0.0, "ssim3d: data range must be positive");
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);

  // Summed-area tables with one layer of zero padding at the low end.
  const Shape3 ps{s.nz + 1, s.ny + 1, s.nx + 1};
  const auto table = [&](auto&& value) {
    RealVolume p(ps);
    for (std::int64_t z = 1; z <= s.nz; ++z)
      for (std::int64_t y = 1; y <= s.ny; ++y)
        for (std::int64_t x = 1; x <= s.nx; ++x)
          p.at(z, y, x) = value(z - 1, y - 1, x - 1) + p.at(z - 1, y, x) +
                          p.at(z, y - 1, x) + p.at(z, y, x - 1) -
                          p.at(z - 1, y - 1, x) - p.at(z - 1, y, x - 1) -
                          p.at(z, y - 1, x - 1) + p.at(z - 1, y - 1, x - 1);
    return p;
  };
  const RealVolume pa =
      table([&](std::int64_t z, std::int64_t y, std::int64_t x) {
        return ref.at(z, y, x);
      });
  const RealVolume pb =
      table([&](std::int64_t z, std::int64_t y, std::int64_t x) {
        return test.at(z, y, x);
      });
  const RealVolume paa =
      table([&](std::int64_t z, std::int64_t y, std::int64_t x) {
        return ref.at(z, y, x) * ref.at(z, y, x);
      });
  const RealVolume pbb =
      table([&](std::int64_t z, std::int64_t y, std::int64_t x) {
        return test.at(z, y, x) * test.at(z, y, x);
      });
  const RealVolume pab =
      table([&](std::int64_t z, std::int64_t y, std::int64_t x) {
        return ref.at(z, y, x) * test.at(z, y, x);
      });

  const auto window_sum = [&](const RealVolume& p, std::int64_t z,
                              std::int64_t y, std::int64_t x) {
    const std::int64_t z1 = z + window, y1 = y + window, x1 = x + window;
    return p.at(z1, y1, x1) - p.at(z, y1, x1) - p.at(z1, y, x1) -
           p.at(z1, y1, x) + p.at(z, y, x1) + p.at(z, y1, x) +
           p.at(z1, y, x) - p.at(z, y, x);
  };

  const double n = static_cast<double>(window) * window * window;
  double acc = 0.0;
  std::int64_t count = 0;
  for (std::int64_t z = 0; z + window <= s.nz; ++z)
    for (std::int64_t y = 0; y + window <= s.ny; ++y)
      for (std::int64_t x = 0; x + window <= s.nx; ++x) {
        const double sa = window_sum(pa, z, y, x);
        const double sb = window_sum(pb, z, y, x);
        const double saa = window_sum(paa, z, y, x);
        const double sbb = window_sum(pbb, z, y, x);
        const double sab = window_sum(pab, z, y, x);
        const double mu_a = sa / n;
        const double mu_b = sb / n;
        const double var_a = (saa - sa * mu_a) / (n - 1.0);
        const double var_b = (sbb - sb * mu_b) / (n - 1.0);
        const double cov = (sab - sa * mu_b) / (n - 1.0);
        const double val =
            ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
            ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        acc += val;
        ++count;
      }
  return acc / static_cast<double>(count);
}

inline double ssim3d(const ComplexVolume& ref, const ComplexVolume& test,
                     double data_range = 0.0, int window = 7) {
  return ssim3d(magnitude(ref), magnitude(test), data_range, window);
}

// Per-component RMSE between trajectories after removing the global rigid
// reference ambiguity: both trajectories are expressed relative to their own
// first state before comparison. Components keep the canonical order, three
// translations (mm) then three rotations (degrees).
inline std::array<double, 6> motion_rmse(const MotionTrajectory& est,
                                         const MotionTrajectory& truth) {
  detail::require(est.size() == truth.size() && !est.empty(),
                  "motion_rmse: trajectory length mismatch");
  std::array<double, 6> acc{};
  for (std::size_t t = 0; t < est.size(); ++t)
    for (int p = 0; p < 6; ++p) {
      const double e = (est[t][p] - est[0][p]) - (truth[t][p] - truth[0][p]);
      acc[static_cast<std::size_t>(p)] += e * e;
    }
  for (double& a : acc)
    a = std::sqrt(a / static_cast<double>(est.size()));
  return acc;
}

struct MetricsReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::array<double, 6> motion_rmse{};
  double runtime_s = 0.0;
};

}  // namespace mdps
