#pragma once

#include <cmath>

#include "mdps/core/types.hpp"

// Iteration schedules for the reverse-diffusion solver.
//
// Iterations are indexed i = N-1 (start, highest noise) down to 0 (end).
// The endpoints are returned exactly (no floating-point round trip through
// pow), so sigma(N-1) == sigma_max and sigma(0) == sigma_min bit for bit;
// i == N is accepted and also maps to sigma_max (the initialization level).

namespace mdps {

struct NoiseScheduleConfig {
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double rho = 7.0;
};

// Power-interpolated noise level
//   sigma(i) = (sigma_max^(1/rho)
//              + (N-1-i)/(N-1) * (sigma_min^(1/rho) - sigma_max^(1/rho)))^rho.
inline double karras_sigma(int i, int num_steps,
                           const NoiseScheduleConfig& cfg = {}) {
  detail::require(num_steps >= 2, "karras_sigma: need at least 2 steps");
  detail::require(i >= 0 && i <= num_steps, "karras_sigma: index out of range");
  detail::require(cfg.sigma_min > 0 && cfg.sigma_max > cfg.sigma_min &&
                      cfg.rho > 0,
                  "karras_sigma: invalid schedule parameters");
  if (i >= num_steps - 1) return cfg.sigma_max;
  if (i == 0) return cfg.sigma_min;
  const double inv_rho = 1.0 / cfg.rho;
  const double hi = std::pow(cfg.sigma_max, inv_rho);
  const double lo = std::pow(cfg.sigma_min, inv_rho);
  const double frac = static_cast<double>(num_steps - 1 - i) /
                      static_cast<double>(num_steps - 1);
  return std::pow(hi + frac * (lo - hi), cfg.rho);
}

// Geometric guidance weight, zeta(N-1) = zeta_start down to zeta(0) =
// zeta_end, with exact endpoints. Equal endpoints (including zero, which
// turns measurement guidance off entirely) yield a constant schedule.
inline double zeta_schedule(int i, int num_steps, double zeta_start = 1.0,
                            double zeta_end = 0.1) {
  detail::require(num_steps >= 2, "zeta_schedule: need at least 2 steps");
  detail::require(i >= 0 && i < num_steps, "zeta_schedule: index out of range");
  detail::require(zeta_start >= 0 && zeta_end >= 0,
                  "zeta_schedule: weights must be non-negative");
  if (zeta_start == zeta_end) return zeta_start;
  detail::require(zeta_start > 0 && zeta_end > 0,
                  "zeta_schedule: geometric interpolation needs positive ends");
  if (i == num_steps - 1) return zeta_start;
  if (i == 0) return zeta_end;
  const double frac = static_cast<double>(num_steps - 1 - i) /
                      static_cast<double>(num_steps - 1);
  return zeta_start * std::pow(zeta_end / zeta_start, frac);
}

// Inertial extrapolation weight beta(i) = (N-i)/(N-i+3); the first iteration
// (i = N-1) gives exactly 1/4 and the weight grows toward N/(N+3).
inline double momentum_beta(int i, int num_steps) {
  detail::require(num_steps >= 1 && i >= 0 && i < num_steps,
                  "momentum_beta: index out of range");
  const double k = static_cast<double>(num_steps - i);
  return k / (k + 3.0);
}

}  // namespace mdps
