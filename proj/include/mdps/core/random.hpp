#pragma once

#include <cstdint>
#include <random>

#include "mdps/core/types.hpp"

namespace mdps {

// All randomness in the library flows through explicitly seeded engines.
// Independent sub-streams are derived as (seed, stream) pairs so components
// that could run in parallel (trajectory components, per-state noise) stay
// deterministic regardless of scheduling.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// Circular complex Gaussian with E|z|^2 = 1 (re and im each N(0, 1/2)).
inline cd standard_complex_normal(std::mt19937_64& rng) {
  static constexpr double kInvSqrt2 = 0.7071067811865475244;
  std::normal_distribution<double> n01(0.0, 1.0);
  const double re = n01(rng);
  const double im = n01(rng);
  return cd(re * kInvSqrt2, im * kInvSqrt2);
}

}  // namespace mdps
