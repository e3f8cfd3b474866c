#pragma once

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "mdps/acquisition/kspace.hpp"
#include "mdps/acquisition/plan.hpp"
#include "mdps/core/parallel.hpp"
#include "mdps/core/random.hpp"
#include "mdps/core/volume.hpp"
#include "mdps/motion/warp.hpp"
#include "mdps/transforms/fft.hpp"

// Motion-resolved multi-coil encoding operator and its derivatives.
//
// Per state t:  A_t(x, c, v_t) = M_t F (c (.) W(x, v_t))
// where W is the rigid pull-back warp, (.) the voxel-wise coil product, F
// the centred orthonormal DFT and M_t the gather onto state t's sample
// positions. The full operator stacks all states. Data fidelity:
//   D = 1/(2 sigma^2) sum_t ||A_t - z_t||^2  over the active states.
//
// Gradients follow the real-inner-product convention for complex variables
// (grad = dD/dRe + i dD/dIm):
//   grad_x = 1/sigma^2 sum_t W_t^T (sum_j conj(c_j) F^{-1} M_t^T r_tj)
//   grad_c_j = 1/sigma^2 sum_t conj(W(x, v_t)) (.) F^{-1} M_t^T r_tj
//   grad_v_t = 1/sigma^2 warp_vjp(x, v_t, sum_j conj(c_j) F^{-1} M_t^T r_tj)
//
// Determinism: parallel regions never share accumulators; any sum over
// states or coils happens sequentially in ascending order, so results are
// bit-identical for every MDPS_THREADS setting.

namespace mdps {

using KBlocks = std::vector<std::vector<cd>>;  // per-state C*K_t sample blocks

// States excluded from the fidelity sums (data-consistency rejection) carry
// a zero; empty means every state is active.
using ActiveMask = std::vector<std::uint8_t>;

namespace detail {

inline bool state_active(const ActiveMask& m, int t) {
  return m.empty() || m[static_cast<std::size_t>(t)] != 0;
}

inline void check_model_inputs(const ComplexVolume& x, const CoilSet& c,
                               const SamplingPlan& plan) {
  require(x.shape == plan.grid_shape,
          "forward model: volume shape does not match the plan grid");
  require(c.num_coils() > 0, "forward model: need at least one coil");
  require(c.shape() == x.shape,
          "forward model: coil maps must live on the volume grid");
}

}  // namespace detail

// Samples of state t, coil-major within the block (c * K_t + k).
inline std::vector<cd> forward_at_t(const ComplexVolume& x, const CoilSet& c,
                                    const MotionState& v_t,
                                    const SamplingPlan& plan, int t) {
  detail::check_model_inputs(x, c, plan);
  const auto idx = plan.state_grid_indices(t);
  const ComplexVolume w = warp(x, v_t);
  std::vector<cd> block(idx.size() * static_cast<std::size_t>(c.num_coils()));
  ComplexVolume prod(x.shape, x.spacing);
  for (int j = 0; j < c.num_coils(); ++j) {
    const ComplexVolume& cj = c.maps[static_cast<std::size_t>(j)];
    for (std::int64_t i = 0; i < w.size(); ++i) prod[i] = cj[i] * w[i];
    const ComplexVolume spec = fft3(prod);
    cd* out = block.data() + static_cast<std::size_t>(j) * idx.size();
    for (std::size_t k = 0; k < idx.size(); ++k)
      out[k] = spec[idx[k]];
  }
  return block;
}

inline KBlocks forward_full(const ComplexVolume& x, const CoilSet& c,
                            const MotionTrajectory& v,
                            const SamplingPlan& plan) {
  detail::check_model_inputs(x, c, plan);
  detail::require(static_cast<int>(v.size()) == plan.num_states(),
                  "forward_full: trajectory length != plan states");
  KBlocks out(v.size());
  parallel_for(plan.num_states(), [&](std::int64_t t) {
    out[static_cast<std::size_t>(t)] = forward_at_t(
        x, c, v[static_cast<std::size_t>(t)], plan, static_cast<int>(t));
  });
  return out;
}

namespace detail {

// F^{-1} M_t^T of one coil's sample block: scatter onto the zero-filled grid
// (sample positions are unique within a state) and inverse-transform.
inline ComplexVolume scatter_ifft(const cd* block,
                                  const std::vector<std::int64_t>& idx,
                                  const Shape3& shape,
                                  const Spacing3& spacing) {
  ComplexVolume grid(shape, spacing);
  for (std::size_t k = 0; k < idx.size(); ++k) grid[idx[k]] = block[k];
  return ifft3(grid);
}

// sum_j conj(c_j) (.) F^{-1} M_t^T r_tj  -- the coil-combined image-space
// cotangent of state t.
inline ComplexVolume coil_combined_cotangent(const std::vector<cd>& block,
                                             const CoilSet& c,
                                             const std::vector<std::int64_t>& idx,
                                             const Shape3& shape,
                                             const Spacing3& spacing) {
  ComplexVolume acc(shape, spacing);
  const std::size_t K = idx.size();
  for (int j = 0; j < c.num_coils(); ++j) {
    const ComplexVolume img = scatter_ifft(
        block.data() + static_cast<std::size_t>(j) * K, idx, shape, spacing);
    const ComplexVolume& cj = c.maps[static_cast<std::size_t>(j)];
    for (std::int64_t i = 0; i < acc.size(); ++i)
      acc[i] += std::conj(cj[i]) * img[i];
  }
  return acc;
}

}  // namespace detail

// Adjoint of the stacked operator: A^H y = sum_t W_t^T sum_j conj(c_j)
// F^{-1} M_t^T y_tj. States are processed in fixed-size batches; partial
// volumes merge in ascending t order for thread-count independence.
inline ComplexVolume adjoint_full(const KBlocks& y, const CoilSet& c,
                                  const MotionTrajectory& v,
                                  const SamplingPlan& plan,
                                  const ActiveMask& active = {}) {
  detail::require(y.size() == v.size() &&
                      static_cast<int>(v.size()) == plan.num_states(),
                  "adjoint_full: block/trajectory/plan size mismatch");
  const Shape3 shape = plan.grid_shape;
  detail::require(c.num_coils() > 0 && c.shape() == shape,
                  "adjoint_full: coil maps must live on the plan grid");
  const Spacing3 spacing = c.maps[0].spacing;
  ComplexVolume out(shape, spacing);
  const int T = plan.num_states();
  constexpr int kBatch = 8;
  std::vector<ComplexVolume> partial(static_cast<std::size_t>(
      std::min(T, kBatch)));
  for (int base = 0; base < T; base += kBatch) {
    const int n = std::min(kBatch, T - base);
    parallel_for(n, [&](std::int64_t i) {
      const int t = base + static_cast<int>(i);
      if (!detail::state_active(active, t)) {
        partial[static_cast<std::size_t>(i)] = ComplexVolume(shape, spacing);
        return;
      }
      const auto idx = plan.state_grid_indices(t);
      const ComplexVolume cot = detail::coil_combined_cotangent(
          y[static_cast<std::size_t>(t)], c, idx, shape, spacing);
      partial[static_cast<std::size_t>(i)] =
          warp_adjoint(cot, v[static_cast<std::size_t>(t)]);
    });
    for (int i = 0; i < n; ++i)
      for (std::int64_t p = 0; p < out.size(); ++p)
        out[p] += partial[static_cast<std::size_t>(i)][p];
  }
  return out;
}

// r_t = A_t(x, c, v_t) - z_t for every state (rejection is applied by the
// consumers, not here, so data-consistency values stay observable).
inline KBlocks compute_residuals(const ComplexVolume& x, const CoilSet& c,
                                 const MotionTrajectory& v,
                                 const SamplingPlan& plan,
                                 const KSpaceSet& z) {
  detail::require(z.num_times() == plan.num_states(),
                  "compute_residuals: measurement states != plan states");
  detail::require(z.num_coils == c.num_coils(),
                  "compute_residuals: coil count mismatch");
  KBlocks r = forward_full(x, c, v, plan);
  for (int t = 0; t < z.num_times(); ++t) {
    auto& rt = r[static_cast<std::size_t>(t)];
    const auto& zt = z.data[static_cast<std::size_t>(t)];
    detail::require(rt.size() == zt.size(),
                    "compute_residuals: sample count mismatch at state " +
                        std::to_string(t));
    for (std::size_t i = 0; i < rt.size(); ++i) rt[i] -= zt[i];
  }
  return r;
}

inline double fidelity_from_residuals(const KBlocks& r,
                                      const ActiveMask& active,
                                      double sigma) {
  detail::require(sigma > 0.0, "data fidelity: sigma must be positive");
  double acc = 0.0;
  for (int t = 0; t < static_cast<int>(r.size()); ++t)
    if (detail::state_active(active, t))
      acc += squared_norm(r[static_cast<std::size_t>(t)]);
  return acc / (2.0 * sigma * sigma);
}

inline double data_fidelity(const ComplexVolume& x, const CoilSet& c,
                            const MotionTrajectory& v, const KSpaceSet& z,
                            const SamplingPlan& plan, double sigma = 1.0,
                            const ActiveMask& active = {}) {
  detail::require(sigma > 0.0, "data_fidelity: sigma must be positive");
  return fidelity_from_residuals(compute_residuals(x, c, v, plan, z), active,
                                 sigma);
}

inline ComplexVolume grad_x_from_residuals(const KBlocks& r, const CoilSet& c,
                                           const MotionTrajectory& v,
                                           const SamplingPlan& plan,
                                           double sigma,
                                           const ActiveMask& active = {}) {
  detail::require(sigma > 0.0, "grad_x: sigma must be positive");
  ComplexVolume g = adjoint_full(r, c, v, plan, active);
  const double inv = 1.0 / (sigma * sigma);
  for (auto& val : g.data) val *= inv;
  return g;
}

// Per-coil gradients. The state loop is sequential (one warp per state, all
// coil accumulators advance in ascending t); coils run in parallel.
inline std::vector<ComplexVolume> grad_c_from_residuals(
    const KBlocks& r, const ComplexVolume& x, const MotionTrajectory& v,
    const SamplingPlan& plan, int num_coils, double sigma,
    const ActiveMask& active = {}) {
  detail::require(sigma > 0.0, "grad_c: sigma must be positive");
  const Shape3 shape = plan.grid_shape;
  std::vector<ComplexVolume> g(static_cast<std::size_t>(num_coils),
                               ComplexVolume(shape, x.spacing));
  const double inv = 1.0 / (sigma * sigma);
  for (int t = 0; t < plan.num_states(); ++t) {
    if (!detail::state_active(active, t)) continue;
    const auto idx = plan.state_grid_indices(t);
    const ComplexVolume w = warp(x, v[static_cast<std::size_t>(t)]);
    parallel_for(num_coils, [&](std::int64_t j) {
      const ComplexVolume img = detail::scatter_ifft(
          r[static_cast<std::size_t>(t)].data() +
              static_cast<std::size_t>(j) * idx.size(),
          idx, shape, x.spacing);
      auto& gj = g[static_cast<std::size_t>(j)];
      for (std::int64_t i = 0; i < gj.size(); ++i)
        gj[i] += inv * std::conj(w[i]) * img[i];
    });
  }
  return g;
}

// Per-state 6-vectors (zeros for rejected states).
inline std::vector<std::array<double, 6>> grad_v_from_residuals(
    const KBlocks& r, const ComplexVolume& x, const CoilSet& c,
    const MotionTrajectory& v, const SamplingPlan& plan, double sigma,
    const ActiveMask& active = {}) {
  detail::require(sigma > 0.0, "grad_v: sigma must be positive");
  const double inv = 1.0 / (sigma * sigma);
  std::vector<std::array<double, 6>> g(v.size(), std::array<double, 6>{});
  parallel_for(plan.num_states(), [&](std::int64_t t) {
    if (!detail::state_active(active, static_cast<int>(t))) return;
    const auto idx = plan.state_grid_indices(static_cast<int>(t));
    const ComplexVolume cot = detail::coil_combined_cotangent(
        r[static_cast<std::size_t>(t)], c, idx, plan.grid_shape, x.spacing);
    const auto vjp = warp_vjp(x, v[static_cast<std::size_t>(t)], cot);
    for (int j = 0; j < 6; ++j)
      g[static_cast<std::size_t>(t)][j] = inv * vjp.grad_s[j];
  });
  return g;
}

// Spec-level wrappers that recompute residuals.
inline ComplexVolume grad_data_fidelity_x(const ComplexVolume& x,
                                          const CoilSet& c,
                                          const MotionTrajectory& v,
                                          const KSpaceSet& z,
                                          const SamplingPlan& plan,
                                          double sigma = 1.0,
                                          const ActiveMask& active = {}) {
  return grad_x_from_residuals(compute_residuals(x, c, v, plan, z), c, v,
                               plan, sigma, active);
}

inline std::vector<ComplexVolume> grad_data_fidelity_c(
    const ComplexVolume& x, const CoilSet& c, const MotionTrajectory& v,
    const KSpaceSet& z, const SamplingPlan& plan, double sigma = 1.0,
    const ActiveMask& active = {}) {
  return grad_c_from_residuals(compute_residuals(x, c, v, plan, z), x, v,
                               plan, c.num_coils(), sigma, active);
}

inline std::vector<std::array<double, 6>> grad_data_fidelity_v(
    const ComplexVolume& x, const CoilSet& c, const MotionTrajectory& v,
    const KSpaceSet& z, const SamplingPlan& plan, double sigma = 1.0,
    const ActiveMask& active = {}) {
  return grad_v_from_residuals(compute_residuals(x, c, v, plan, z), x, c, v,
                               plan, sigma, active);
}

struct NoiseModel {
  double sigma = 0.0;  // complex std: E|eps|^2 = sigma^2
  std::uint64_t seed = 0;
};

// Adds i.i.d. circular complex Gaussian noise of std sigma (E|eps|^2 =
// sigma^2) to every sample, one RNG sub-stream per state so the realization
// does not depend on how other states are laid out.
inline void add_measurement_noise(KSpaceSet& z, double sigma,
                                  std::uint64_t seed) {
  detail::require(sigma >= 0.0, "add_measurement_noise: negative noise std");
  z.noise_sigma = sigma;
  if (sigma == 0.0) return;
  for (int t = 0; t < z.num_times(); ++t) {
    auto rng = make_rng(seed, 0xA0000000ULL + static_cast<std::uint64_t>(t));
    std::normal_distribution<double> n01(0.0, sigma / std::sqrt(2.0));
    for (auto& s : z.data[static_cast<std::size_t>(t)]) {
      const double re = n01(rng);
      const double im = n01(rng);
      s += cd(re, im);
    }
  }
}

// Measurement simulation: exact forward samples plus i.i.d. circular complex
// Gaussian noise (per-state RNG sub-streams keyed by (seed, t)).
inline KSpaceSet simulate_kspace(const ComplexVolume& x, const CoilSet& c,
                                 const MotionTrajectory& v,
                                 const SamplingPlan& plan,
                                 const NoiseModel& noise = {}) {
  KSpaceSet z;
  z.num_coils = c.num_coils();
  z.plan_ref = plan.id;
  z.data = forward_full(x, c, v, plan);
  add_measurement_noise(z, noise.sigma, noise.seed);
  return z;
}

// Complex noise std that realizes the requested measurement SNR (in dB,
// power ratio mean|z|^2 / sigma^2) on the given clean samples.
inline double sigma_for_snr_db(const KBlocks& clean, double snr_db) {
  double power = 0.0;
  std::int64_t n = 0;
  for (const auto& block : clean) {
    for (const cd& s : block) power += std::norm(s);
    n += static_cast<std::int64_t>(block.size());
  }
  detail::require(n > 0 && power > 0.0,
                  "sigma_for_snr_db: empty or all-zero measurements");
  return std::sqrt(power / static_cast<double>(n)) *
         std::pow(10.0, -snr_db / 20.0);
}

}  // namespace mdps
