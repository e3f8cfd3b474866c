#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mdps/acquisition/forward.hpp"
#include "mdps/acquisition/normalize.hpp"
#include "mdps/priors/coil.hpp"
#include "mdps/priors/motion.hpp"
#include "mdps/priors/score.hpp"
#include "mdps/solver/schedule.hpp"

// Joint reverse-diffusion reconstruction of image, coil maps and rigid
// motion.
//
// The outer loop runs i = N-1 down to 0. Each iteration performs, in order:
//   1. image step: denoise the current iterate, contract toward the denoised
//      estimate by (sigma^i - sigma^{i+1})/sigma^i, and take a
//      zeta^i-weighted measurement-consistency gradient step chained through
//      the denoiser's transpose Jacobian;
//   2. coil step: inertial extrapolation, one proximal gradient step with a
//      backtracked local Lipschitz constant, closed-form smoothness prox,
//      pointwise renormalization;
//   3. motion step: inertial extrapolation, gradient with running first/
//      second-moment statistics feeding a diagonal preconditioner
//      (bias-corrected second moment of the gradient prediction error),
//      backtracked scale, then a CG-solved temporal-smoothness prox.
// In the final dc_final_window iterations, states whose relative residual
// exceeds dc_threshold are excluded from all three data-fidelity sums; the
// exclusion is recomputed every iteration. Steps 2 and 3 can additionally be
// deferred until sigma^i reaches estimation_sigma_start, and the first
// motion state can be pinned to the identity to fix the trajectory gauge.
//
// Determinism: given equal seeds and configuration the whole run is bitwise
// reproducible for every thread count (all reductions are fixed-order).

namespace mdps {

struct SolverConfig {
  int num_steps = 200;
  NoiseScheduleConfig schedule{};
  double zeta_start = 1.0;
  double zeta_end = 0.1;
  // Noise level of the fidelity term 1/(2 sigma_f^2) sum_t ||A_t - z_t||^2.
  // Measurements are expected percentile-normalized, for which 1.0 is
  // calibrated.
  double sigma_fidelity = 1.0;

  std::string prior = "quadratic";
  double prior_lambda = 1.0;

  bool estimate_coils = true;
  bool estimate_motion = true;
  // Coil and motion estimation engage once sigma^i <= estimation_sigma_start;
  // zero (the default) runs them from the first iteration. At high noise
  // levels the fidelity is nearly flat in (c, v) because the denoised iterate
  // is close to zero, so deferring the joint blocks avoids integrating
  // sign-scale steps before the gradients carry usable structure.
  double estimation_sigma_start = 0.0;
  // Pin the first motion state to the identity throughout: it is the
  // trajectory gauge, and simulated trajectories are referenced to state 0
  // the same way.
  bool fix_first_state = true;

  double coil_gamma = 200.0;
  MotionRegWeights motion_eta{};

  // Diagonal motion preconditioner (running gradient statistics). When
  // disabled the metric collapses to L_v times the identity.
  bool motion_precondition = true;
  double precond_beta1 = 0.5;
  double precond_beta2 = 0.9;
  double precond_eps = 1e-8;

  double cg_tol = 1e-8;
  int cg_max_iter = 200;
  int backtrack_max_doublings = 20;

  double dc_threshold = 0.75;
  int dc_final_window = 40;

  std::uint64_t seed = 0;
};

struct SolverState {
  ComplexVolume x;
  CoilSet c;
  CoilSet c_prev;  // previous accepted coil iterate (inertial pair)
  MotionTrajectory v;
  MotionTrajectory v_prev;
  std::vector<std::array<double, 6>> g1;  // running gradient mean
  std::vector<std::array<double, 6>> g2;  // running prediction-error moment
  int precond_k = 0;
  // Starting step scales; backtracking doubles within an iteration until the
  // sufficient-decrease condition holds, so a small start adapts upward
  // immediately on the first estimation step.
  double L_c = 1.0;
  double L_v = 1.0;
  ActiveMask active;
};

struct IterationLog {
  int iteration = 0;
  double sigma = 0.0;
  double zeta = 0.0;
  double data_fidelity = 0.0;
  double L_c = 0.0;
  double L_v = 0.0;
  std::vector<double> dc;  // per-state relative residual
  int active_states = 0;
};

struct ReconResult {
  ComplexVolume x;
  CoilSet c;
  MotionTrajectory v;
  std::vector<IterationLog> history;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline bool all_finite(const ComplexVolume& v) {
  for (const cd& s : v.data)
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) return false;
  return true;
}

inline CoilSet extrapolate(const CoilSet& cur, const CoilSet& prev,
                           double beta) {
  CoilSet out = cur;
  for (std::size_t j = 0; j < out.maps.size(); ++j)
    for (std::size_t i = 0; i < out.maps[j].data.size(); ++i)
      out.maps[j].data[i] += beta * (cur.maps[j].data[i] -
                                     prev.maps[j].data[i]);
  return out;
}

inline MotionTrajectory extrapolate(const MotionTrajectory& cur,
                                    const MotionTrajectory& prev,
                                    double beta) {
  MotionTrajectory out = cur;
  for (std::size_t t = 0; t < out.size(); ++t)
    for (int p = 0; p < 6; ++p)
      out[t].param(p) += beta * (cur[t][p] - prev[t][p]);
  return out;
}

}  // namespace detail

// Header: iteration,sigma,zeta,data_fidelity,L_c,L_v,dc_0..dc_{T-1},
// active_states. All floating-point fields use %.17g, so equal runs produce
// byte-identical files.
inline std::string diagnostics_csv(const std::vector<IterationLog>& history) {
  std::string out = "iteration,sigma,zeta,data_fidelity,L_c,L_v";
  const std::size_t T = history.empty() ? 0 : history.front().dc.size();
  for (std::size_t t = 0; t < T; ++t) out += ",dc_" + std::to_string(t);
  out += ",active_states\n";
  for (const auto& row : history) {
    out += std::to_string(row.iteration);
    out += ',';
    out += detail::format_g17(row.sigma);
    out += ',';
    out += detail::format_g17(row.zeta);
    out += ',';
    out += detail::format_g17(row.data_fidelity);
    out += ',';
    out += detail::format_g17(row.L_c);
    out += ',';
    out += detail::format_g17(row.L_v);
    for (double d : row.dc) {
      out += ',';
      out += detail::format_g17(d);
    }
    out += ',';
    out += std::to_string(row.active_states);
    out += '\n';
  }
  return out;
}

// Starting state: image = sigma_max * seeded standard complex Gaussian
// noise; coils = normalized zero-filled coil images unless supplied
// externally (supplied maps are used verbatim); motion = identity; running
// statistics zeroed.
inline SolverState initialize(const KSpaceSet& z, const SamplingPlan& plan,
                              const SolverConfig& cfg,
                              const Spacing3& spacing = {},
                              const CoilSet* initial_coils = nullptr) {
  detail::require(z.num_times() == plan.num_states(),
                  "initialize: measurement states != plan states");
  detail::require(z.num_times() > 0 && z.num_coils > 0,
                  "initialize: empty measurement set");
  SolverState st;
  st.x = ComplexVolume(plan.grid_shape, spacing);
  auto rng = make_rng(cfg.seed, 0x494E4954ULL);
  for (cd& s : st.x.data)
    s = cfg.schedule.sigma_max * standard_complex_normal(rng);
  if (initial_coils != nullptr) {
    detail::require(initial_coils->num_coils() == z.num_coils &&
                        initial_coils->shape() == plan.grid_shape,
                    "initialize: supplied coil maps do not match the data");
    st.c = *initial_coils;
  } else {
    st.c = coil_normalize(zero_filled_coil_images(z, plan, spacing));
  }
  st.c_prev = st.c;
  st.v.assign(static_cast<std::size_t>(plan.num_states()), MotionState{});
  st.v_prev = st.v;
  st.g1.assign(st.v.size(), std::array<double, 6>{});
  st.g2.assign(st.v.size(), std::array<double, 6>{});
  return st;
}

inline ReconResult run(const KSpaceSet& z, const SamplingPlan& plan,
                       const SolverConfig& cfg, const ScorePrior& prior,
                       const Spacing3& spacing = {},
                       const CoilSet* initial_coils = nullptr) {
  const int N = cfg.num_steps;
  const int T = plan.num_states();
  const double sf = cfg.sigma_fidelity;
  detail::require(sf > 0.0, "run: sigma_fidelity must be positive");
  detail::require(cfg.dc_final_window >= 0,
                  "run: dc_final_window must be non-negative");

  std::vector<double> z_norm(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    z_norm[static_cast<std::size_t>(t)] =
        std::sqrt(squared_norm(z.data[static_cast<std::size_t>(t)]));
    detail::require(z_norm[static_cast<std::size_t>(t)] > 0.0,
                    "run: state " + std::to_string(t) +
                        " has all-zero measurements");
  }

  SolverState st = initialize(z, plan, cfg, spacing, initial_coils);
  ReconResult res;
  const auto warn = [&res](std::string msg) {
    res.warnings.push_back(std::move(msg));
  };
  const auto fail = [](int i, const std::string& what) {
    throw std::runtime_error("solver aborted at iteration " +
                             std::to_string(i) + ": " + what);
  };

  for (int i = N - 1; i >= 0; --i) {
    const double sigma = karras_sigma(i, N, cfg.schedule);
    const double sigma_next = karras_sigma(i + 1, N, cfg.schedule);
    const double zeta = zeta_schedule(i, N, cfg.zeta_start, cfg.zeta_end);
    const double beta = momentum_beta(i, N);

    // ----- image step ---------------------------------------------------
    const ComplexVolume x0 = prior.denoise(st.x, sigma);
    const KBlocks r = compute_residuals(x0, st.c, st.v, plan, z);

    std::vector<double> dc(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      const std::size_t ut = static_cast<std::size_t>(t);
      dc[ut] = std::sqrt(squared_norm(r[ut])) / z_norm[ut];
      if (!std::isfinite(dc[ut]))
        fail(i, "non-finite data-consistency value at state " +
                    std::to_string(t));
    }

    st.active.clear();
    int active_count = T;
    if (i < cfg.dc_final_window) {
      st.active.assign(static_cast<std::size_t>(T), 1);
      active_count = 0;
      for (int t = 0; t < T; ++t) {
        if (dc[static_cast<std::size_t>(t)] > cfg.dc_threshold)
          st.active[static_cast<std::size_t>(t)] = 0;
        else
          ++active_count;
      }
      if (active_count == 0) {
        const std::size_t best = static_cast<std::size_t>(
            std::min_element(dc.begin(), dc.end()) - dc.begin());
        st.active[best] = 1;
        active_count = 1;
        warn("iteration " + std::to_string(i) +
             ": every state exceeded the DC threshold; keeping state " +
             std::to_string(best));
      }
    }

    const double d_val = fidelity_from_residuals(r, st.active, sf);

    {
      const ComplexVolume g_meas =
          grad_x_from_residuals(r, st.c, st.v, plan, sf, st.active);
      const ComplexVolume g = prior.vjp(st.x, sigma, g_meas);
      const double contract = (sigma - sigma_next) / sigma;
      for (std::size_t p = 0; p < st.x.data.size(); ++p)
        st.x.data[p] +=
            contract * (st.x.data[p] - x0.data[p]) - zeta * g.data[p];
      if (!detail::all_finite(st.x))
        fail(i, "non-finite image after the diffusion step");
    }

    const bool estimating = cfg.estimation_sigma_start <= 0.0 ||
                            sigma <= cfg.estimation_sigma_start;

    // ----- coil step ----------------------------------------------------
    if (cfg.estimate_coils && estimating) {
      const CoilSet ct = detail::extrapolate(st.c, st.c_prev, beta);
      const KBlocks rc = compute_residuals(x0, ct, st.v, plan, z);
      const double d_ct = fidelity_from_residuals(rc, st.active, sf);
      const std::vector<ComplexVolume> gc = grad_c_from_residuals(
          rc, x0, st.v, plan, st.c.num_coils(), sf, st.active);
      double gn2 = 0.0;
      for (const auto& gj : gc) gn2 += squared_norm(gj.data);

      const auto candidate_at = [&](double L) {
        CoilSet cand = ct;
        const double inv = 1.0 / L;
        for (std::size_t j = 0; j < cand.maps.size(); ++j)
          for (std::size_t p = 0; p < cand.maps[j].data.size(); ++p)
            cand.maps[j].data[p] -= inv * gc[j].data[p];
        return cand;
      };

      double L = 0.5 * st.L_c;
      CoilSet cand;
      bool accepted = false;
      for (int d = 0; d <= cfg.backtrack_max_doublings; ++d) {
        cand = candidate_at(L);
        const double d_cand =
            data_fidelity(x0, cand, st.v, z, plan, sf, st.active);
        if (d_cand <= d_ct - gn2 / (2.0 * L)) {
          accepted = true;
          break;
        }
        if (d < cfg.backtrack_max_doublings) L *= 2.0;
      }
      if (!accepted)
        warn("iteration " + std::to_string(i) +
             ": coil backtracking hit the doubling cap; proceeding with L_c=" +
             detail::format_g17(L));
      st.L_c = L;

      CoilSet next = coil_normalize(coil_prox(cand, cfg.coil_gamma, st.L_c));
      st.c_prev = std::move(st.c);
      st.c = std::move(next);
    }

    // ----- motion step --------------------------------------------------
    if (cfg.estimate_motion && estimating) {
      const MotionTrajectory vt = detail::extrapolate(st.v, st.v_prev, beta);
      const KBlocks rv = compute_residuals(x0, st.c, vt, plan, z);
      const double d_vt = fidelity_from_residuals(rv, st.active, sf);
      auto gv = grad_v_from_residuals(rv, x0, st.c, vt, plan, sf, st.active);
      for (const auto& row : gv)
        for (double g : row)
          if (!std::isfinite(g)) fail(i, "non-finite motion gradient");
      if (cfg.fix_first_state && !gv.empty()) gv.front().fill(0.0);

      st.precond_k += 1;
      const double b1 = cfg.precond_beta1;
      const double b2 = cfg.precond_beta2;
      std::vector<std::array<double, 6>> base(
          st.v.size(), {1.0, 1.0, 1.0, 1.0, 1.0, 1.0});
      const double bias = 1.0 - std::pow(b2, st.precond_k);
      for (std::size_t t = 0; t < st.v.size(); ++t)
        for (int p = 0; p < 6; ++p) {
          const std::size_t up = static_cast<std::size_t>(p);
          st.g1[t][up] = b1 * st.g1[t][up] + (1.0 - b1) * gv[t][up];
          const double diff = gv[t][up] - st.g1[t][up];
          st.g2[t][up] = b2 * st.g2[t][up] + (1.0 - b2) * diff * diff;
          if (cfg.motion_precondition)
            base[t][up] = std::sqrt(st.g2[t][up] / bias) + cfg.precond_eps;
        }

      const auto candidate_at = [&](double L) {
        MotionTrajectory u = vt;
        for (std::size_t t = 0; t < u.size(); ++t)
          for (int p = 0; p < 6; ++p)
            u[t].param(p) -= gv[t][static_cast<std::size_t>(p)] /
                             (L * base[t][static_cast<std::size_t>(p)]);
        return u;
      };
      double g_base = 0.0;  // sum g^2 / base (the L_v-free part of g^T P^-1 g)
      for (std::size_t t = 0; t < st.v.size(); ++t)
        for (int p = 0; p < 6; ++p) {
          const std::size_t up = static_cast<std::size_t>(p);
          g_base += gv[t][up] * gv[t][up] / base[t][up];
        }

      double L = 0.5 * st.L_v;
      MotionTrajectory u;
      bool accepted = false;
      for (int d = 0; d <= cfg.backtrack_max_doublings; ++d) {
        u = candidate_at(L);
        const double d_cand =
            data_fidelity(x0, st.c, u, z, plan, sf, st.active);
        if (d_cand <= d_vt - 0.5 * g_base / L) {
          accepted = true;
          break;
        }
        if (d < cfg.backtrack_max_doublings) L *= 2.0;
      }
      if (!accepted)
        warn("iteration " + std::to_string(i) +
             ": motion backtracking hit the doubling cap; proceeding with "
             "L_v=" +
             detail::format_g17(L));
      st.L_v = L;

      MotionDiagonal P(st.v.size());
      for (std::size_t t = 0; t < st.v.size(); ++t)
        for (int p = 0; p < 6; ++p)
          P[t][static_cast<std::size_t>(p)] =
              st.L_v * base[t][static_cast<std::size_t>(p)];
      MotionProxResult prox =
          motion_prox(u, P, cfg.motion_eta, cfg.cg_tol, cfg.cg_max_iter,
                      cfg.fix_first_state);
      if (!prox.converged)
        warn("iteration " + std::to_string(i) +
             ": motion prox CG stopped at relative residual " +
             detail::format_g17(prox.relative_residual));
      st.v_prev = std::move(st.v);
      st.v = std::move(prox.v);
    }

    // ----- diagnostics ----------------------------------------------------
    IterationLog row;
    row.iteration = i;
    row.sigma = sigma;
    row.zeta = zeta;
    row.data_fidelity = d_val;
    row.L_c = st.L_c;
    row.L_v = st.L_v;
    row.dc = std::move(dc);
    row.active_states = active_count;
    res.history.push_back(std::move(row));
  }

  res.x = std::move(st.x);
  res.c = std::move(st.c);
  res.v = std::move(st.v);
  return res;
}

// Convenience overload constructing the prior named in the configuration.
inline ReconResult run(const KSpaceSet& z, const SamplingPlan& plan,
                       const SolverConfig& cfg, const Spacing3& spacing = {},
                       const CoilSet* initial_coils = nullptr) {
  const auto prior = make_score_prior(cfg.prior, cfg.prior_lambda);
  return run(z, plan, cfg, *prior, spacing, initial_coils);
}

}  // namespace mdps
