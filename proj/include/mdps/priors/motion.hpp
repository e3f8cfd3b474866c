#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mdps/motion/state.hpp"

// Temporal smoothness regularization of motion trajectories.
//
// R(v) = (1/2) sum_t || W_eta d_t ||^2, where d_t are the interior second
// differences of the 6-parameter time series and W_eta weights translation
// components by eta_t and rotation components by eta_r. The proximal step
// under a diagonal metric P solves the SPD linear system
//   (L^T W_eta L + P) v = P w
// with conjugate gradients started at v = w.

namespace mdps {

struct MotionRegWeights {
  double translation = 50.0;
  double rotation = 1000.0;

  double component(int p) const { return p < 3 ? translation : rotation; }
};

// Per-state, per-parameter diagonal metric (entries must be positive for the
// prox system to be SPD).
using MotionDiagonal = std::vector<std::array<double, 6>>;

inline double motion_reg_value(const MotionTrajectory& v,
                               const MotionRegWeights& eta) {
  double acc = 0.0;
  for (const auto& d : second_difference(v))
    for (int p = 0; p < 6; ++p) acc += eta.component(p) * d[p] * d[p];
  return 0.5 * acc;
}

// Gradient of motion_reg_value: L^T W_eta L v.
inline MotionTrajectory motion_reg_grad(const MotionTrajectory& v,
                                        const MotionRegWeights& eta) {
  MotionTrajectory g(v.size());
  const auto diffs = second_difference(v);
  for (std::size_t t = 0; t < diffs.size(); ++t)
    for (int p = 0; p < 6; ++p) {
      const double ed = eta.component(p) * diffs[t][p];
      g[t].param(p) += ed;
      g[t + 1].param(p) += -2.0 * ed;
      g[t + 2].param(p) += ed;
    }
  return g;
}

struct MotionProxResult {
  MotionTrajectory v;
  bool converged = false;
  int iterations = 0;
  double relative_residual = 0.0;
};

namespace detail {

// (eta L^T L + P) x, on the flat 6T layout x[t * 6 + p].
inline void motion_prox_apply(const std::vector<double>& x,
                              const MotionDiagonal& P,
                              const MotionRegWeights& eta,
                              std::vector<double>& out) {
  const std::size_t T = P.size();
  for (std::size_t t = 0; t < T; ++t)
    for (int p = 0; p < 6; ++p)
      out[t * 6 + p] = P[t][static_cast<std::size_t>(p)] * x[t * 6 + p];
  for (std::size_t t = 1; t + 1 < T; ++t)
    for (int p = 0; p < 6; ++p) {
      const double d =
          x[(t + 1) * 6 + p] - 2.0 * x[t * 6 + p] + x[(t - 1) * 6 + p];
      const double ed = eta.component(p) * d;
      out[(t - 1) * 6 + p] += ed;
      out[t * 6 + p] += -2.0 * ed;
      out[(t + 1) * 6 + p] += ed;
    }
}

}  // namespace detail

// Proximal map of R under the metric P: argmin_v R(v) + (1/2)|v - w|_P^2.
// CG runs from v = w until ||r|| <= tol * ||P w|| or max_iter sweeps; on
// non-convergence the lowest-residual iterate is returned with the flag
// cleared so callers can warn. With fix_first the first state is pinned to
// zero (the trajectory gauge) and the system is solved over the remaining
// coordinates.
inline MotionProxResult motion_prox(const MotionTrajectory& w,
                                    const MotionDiagonal& P,
                                    const MotionRegWeights& eta,
                                    double tol = 1e-8, int max_iter = 200,
                                    bool fix_first = false) {
  detail::require(w.size() == P.size(), "motion_prox: metric/state mismatch");
  const std::size_t n = w.size() * 6;
  for (const auto& row : P)
    for (double d : row)
      detail::require(d > 0.0, "motion_prox: metric must be positive");

  std::vector<double> x(n), b(n), r(n), d(n), q(n);
  for (std::size_t t = 0; t < w.size(); ++t)
    for (int p = 0; p < 6; ++p) {
      x[t * 6 + p] = w[t][p];
      b[t * 6 + p] = P[t][static_cast<std::size_t>(p)] * w[t][p];
    }
  if (fix_first && !w.empty())
    for (std::size_t p = 0; p < 6; ++p) x[p] = b[p] = 0.0;

  const auto dot = [n](const std::vector<double>& a,
                       const std::vector<double>& c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * c[i];
    return acc;
  };
  const auto apply_op = [&](const std::vector<double>& in,
                            std::vector<double>& out) {
    detail::motion_prox_apply(in, P, eta, out);
    if (fix_first && !out.empty())
      for (std::size_t p = 0; p < 6; ++p) out[p] = 0.0;
  };

  apply_op(x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
  const double b_norm = std::sqrt(dot(b, b));
  const double stop = tol * b_norm;

  double rr = dot(r, r);
  std::vector<double> best_x = x;
  double best_rr = rr;
  int iters = 0;
  bool converged = std::sqrt(rr) <= stop;
  d = r;
  while (!converged && iters < max_iter) {
    apply_op(d, q);
    const double dq = dot(d, q);
    if (dq <= 0.0) break;  // numerically lost positive-definiteness
    const double alpha = rr / dq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * d[i];
      r[i] -= alpha * q[i];
    }
    const double rr_new = dot(r, r);
    ++iters;
    if (rr_new < best_rr) {
      best_rr = rr_new;
      best_x = x;
    }
    if (std::sqrt(rr_new) <= stop) {
      converged = true;
      rr = rr_new;
      break;
    }
    const double beta = rr_new / rr;
    for (std::size_t i = 0; i < n; ++i) d[i] = r[i] + beta * d[i];
    rr = rr_new;
  }

  const std::vector<double>& sol = converged ? x : best_x;
  MotionProxResult out;
  out.v.resize(w.size());
  for (std::size_t t = 0; t < w.size(); ++t)
    for (int p = 0; p < 6; ++p) out.v[t].param(p) = sol[t * 6 + p];
  out.converged = converged;
  out.iterations = iters;
  out.relative_residual =
      b_norm > 0.0 ? std::sqrt(converged ? rr : best_rr) / b_norm : 0.0;
  return out;
}

}  // namespace mdps
