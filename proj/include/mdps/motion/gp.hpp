#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "mdps/core/random.hpp"
#include "mdps/motion/state.hpp"

// Smooth synthetic motion trajectories: each of the 6 parameter tracks is an
// independent draw from a zero-mean Gaussian process over the state indices
// 1..T with RBF kernel k(t, t') = exp(-(t - t')^2 / (2 l^2)) (plus 1e-8
// jitter on the diagonal), pinned to start at zero (state 1 is the identity,
// which also fixes the reconstruction gauge) and affinely rescaled so the
// max-abs of every component hits its severity bound exactly.
//
// Components use independent RNG sub-streams keyed by (seed, component), so
// results are reproducible no matter how the loop is scheduled.

namespace mdps {

struct TrajectoryConfig {
  int num_states = 1;
  double length_scale = 0.0;  // <= 0 means the T/10 default
  double translation_bound_mm = 0.0;
  double rotation_bound_deg = 0.0;
  std::uint64_t seed = 0;
  // When set, each component's amplitude is drawn uniformly from
  // [0.5, 1.0] x bound instead of sitting exactly at the bound.
  bool randomize_amplitude = false;
};

inline MotionTrajectory simulate_gp_trajectory(const TrajectoryConfig& cfg) {
  detail::require(cfg.num_states >= 1,
                  "simulate_gp_trajectory: need at least one state");
  const int T = cfg.num_states;
  const double ell = cfg.length_scale > 0.0
                         ? cfg.length_scale
                         : static_cast<double>(T) / 10.0;

  Eigen::MatrixXd K(T, T);
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < T; ++j) {
      const double d = static_cast<double>(i - j);
      K(i, j) = std::exp(-d * d / (2.0 * ell * ell));
    }
  K.diagonal().array() += 1e-8;
  const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(K).matrixL();

  MotionTrajectory traj(static_cast<std::size_t>(T));
  for (int comp = 0; comp < 6; ++comp) {
    auto rng = make_rng(cfg.seed, static_cast<std::uint64_t>(comp));
    std::normal_distribution<double> n01(0.0, 1.0);
    Eigen::VectorXd xi(T);
    for (int t = 0; t < T; ++t) xi(t) = n01(rng);
    Eigen::VectorXd g = L * xi;
    g.array() -= g(0);  // zero-start: state 1 is the identity

    double bound =
        comp < 3 ? cfg.translation_bound_mm : cfg.rotation_bound_deg;
    if (cfg.randomize_amplitude) {
      std::uniform_real_distribution<double> amp(0.5, 1.0);
      bound *= amp(rng);
    }
    const double max_abs = g.cwiseAbs().maxCoeff();
    for (int t = 0; t < T; ++t) {
      // divide first so the argmax lands on +-bound exactly
      const double val = max_abs > 0.0 ? (g(t) / max_abs) * bound : 0.0;
      traj[static_cast<std::size_t>(t)].param(comp) = val;
    }
  }
  return traj;
}

}  // namespace mdps
