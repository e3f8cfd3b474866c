#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdps/core/types.hpp"
#include "mdps/motion/gp.hpp"
#include "mdps/solver/solver.hpp"

// Experiment configuration: one versioned JSON document drives the whole
// phantom -> simulate -> reconstruct -> evaluate pipeline. Unknown keys are
// rejected so typos cannot silently fall back to defaults; every command
// writes the fully resolved document next to its outputs.

namespace mdps {

struct PhantomConfig {
  Shape3 shape{32, 32, 32};
  Spacing3 spacing{1.0, 1.0, 1.0};
  int num_coils = 4;
  int num_inner_ellipsoids = 5;
  std::uint64_t seed = 7;
};

struct PlanConfig {
  std::string mask = "cartesian";  // cartesian | poisson
  double accel = 2.0;
  double acl_fraction = 0.04;
  std::string ordering = "interleaved_center_first";
  int readout_axis = 0;
  int shots = 16;
  int states_per_shot = 1;
  std::uint64_t seed = 21;
};

struct MotionConfig {
  bool enabled = true;
  std::string severity = "mild";
  // Explicit bounds override the severity level when positive.
  double translation_bound_mm = 0.0;
  double rotation_bound_deg = 0.0;
  double length_scale = 0.0;  // <= 0: T / 10
  bool randomize_amplitude = false;
  std::uint64_t seed = 33;
};

struct NoiseConfig {
  double sigma = 0.0;   // explicit complex std; takes precedence when > 0
  double snr_db = 0.0;  // > 0: derive sigma from the clean samples
  std::uint64_t seed = 101;
};

struct ExperimentConfig {
  std::string output_dir = "out";
  PhantomConfig phantom;
  PlanConfig plan;
  MotionConfig motion;
  NoiseConfig noise;
  bool normalize = true;
  // Initial coil maps for reconstruction: "zero_filled" (estimated from the
  // corrupted measurements) or "ground_truth" (the simulated maps).
  std::string coil_init = "zero_filled";
  SolverConfig solver;
};

namespace detail {

inline void check_keys(const nlohmann::json& j,
                       const std::set<std::string>& allowed,
                       const std::string& where) {
  require(j.is_object(), "config: '" + where + "' must be a JSON object");
  for (const auto& item : j.items())
    require(allowed.count(item.key()) != 0,
            "config: unknown key '" + item.key() + "' in " + where);
}

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void get_shape(const nlohmann::json& j, const char* key, Shape3& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  require(a.is_array() && a.size() == 3,
          std::string("config: '") + key + "' must be a 3-element array");
  out = {a.at(0).get<std::int64_t>(), a.at(1).get<std::int64_t>(),
         a.at(2).get<std::int64_t>()};
}

inline void get_spacing(const nlohmann::json& j, const char* key,
                        Spacing3& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  require(a.is_array() && a.size() == 3,
          std::string("config: '") + key + "' must be a 3-element array");
  out = {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["version"] = 1;
  j["output_dir"] = c.output_dir;
  j["phantom"] = {
      {"shape", {c.phantom.shape.nz, c.phantom.shape.ny, c.phantom.shape.nx}},
      {"spacing_mm",
       {c.phantom.spacing.sz, c.phantom.spacing.sy, c.phantom.spacing.sx}},
      {"num_coils", c.phantom.num_coils},
      {"num_inner_ellipsoids", c.phantom.num_inner_ellipsoids},
      {"seed", c.phantom.seed}};
  j["plan"] = {{"mask", c.plan.mask},
               {"accel", c.plan.accel},
               {"acl_fraction", c.plan.acl_fraction},
               {"ordering", c.plan.ordering},
               {"readout_axis", c.plan.readout_axis},
               {"shots", c.plan.shots},
               {"states_per_shot", c.plan.states_per_shot},
               {"seed", c.plan.seed}};
  j["motion"] = {{"enabled", c.motion.enabled},
                 {"severity", c.motion.severity},
                 {"translation_bound_mm", c.motion.translation_bound_mm},
                 {"rotation_bound_deg", c.motion.rotation_bound_deg},
                 {"length_scale", c.motion.length_scale},
                 {"randomize_amplitude", c.motion.randomize_amplitude},
                 {"seed", c.motion.seed}};
  j["noise"] = {{"sigma", c.noise.sigma},
                {"snr_db", c.noise.snr_db},
                {"seed", c.noise.seed}};
  j["normalize"] = c.normalize;
  j["coil_init"] = c.coil_init;
  j["solver"] = {{"num_steps", c.solver.num_steps},
                 {"sigma_min", c.solver.schedule.sigma_min},
                 {"sigma_max", c.solver.schedule.sigma_max},
                 {"rho", c.solver.schedule.rho},
                 {"zeta_start", c.solver.zeta_start},
                 {"zeta_end", c.solver.zeta_end},
                 {"sigma_fidelity", c.solver.sigma_fidelity},
                 {"prior", c.solver.prior},
                 {"prior_lambda", c.solver.prior_lambda},
                 {"estimate_coils", c.solver.estimate_coils},
                 {"estimate_motion", c.solver.estimate_motion},
                 {"estimation_sigma_start", c.solver.estimation_sigma_start},
                 {"fix_first_state", c.solver.fix_first_state},
                 {"coil_gamma", c.solver.coil_gamma},
                 {"eta_translation", c.solver.motion_eta.translation},
                 {"eta_rotation", c.solver.motion_eta.rotation},
                 {"motion_precondition", c.solver.motion_precondition},
                 {"precond_beta1", c.solver.precond_beta1},
                 {"precond_beta2", c.solver.precond_beta2},
                 {"precond_eps", c.solver.precond_eps},
                 {"cg_tol", c.solver.cg_tol},
                 {"cg_max_iter", c.solver.cg_max_iter},
                 {"backtrack_max_doublings", c.solver.backtrack_max_doublings},
                 {"dc_threshold", c.solver.dc_threshold},
                 {"dc_final_window", c.solver.dc_final_window},
                 {"seed", c.solver.seed}};
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  detail::check_keys(j,
                     {"version", "output_dir", "phantom", "plan", "motion",
                      "noise", "normalize", "coil_init", "solver"},
                     "the top level");
  detail::require(j.contains("version") && j.at("version").is_number_integer(),
                  "config: missing integer 'version'");
  detail::require(j.at("version").get<int>() == 1,
                  "config: unsupported version (expected 1)");

  ExperimentConfig c;
  detail::get_if(j, "output_dir", c.output_dir);
  detail::get_if(j, "normalize", c.normalize);
  detail::get_if(j, "coil_init", c.coil_init);
  detail::require(c.coil_init == "zero_filled" || c.coil_init == "ground_truth",
                  "config: coil_init must be 'zero_filled' or 'ground_truth'");

  if (j.contains("phantom")) {
    const auto& p = j.at("phantom");
    detail::check_keys(
        p, {"shape", "spacing_mm", "num_coils", "num_inner_ellipsoids", "seed"},
        "phantom");
    detail::get_shape(p, "shape", c.phantom.shape);
    detail::get_spacing(p, "spacing_mm", c.phantom.spacing);
    detail::get_if(p, "num_coils", c.phantom.num_coils);
    detail::get_if(p, "num_inner_ellipsoids", c.phantom.num_inner_ellipsoids);
    detail::get_if(p, "seed", c.phantom.seed);
  }
  if (j.contains("plan")) {
    const auto& p = j.at("plan");
    detail::check_keys(p,
                       {"mask", "accel", "acl_fraction", "ordering",
                        "readout_axis", "shots", "states_per_shot", "seed"},
                       "plan");
    detail::get_if(p, "mask", c.plan.mask);
    detail::get_if(p, "accel", c.plan.accel);
    detail::get_if(p, "acl_fraction", c.plan.acl_fraction);
    detail::get_if(p, "ordering", c.plan.ordering);
    detail::get_if(p, "readout_axis", c.plan.readout_axis);
    detail::get_if(p, "shots", c.plan.shots);
    detail::get_if(p, "states_per_shot", c.plan.states_per_shot);
    detail::get_if(p, "seed", c.plan.seed);
    detail::require(c.plan.mask == "cartesian" || c.plan.mask == "poisson",
                    "config: plan.mask must be 'cartesian' or 'poisson'");
  }
  if (j.contains("motion")) {
    const auto& p = j.at("motion");
    detail::check_keys(p,
                       {"enabled", "severity", "translation_bound_mm",
                        "rotation_bound_deg", "length_scale",
                        "randomize_amplitude", "seed"},
                       "motion");
    detail::get_if(p, "enabled", c.motion.enabled);
    detail::get_if(p, "severity", c.motion.severity);
    detail::get_if(p, "translation_bound_mm", c.motion.translation_bound_mm);
    detail::get_if(p, "rotation_bound_deg", c.motion.rotation_bound_deg);
    detail::get_if(p, "length_scale", c.motion.length_scale);
    detail::get_if(p, "randomize_amplitude", c.motion.randomize_amplitude);
    detail::get_if(p, "seed", c.motion.seed);
    detail::require(c.motion.severity == "mild" ||
                        c.motion.severity == "moderate" ||
                        c.motion.severity == "severe",
                    "config: motion.severity must be mild|moderate|severe");
  }
  if (j.contains("noise")) {
    const auto& p = j.at("noise");
    detail::check_keys(p, {"sigma", "snr_db", "seed"}, "noise");
    detail::get_if(p, "sigma", c.noise.sigma);
    detail::get_if(p, "snr_db", c.noise.snr_db);
    detail::get_if(p, "seed", c.noise.seed);
  }
  if (j.contains("solver")) {
    const auto& p = j.at("solver");
    detail::check_keys(
        p, {"num_steps",     "sigma_min",        "sigma_max",
            "rho",           "zeta_start",       "zeta_end",
            "sigma_fidelity", "prior",           "prior_lambda",
            "estimate_coils", "estimate_motion", "estimation_sigma_start",
            "fix_first_state", "coil_gamma",
            "eta_translation", "eta_rotation",   "motion_precondition",
            "precond_beta1", "precond_beta2",    "precond_eps",
            "cg_tol",        "cg_max_iter",      "backtrack_max_doublings",
            "dc_threshold",  "dc_final_window",  "seed"},
        "solver");
    detail::get_if(p, "num_steps", c.solver.num_steps);
    detail::get_if(p, "sigma_min", c.solver.schedule.sigma_min);
    detail::get_if(p, "sigma_max", c.solver.schedule.sigma_max);
    detail::get_if(p, "rho", c.solver.schedule.rho);
    detail::get_if(p, "zeta_start", c.solver.zeta_start);
    detail::get_if(p, "zeta_end", c.solver.zeta_end);
    detail::get_if(p, "sigma_fidelity", c.solver.sigma_fidelity);
    detail::get_if(p, "prior", c.solver.prior);
    detail::get_if(p, "prior_lambda", c.solver.prior_lambda);
    detail::get_if(p, "estimate_coils", c.solver.estimate_coils);
    detail::get_if(p, "estimate_motion", c.solver.estimate_motion);
    detail::get_if(p, "estimation_sigma_start",
                   c.solver.estimation_sigma_start);
    detail::get_if(p, "fix_first_state", c.solver.fix_first_state);
    detail::get_if(p, "coil_gamma", c.solver.coil_gamma);
    detail::get_if(p, "eta_translation", c.solver.motion_eta.translation);
    detail::get_if(p, "eta_rotation", c.solver.motion_eta.rotation);
    detail::get_if(p, "motion_precondition", c.solver.motion_precondition);
    detail::get_if(p, "precond_beta1", c.solver.precond_beta1);
    detail::get_if(p, "precond_beta2", c.solver.precond_beta2);
    detail::get_if(p, "precond_eps", c.solver.precond_eps);
    detail::get_if(p, "cg_tol", c.solver.cg_tol);
    detail::get_if(p, "cg_max_iter", c.solver.cg_max_iter);
    detail::get_if(p, "backtrack_max_doublings",
                   c.solver.backtrack_max_doublings);
    detail::get_if(p, "dc_threshold", c.solver.dc_threshold);
    detail::get_if(p, "dc_final_window", c.solver.dc_final_window);
    detail::get_if(p, "seed", c.solver.seed);
  }
  return c;
}

// Resolves the motion bounds: explicit values win, otherwise the severity
// preset applies.
inline SeverityBounds motion_bounds(const MotionConfig& m) {
  SeverityBounds b = severity_bounds(
      m.severity == "mild" ? Severity::mild
      : m.severity == "moderate" ? Severity::moderate : Severity::severe);
  if (m.translation_bound_mm > 0.0) b.translation_mm = m.translation_bound_mm;
  if (m.rotation_bound_deg > 0.0) b.rotation_deg = m.rotation_bound_deg;
  return b;
}

// Built-in starting points. "test": the desk-scale joint-estimation setup
// (32^3, 4 coils, R=2, 16 shots, halved mild motion, 30 dB SNR). "paperlike":
// the full-protocol parameterization (N=200, sigma in [0.002, 80], rho=7,
// zeta 1.0 -> 0.1, gamma=200, eta_r=1000, eta_t=50, 52 shots, DC 0.75/40) on
// a 64^3 grid with 8 coils and R=4.
inline ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;  // defaults already equal the "test" preset
  // Both presets strengthen the quadratic prior and defer joint estimation
  // until sigma is small. The analytic prior is weak: with lambda ~ 1 the
  // reverse flow leaves unmeasured spatial frequencies at the prior marginal
  // std 1/sqrt(lambda*ell) -- random smooth content comparable to the signal
  // -- and above the sigma gate the denoised iterate is too smooth for coil
  // or motion gradients to carry usable information.
  //
  // The test preset additionally rescales the estimation weights for the
  // desk-scale problem: measurements are percentile-normalized, so the data
  // term's curvature is orders of magnitude below the full-protocol
  // regularization weights; keeping those would pin the coil maps to their
  // initialization and force the trajectory into the second-difference
  // nullspace (affine ramps). The small preconditioner floor keeps
  // data-flat motion coordinates from taking full sign-scale steps, and the
  // longer schedule buys enough sharp-image iterations for the trajectory
  // to converge once the gate opens.
  if (name == "test") {
    c.motion.translation_bound_mm = 1.5;
    c.motion.rotation_bound_deg = 2.5;
    c.noise.snr_db = 30.0;
    c.solver.num_steps = 600;
    c.solver.prior_lambda = 300.0;
    c.solver.estimation_sigma_start = 0.1;
    c.solver.precond_eps = 0.05;
    c.solver.motion_eta.translation = 0.3;
    c.solver.motion_eta.rotation = 3.0;
    c.solver.coil_gamma = 0.2;
    return c;
  }
  if (name == "paperlike") {
    c.phantom.shape = {64, 64, 64};
    c.phantom.num_coils = 8;
    c.plan.accel = 4.0;
    c.plan.shots = 52;
    c.motion.severity = "mild";
    c.noise.snr_db = 30.0;
    c.solver.prior_lambda = 300.0;
    c.solver.estimation_sigma_start = 0.1;
    c.solver.precond_eps = 0.05;
    return c;
  }
  detail::require(false, "unknown preset '" + name + "'");
  return c;
}

inline nlohmann::json load_config_json(const std::string& path) {
  std::ifstream is(path);
  detail::require(static_cast<bool>(is), "cannot open config file: " + path);
  nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
  detail::require(!j.is_discarded(), path + ": malformed JSON");
  return j;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  return config_from_json(load_config_json(path));
}

// Applies one dotted-path override, e.g. "solver.num_steps=100" or
// "phantom.shape=[16,16,16]". The value text is parsed as JSON when
// possible and treated as a bare string otherwise.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  detail::require(eq != std::string::npos && eq > 0,
                  "override must look like path.to.key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;  // bare string

  nlohmann::json* node = &doc;
  std::size_t begin = 0;
  while (true) {
    const std::size_t dot = path.find('.', begin);
    const std::string key = path.substr(
        begin, dot == std::string::npos ? std::string::npos : dot - begin);
    detail::require(!key.empty(), "override has an empty path segment: " + path);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    detail::require(node->contains(key) && (*node)[key].is_object(),
                    "override path does not name a config section: " + path);
    node = &(*node)[key];
    begin = dot + 1;
  }
}

}  // namespace mdps
