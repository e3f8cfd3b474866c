#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdps/acquisition/forward.hpp"
#include "mdps/acquisition/normalize.hpp"
#include "mdps/core/volume_io.hpp"
#include "mdps/eval/metrics.hpp"
#include "mdps/eval/phantom.hpp"
#include "mdps/motion/gp.hpp"
#include "mdps/motion/trajectory_io.hpp"
#include "mdps/pipeline/config.hpp"
#include "mdps/solver/solver.hpp"

// The five pipeline commands. Each consumes the experiment configuration,
// reads its predecessors' artifacts from the output directory, writes its
// own, refreshes checksums.json (FNV-1a 64-bit per file) and re-writes the
// resolved configuration, so a directory always documents how it was made.
//
// Artifact names inside output_dir:
//   phantom      phantom.vol, coils_XX.vol, coils.json, phantom_spec.json
//   simulate     plan.json, kspace.ksp, trajectory_true.csv,
//                zero_filled_rss.vol
//   reconstruct  recon.vol, coils_est_XX.vol, coils_est.json,
//                trajectory_est.csv, diagnostics.csv, warnings.txt
//   evaluate     metrics.json (+ metrics_history.csv append)
//   export       slice_{axial,sagittal}_{reference,recon,error}.pgm,
//                slices.json, trajectories.csv

namespace mdps {
namespace detail {

inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string file_checksum(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "checksum: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string bytes = ss.str();
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(bytes.data(), bytes.size())));
  return buf;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "cannot open for writing: " + path);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  require(f.good(), "write failed: " + path);
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), "cannot open: " + path);
  nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
  require(!j.is_discarded(), path + ": malformed JSON");
  return j;
}

}  // namespace detail

class Pipeline {
 public:
  explicit Pipeline(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
    detail::require(!cfg_.output_dir.empty(), "output_dir must not be empty");
    std::filesystem::create_directories(cfg_.output_dir);
  }

  const ExperimentConfig& config() const { return cfg_; }
  std::string path(const std::string& name) const {
    return (std::filesystem::path(cfg_.output_dir) / name).string();
  }

  // ---- phantom ---------------------------------------------------------

  void cmd_phantom() {
    const PhantomSpec spec =
        random_phantom_spec(cfg_.phantom.shape, cfg_.phantom.seed,
                            cfg_.phantom.spacing,
                            cfg_.phantom.num_inner_ellipsoids);
    const ComplexVolume phantom = make_phantom(spec);
    const CoilSet coils =
        make_synthetic_coils(cfg_.phantom.shape, cfg_.phantom.num_coils,
                             cfg_.phantom.seed, cfg_.phantom.spacing);

    save_volume(phantom, path("phantom.vol"));
    const std::vector<std::string> coil_files =
        save_coils(coils, "coils", "coils.json");

    nlohmann::json sj;
    sj["shape"] = {spec.shape.nz, spec.shape.ny, spec.shape.nx};
    sj["seed"] = spec.seed;
    sj["phase_coeffs"] = spec.phase_coeffs;
    sj["ellipsoids"] = nlohmann::json::array();
    for (const auto& e : spec.ellipsoids)
      sj["ellipsoids"].push_back({{"centre", {e.cz, e.cy, e.cx}},
                                  {"semi_axes", {e.az, e.ay, e.ax}},
                                  {"amplitude",
                                   {e.amplitude.real(), e.amplitude.imag()}}});
    detail::write_text(path("phantom_spec.json"), sj.dump(2) + "\n");

    std::vector<std::string> files = {"phantom.vol", "coils.json",
                                      "phantom_spec.json"};
    files.insert(files.end(), coil_files.begin(), coil_files.end());
    finish(files);
  }

  // ---- simulate --------------------------------------------------------

  void cmd_simulate() {
    const ComplexVolume phantom = load_volume(path("phantom.vol"));
    const CoilSet coils = load_coils("coils.json");

    std::vector<std::uint8_t> mask;
    if (cfg_.plan.mask == "cartesian") {
      mask = make_cartesian_mask(pe0(), pe1(), cfg_.plan.accel,
                                 cfg_.plan.acl_fraction, cfg_.plan.seed);
    } else {
      mask = make_poisson_mask(pe0(), pe1(), cfg_.plan.accel,
                               cfg_.plan.acl_fraction, cfg_.plan.seed)
                 .mask;
    }
    const SamplingPlan plan = make_sampling_plan(
        cfg_.phantom.shape, cfg_.plan.readout_axis, std::move(mask),
        cfg_.plan.ordering, cfg_.plan.shots, cfg_.plan.states_per_shot,
        cfg_.plan.seed);
    save_plan(plan, path("plan.json"));

    MotionTrajectory truth(static_cast<std::size_t>(plan.num_states()));
    if (cfg_.motion.enabled) {
      const SeverityBounds b = motion_bounds(cfg_.motion);
      TrajectoryConfig tc;
      tc.num_states = plan.num_states();
      tc.length_scale = cfg_.motion.length_scale;
      tc.translation_bound_mm = b.translation_mm;
      tc.rotation_bound_deg = b.rotation_deg;
      tc.seed = cfg_.motion.seed;
      tc.randomize_amplitude = cfg_.motion.randomize_amplitude;
      truth = simulate_gp_trajectory(tc);
    }
    save_trajectory_csv(truth, path("trajectory_true.csv"));

    KSpaceSet z;
    z.num_coils = coils.num_coils();
    z.plan_ref = plan.id;
    z.data = forward_full(phantom, coils, truth, plan);
    double sigma = cfg_.noise.sigma;
    if (sigma <= 0.0 && cfg_.noise.snr_db > 0.0)
      sigma = sigma_for_snr_db(z.data, cfg_.noise.snr_db);
    add_measurement_noise(z, std::max(sigma, 0.0), cfg_.noise.seed);

    // The motion-corrupted baseline image, in the raw measurement scale.
    save_volume(zero_filled_rss(z, plan, phantom.spacing),
                path("zero_filled_rss.vol"));

    if (cfg_.normalize) z = percentile_normalize(z, plan).first;
    save_kspace(z, path("kspace.ksp"));

    finish({"plan.json", "trajectory_true.csv", "kspace.ksp",
            "zero_filled_rss.vol"});
  }

  // ---- reconstruct -----------------------------------------------------

  // Returns the solver result so callers (tests, evaluation) can inspect it.
  ReconResult cmd_reconstruct() {
    const SamplingPlan plan = load_plan(path("plan.json"));
    const KSpaceSet z = load_kspace(path("kspace.ksp"));
    detail::require(z.plan_ref == plan.id,
                    "reconstruct: k-space was simulated for plan '" +
                        z.plan_ref + "', found '" + plan.id + "'");

    CoilSet init_coils;
    const CoilSet* init = nullptr;
    if (cfg_.coil_init == "ground_truth") {
      init_coils = load_coils("coils.json");
      init = &init_coils;
    }

    const auto t0 = std::chrono::steady_clock::now();
    ReconResult r = run(z, plan, cfg_.solver, cfg_.phantom.spacing, init);
    const auto t1 = std::chrono::steady_clock::now();
    runtime_s_ = std::chrono::duration<double>(t1 - t0).count();

    save_volume(r.x, path("recon.vol"));
    const std::vector<std::string> coil_files =
        save_coils(r.c, "coils_est", "coils_est.json");
    save_trajectory_csv(r.v, path("trajectory_est.csv"));
    detail::write_text(path("diagnostics.csv"), diagnostics_csv(r.history));
    std::string warn_text;
    for (const auto& w : r.warnings) warn_text += w + "\n";
    detail::write_text(path("warnings.txt"), warn_text);

    // Record the solve time now so a later evaluate run (possibly a separate
    // process) can carry it into the full metrics report.
    nlohmann::json mj = std::filesystem::exists(path("metrics.json"))
                            ? detail::read_json_file(path("metrics.json"))
                            : nlohmann::json::object();
    mj["runtime_s"] = runtime_s_;
    detail::write_text(path("metrics.json"), mj.dump(2) + "\n");

    std::vector<std::string> files = {"recon.vol", "coils_est.json",
                                      "trajectory_est.csv", "diagnostics.csv",
                                      "warnings.txt", "metrics.json"};
    files.insert(files.end(), coil_files.begin(), coil_files.end());
    finish(files);
    return r;
  }

  // ---- evaluate --------------------------------------------------------

  MetricsReport cmd_evaluate() {
    const ComplexVolume phantom = load_volume(path("phantom.vol"));
    const ComplexVolume recon = load_volume(path("recon.vol"));
    const KSpaceSet z = load_kspace(path("kspace.ksp"));

    const RealVolume ref_mag = magnitude(phantom);
    RealVolume test_mag = magnitude(recon);
    for (double& v : test_mag.data) v *= z.norm_scale;  // undo normalization

    MetricsReport m;
    const double range = default_data_range(ref_mag);
    m.psnr_db = psnr(ref_mag, test_mag, range);
    m.ssim = ssim3d(ref_mag, test_mag, range);
    m.motion_rmse = motion_rmse(load_trajectory_csv(path("trajectory_est.csv")),
                                load_trajectory_csv(path("trajectory_true.csv")));
    m.runtime_s = runtime_s_;

    nlohmann::json j;
    if (std::filesystem::exists(path("metrics.json")) && m.runtime_s == 0.0) {
      const nlohmann::json prev = detail::read_json_file(path("metrics.json"));
      if (prev.contains("runtime_s"))
        m.runtime_s = prev.at("runtime_s").get<double>();
    }
    j["psnr_db"] = m.psnr_db;
    j["ssim"] = m.ssim;
    j["motion_rmse"] = m.motion_rmse;
    j["runtime_s"] = m.runtime_s;
    if (std::filesystem::exists(path("zero_filled_rss.vol"))) {
      const RealVolume baseline =
          load_real_volume(path("zero_filled_rss.vol"));
      j["baseline_psnr_db"] = psnr(ref_mag, baseline, range);
      j["baseline_ssim"] = ssim3d(ref_mag, baseline, range);
    }
    detail::write_text(path("metrics.json"), j.dump(2) + "\n");
    append_metrics_history(m);
    finish({"metrics.json"});
    return m;
  }

  // ---- export-slices ---------------------------------------------------

  void cmd_export_slices() {
    const ComplexVolume phantom = load_volume(path("phantom.vol"));
    const ComplexVolume recon = load_volume(path("recon.vol"));
    const KSpaceSet z = load_kspace(path("kspace.ksp"));

    const RealVolume ref = magnitude(phantom);
    RealVolume rec = magnitude(recon);
    for (double& v : rec.data) v *= z.norm_scale;
    RealVolume err(ref.shape, ref.spacing);
    for (std::size_t i = 0; i < err.data.size(); ++i)
      err.data[i] = std::abs(ref.data[i] - rec.data[i]);

    nlohmann::json sidecar;
    const auto axial = [&](const RealVolume& v, const std::string& name) {
      write_slice_pgm(v, 0, name, sidecar);
    };
    const auto sagittal = [&](const RealVolume& v, const std::string& name) {
      write_slice_pgm(v, 2, name, sidecar);
    };
    axial(ref, "slice_axial_reference.pgm");
    axial(rec, "slice_axial_recon.pgm");
    axial(err, "slice_axial_error.pgm");
    sagittal(ref, "slice_sagittal_reference.pgm");
    sagittal(rec, "slice_sagittal_recon.pgm");
    sagittal(err, "slice_sagittal_error.pgm");
    detail::write_text(path("slices.json"), sidecar.dump(2) + "\n");

    // Merged trajectory table for external plotting.
    const MotionTrajectory truth =
        load_trajectory_csv(path("trajectory_true.csv"));
    const MotionTrajectory est =
        load_trajectory_csv(path("trajectory_est.csv"));
    detail::require(truth.size() == est.size(),
                    "export-slices: trajectory length mismatch");
    std::string csv =
        "time_index,t_z_mm_true,t_y_mm_true,t_x_mm_true,r_z_deg_true,"
        "r_y_deg_true,r_x_deg_true,t_z_mm_est,t_y_mm_est,t_x_mm_est,"
        "r_z_deg_est,r_y_deg_est,r_x_deg_est\n";
    char buf[64];
    for (std::size_t t = 0; t < truth.size(); ++t) {
      csv += std::to_string(t);
      for (int p = 0; p < 6; ++p) {
        std::snprintf(buf, sizeof(buf), ",%.17g", truth[t][p]);
        csv += buf;
      }
      for (int p = 0; p < 6; ++p) {
        std::snprintf(buf, sizeof(buf), ",%.17g", est[t][p]);
        csv += buf;
      }
      csv += '\n';
    }
    detail::write_text(path("trajectories.csv"), csv);

    finish({"slice_axial_reference.pgm", "slice_axial_recon.pgm",
            "slice_axial_error.pgm", "slice_sagittal_reference.pgm",
            "slice_sagittal_recon.pgm", "slice_sagittal_error.pgm",
            "slices.json", "trajectories.csv"});
  }

 private:
  std::int64_t pe0() const {
    SamplingPlan tmp;
    tmp.grid_shape = cfg_.phantom.shape;
    tmp.readout_axis = cfg_.plan.readout_axis;
    return tmp.pe_n0();
  }
  std::int64_t pe1() const {
    SamplingPlan tmp;
    tmp.grid_shape = cfg_.phantom.shape;
    tmp.readout_axis = cfg_.plan.readout_axis;
    return tmp.pe_n1();
  }

  std::vector<std::string> save_coils(const CoilSet& c,
                                      const std::string& prefix,
                                      const std::string& manifest) {
    std::vector<std::string> files;
    nlohmann::json j;
    j["files"] = nlohmann::json::array();
    for (int k = 0; k < c.num_coils(); ++k) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%02d.vol", prefix.c_str(), k);
      save_volume(c.maps[static_cast<std::size_t>(k)], path(name));
      files.emplace_back(name);
      j["files"].push_back(name);
    }
    detail::write_text(path(manifest), j.dump(2) + "\n");
    return files;
  }

  CoilSet load_coils(const std::string& manifest) const {
    const nlohmann::json j = detail::read_json_file(path(manifest));
    std::vector<ComplexVolume> maps;
    for (const auto& name : j.at("files"))
      maps.push_back(load_volume(path(name.get<std::string>())));
    return CoilSet(std::move(maps));
  }

  // 8-bit PGM of one central slice. axis 0 -> axial (rows y, cols x),
  // axis 2 -> sagittal (rows z, cols y). Min/max windowing per image,
  // recorded in the sidecar.
  void write_slice_pgm(const RealVolume& v, int axis, const std::string& name,
                       nlohmann::json& sidecar) {
    const Shape3 s = v.shape;
    std::int64_t rows, cols;
    const std::int64_t fixed = s[axis] / 2;
    if (axis == 0) {
      rows = s.ny;
      cols = s.nx;
    } else {
      rows = s.nz;
      cols = s.ny;
    }
    std::vector<double> img(static_cast<std::size_t>(rows * cols));
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t c = 0; c < cols; ++c)
        img[static_cast<std::size_t>(r * cols + c)] =
            axis == 0 ? v.at(fixed, r, c) : v.at(r, c, fixed);

    double lo = img[0], hi = img[0];
    for (const double d : img) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    std::string out = "P5\n" + std::to_string(cols) + " " +
                      std::to_string(rows) + "\n255\n";
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    for (const double d : img)
      out.push_back(static_cast<char>(
          static_cast<unsigned char>(std::lround((d - lo) * scale))));
    detail::write_text(path(name), out);
    sidecar[name] = {{"window_min", lo},
                     {"window_max", hi},
                     {"rows", rows},
                     {"cols", cols},
                     {"slice_axis", axis},
                     {"slice_index", fixed}};
  }

  void append_metrics_history(const MetricsReport& m) {
    const std::string hist = path("metrics_history.csv");
    const bool fresh = !std::filesystem::exists(hist);
    std::ofstream f(hist, std::ios::app);
    detail::require(f.good(), "cannot open " + hist);
    if (fresh)
      f << "psnr_db,ssim,rmse_t_z_mm,rmse_t_y_mm,rmse_t_x_mm,rmse_r_z_deg,"
           "rmse_r_y_deg,rmse_r_x_deg,runtime_s\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", m.psnr_db);
    f << buf;
    std::snprintf(buf, sizeof(buf), ",%.17g", m.ssim);
    f << buf;
    for (const double r : m.motion_rmse) {
      std::snprintf(buf, sizeof(buf), ",%.17g", r);
      f << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.17g\n", m.runtime_s);
    f << buf;
  }

  // Refresh checksums for the produced files and rewrite the resolved config.
  void finish(const std::vector<std::string>& files) {
    const std::string ck = path("checksums.json");
    nlohmann::json j = std::filesystem::exists(ck)
                           ? detail::read_json_file(ck)
                           : nlohmann::json::object();
    for (const auto& name : files) j[name] = detail::file_checksum(path(name));
    detail::write_text(ck, j.dump(2) + "\n");
    detail::write_text(path("config.resolved.json"),
                       config_to_json(cfg_).dump(2) + "\n");
  }

  ExperimentConfig cfg_;
  double runtime_s_ = 0.0;
};

}  // namespace mdps
