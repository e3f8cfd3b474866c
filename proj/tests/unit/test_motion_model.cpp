#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "mdps/core/random.hpp"
#include "mdps/motion/gp.hpp"
#include "mdps/motion/state.hpp"
#include "mdps/motion/trajectory_io.hpp"
#include "mdps/motion/warp.hpp"

using namespace mdps;

namespace {

ComplexVolume random_volume(const Shape3& s, std::uint64_t seed,
                            Spacing3 sp = {}) {
  ComplexVolume v(s, sp);
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& z : v.data) z = cd(u(rng), u(rng));
  return v;
}

// A motion state away from interpolation nodes so derivatives are smooth.
MotionState generic_state() {
  MotionState s;
  s.t_z_mm = 0.37;
  s.t_y_mm = -0.81;
  s.t_x_mm = 0.59;
  s.r_z_deg = 3.3;
  s.r_y_deg = -2.1;
  s.r_x_deg = 1.7;
  return s;
}

// Smooth test volume with a zeroed boundary shell. Trilinear interpolation
// is only piecewise smooth: finite differences straddle derivative kinks at
// voxel-boundary crossings and at the support edge, so derivative tests need
// data whose local second differences are small and whose boundary is flat.
ComplexVolume smooth_volume(const Shape3& s, std::uint64_t seed,
                            Spacing3 sp = {}) {
  ComplexVolume v = random_volume(s, seed, sp);
  const double w[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  for (int pass = 0; pass < 2; ++pass)
    for (int axis = 0; axis < 3; ++axis) {
      ComplexVolume out(s, sp);
      const std::int64_t n[3] = {s.nz, s.ny, s.nx};
      for (std::int64_t z = 0; z < s.nz; ++z)
        for (std::int64_t y = 0; y < s.ny; ++y)
          for (std::int64_t x = 0; x < s.nx; ++x) {
            cd acc = 0.0;
            std::int64_t q[3] = {z, y, x};
            for (int k = -2; k <= 2; ++k) {
              std::int64_t c[3] = {z, y, x};
              c[axis] = ((q[axis] + k) % n[axis] + n[axis]) % n[axis];
              acc += w[k + 2] * v.at(c[0], c[1], c[2]);
            }
            out.at(z, y, x) = acc;
          }
      v = out;
    }
  for (std::int64_t z = 0; z < s.nz; ++z)
    for (std::int64_t y = 0; y < s.ny; ++y)
      for (std::int64_t x = 0; x < s.nx; ++x)
        if (z < 2 || y < 2 || x < 2 || z >= s.nz - 2 || y >= s.ny - 2 ||
            x >= s.nx - 2)
          v.at(z, y, x) = 0.0;
  return v;
}

}  // namespace

TEST_CASE("se3_matrix at the identity state is the identity map") {
  const Mat4 m = se3_matrix(MotionState{}, Shape3{5, 6, 7}, Spacing3{});
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      CHECK(m.rot.m[r][c] == (r == c ? 1.0 : 0.0));
  CHECK(m.trans.z == 0.0);
  CHECK(m.trans.y == 0.0);
  CHECK(m.trans.x == 0.0);
}

TEST_CASE("se3_matrix rotations are orthonormal and spacing scales shifts") {
  const MotionState s = generic_state();
  const Mat4 m = se3_matrix(s, Shape3{8, 8, 8}, Spacing3{2.0, 1.0, 0.5});
  // R^T R == I
  const Mat3 rtr = mat_mul(m.rot.transposed(), m.rot);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      CHECK(rtr.m[r][c] == Catch::Approx(r == c ? 1.0 : 0.0).margin(1e-14));
  // Pure translation: millimetres are converted through the voxel spacing.
  MotionState t;
  t.t_z_mm = 3.0;
  t.t_y_mm = 3.0;
  t.t_x_mm = 3.0;
  const Mat4 mt = se3_matrix(t, Shape3{8, 8, 8}, Spacing3{2.0, 1.0, 0.5});
  CHECK(mt.trans.z == Catch::Approx(1.5));
  CHECK(mt.trans.y == Catch::Approx(3.0));
  CHECK(mt.trans.x == Catch::Approx(6.0));
}

TEST_CASE("a positive r_z maps +x toward +y") {
  MotionState s;
  s.r_z_deg = 90.0;
  const Mat4 m = se3_matrix(s, Shape3{1, 1, 1}, Spacing3{});
  // centre is the origin for a 1^3 grid, so apply is the bare rotation
  const Vec3 out = m.rot.apply({0.0, 0.0, 1.0});  // +x unit vector
  CHECK(out.x == Catch::Approx(0.0).margin(1e-14));
  CHECK(out.y == Catch::Approx(1.0).margin(1e-14));
  CHECK(out.z == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("warp at the identity state returns the input exactly") {
  const ComplexVolume x = random_volume(Shape3{6, 5, 7}, 31);
  const ComplexVolume w = warp(x, MotionState{});
  CHECK(w.data == x.data);
}

TEST_CASE("integer translations shift the sampling grid exactly") {
  const Shape3 s{6, 6, 6};
  const ComplexVolume x = random_volume(s, 37);
  MotionState st;
  st.t_x_mm = 2.0;  // two voxels at unit spacing
  const ComplexVolume w = warp(x, st);
  for (std::int64_t z = 0; z < s.nz; ++z)
    for (std::int64_t y = 0; y < s.ny; ++y)
      for (std::int64_t xx = 0; xx < s.nx; ++xx) {
        const cd expect = xx >= 2 ? x.at(z, y, xx - 2) : cd{};
        CHECK(std::abs(w.at(z, y, xx) - expect) < 1e-14);
      }
}

TEST_CASE("warp is linear in the image argument") {
  const Shape3 s{5, 6, 4};
  const ComplexVolume a = random_volume(s, 41);
  const ComplexVolume b = random_volume(s, 43);
  const MotionState st = generic_state();
  ComplexVolume combo(s);
  for (std::int64_t i = 0; i < s.size(); ++i)
    combo[i] = 2.0 * a[i] + cd(0.0, 1.0) * b[i];
  const ComplexVolume w = warp(combo, st);
  const ComplexVolume wa = warp(a, st);
  const ComplexVolume wb = warp(b, st);
  double m = 0.0;
  for (std::int64_t i = 0; i < s.size(); ++i)
    m = std::max(m, std::abs(w[i] - (2.0 * wa[i] + cd(0.0, 1.0) * wb[i])));
  CHECK(m < 1e-13);
}

TEST_CASE("warp_adjoint satisfies the real-inner-product adjoint identity") {
  const Shape3 s{6, 5, 7};
  const Spacing3 sp{1.5, 1.0, 0.8};
  const ComplexVolume x = random_volume(s, 47, sp);
  const ComplexVolume u = random_volume(s, 53, sp);
  for (const MotionState st : {MotionState{}, generic_state()}) {
    const ComplexVolume wx = warp(x, st);
    const ComplexVolume wtu = warp_adjoint(u, st);
    CHECK(real_dot(wx.data, u.data) ==
          Catch::Approx(real_dot(x.data, wtu.data)).epsilon(1e-11));
  }
}

TEST_CASE("warp_jvp matches central finite differences in the motion") {
  const Shape3 s{8, 8, 8};
  const Spacing3 sp{1.2, 1.0, 0.9};
  const ComplexVolume x = smooth_volume(s, 59, sp);
  const MotionState st = generic_state();
  const ComplexVolume zero_dx(s, sp);
  const double eps = 1e-4;
  for (int p = 0; p < 6; ++p) {
    std::array<double, 6> ds{};
    ds[p] = 1.0;
    const ComplexVolume jvp = warp_jvp(x, st, zero_dx, ds);
    MotionState up = st, dn = st;
    up.param(p) += eps;
    dn.param(p) -= eps;
    const ComplexVolume wu = warp(x, up);
    const ComplexVolume wd = warp(x, dn);
    double err = 0.0, ref = 0.0;
    for (std::int64_t i = 0; i < s.size(); ++i) {
      const cd fd = (wu[i] - wd[i]) / (2.0 * eps);
      err += std::norm(jvp[i] - fd);
      ref += std::norm(fd);
    }
    CHECK(std::sqrt(err) <= 1e-3 * std::sqrt(ref));
  }
}

TEST_CASE("warp_jvp is exact for a mid-cell translation") {
  // With a pure translation of exactly half a voxel on each axis, every
  // sample sits at a cell centre: the interpolant is linear within +-eps of
  // the evaluation point, so the central difference equals the derivative
  // up to rounding.
  const Shape3 s{8, 8, 8};
  const Spacing3 sp{1.0, 2.0, 0.5};
  const ComplexVolume x = random_volume(s, 101, sp);
  MotionState st;
  st.t_z_mm = 0.5 * sp.sz;
  st.t_y_mm = 0.5 * sp.sy;
  st.t_x_mm = 0.5 * sp.sx;
  const ComplexVolume zero_dx(s, sp);
  const double eps = 1e-5;
  for (int p = 0; p < 3; ++p) {
    std::array<double, 6> ds{};
    ds[p] = 1.0;
    const ComplexVolume jvp = warp_jvp(x, st, zero_dx, ds);
    MotionState up = st, dn = st;
    up.param(p) += eps;
    dn.param(p) -= eps;
    const ComplexVolume wu = warp(x, up);
    const ComplexVolume wd = warp(x, dn);
    double m = 0.0;
    for (std::int64_t i = 0; i < s.size(); ++i)
      m = std::max(m, std::abs(jvp[i] - (wu[i] - wd[i]) / (2.0 * eps)));
    CHECK(m < 1e-8);
  }
}

TEST_CASE("warp_vjp is the exact transpose of warp_jvp") {
  const Shape3 s{5, 6, 7};
  const Spacing3 sp{1.0, 1.3, 0.7};
  const ComplexVolume x = random_volume(s, 61, sp);
  const ComplexVolume dx = random_volume(s, 67, sp);
  const ComplexVolume u = random_volume(s, 71, sp);
  const MotionState st = generic_state();
  std::array<double, 6> ds{0.13, -0.21, 0.08, 0.17, -0.05, 0.11};

  const ComplexVolume jvp = warp_jvp(x, st, dx, ds);
  const WarpVjp vjp = warp_vjp(x, st, u);

  double rhs = real_dot(dx.data, vjp.grad_x.data);
  for (int p = 0; p < 6; ++p) rhs += ds[p] * vjp.grad_s[p];
  CHECK(real_dot(jvp.data, u.data) == Catch::Approx(rhs).epsilon(1e-11));
}

TEST_CASE("severity levels give the documented motion bounds") {
  CHECK(severity_bounds(Severity::mild).translation_mm == 3.0);
  CHECK(severity_bounds(Severity::mild).rotation_deg == 5.0);
  CHECK(severity_bounds(Severity::moderate).translation_mm == 6.0);
  CHECK(severity_bounds(Severity::moderate).rotation_deg == 10.0);
  CHECK(severity_bounds(Severity::severe).translation_mm == 9.0);
  CHECK(severity_bounds(Severity::severe).rotation_deg == 15.0);
}

TEST_CASE("gp trajectories start at zero and hit their bounds exactly") {
  TrajectoryConfig cfg;
  cfg.num_states = 24;
  cfg.translation_bound_mm = 2.5;
  cfg.rotation_bound_deg = 4.0;
  cfg.seed = 99;
  const MotionTrajectory v = simulate_gp_trajectory(cfg);
  REQUIRE(v.size() == 24);
  for (int p = 0; p < 6; ++p) CHECK(v[0][p] == 0.0);
  for (int p = 0; p < 6; ++p) {
    double max_abs = 0.0;
    for (const auto& st : v) max_abs = std::max(max_abs, std::abs(st[p]));
    CHECK(max_abs == (p < 3 ? 2.5 : 4.0));  // bound attained bit-exactly
  }
}

TEST_CASE("gp trajectories are deterministic in the seed") {
  TrajectoryConfig cfg;
  cfg.num_states = 16;
  cfg.translation_bound_mm = 1.0;
  cfg.rotation_bound_deg = 2.0;
  cfg.seed = 5;
  const MotionTrajectory a = simulate_gp_trajectory(cfg);
  const MotionTrajectory b = simulate_gp_trajectory(cfg);
  CHECK(a == b);
  cfg.seed = 6;
  const MotionTrajectory c = simulate_gp_trajectory(cfg);
  CHECK(a != c);
}

TEST_CASE("gp trajectories are smooth relative to white noise") {
  TrajectoryConfig cfg;
  cfg.num_states = 64;
  cfg.translation_bound_mm = 1.0;
  cfg.rotation_bound_deg = 1.0;
  cfg.seed = 17;
  const MotionTrajectory v = simulate_gp_trajectory(cfg);
  // RBF samples with length scale T/10 = 6.4: neighbouring states move by a
  // small fraction of the amplitude bound.
  for (std::size_t t = 1; t < v.size(); ++t)
    for (int p = 0; p < 6; ++p)
      CHECK(std::abs(v[t][p] - v[t - 1][p]) < 0.5);
}

TEST_CASE("randomized amplitudes stay within half to full bound") {
  TrajectoryConfig cfg;
  cfg.num_states = 32;
  cfg.translation_bound_mm = 2.0;
  cfg.rotation_bound_deg = 3.0;
  cfg.seed = 23;
  cfg.randomize_amplitude = true;
  const MotionTrajectory v = simulate_gp_trajectory(cfg);
  for (int p = 0; p < 6; ++p) {
    double max_abs = 0.0;
    for (const auto& st : v) max_abs = std::max(max_abs, std::abs(st[p]));
    const double bound = p < 3 ? 2.0 : 3.0;
    CHECK(max_abs >= 0.5 * bound);
    CHECK(max_abs <= bound);
  }
}

TEST_CASE("second differences vanish on affine trajectories") {
  MotionTrajectory v(10);
  for (std::size_t t = 0; t < v.size(); ++t)
    for (int p = 0; p < 6; ++p)
      v[t].param(p) = 0.3 * double(t) * (p + 1) - 0.7;
  const auto d = second_difference(v);
  REQUIRE(d.size() == 8);
  for (const auto& row : d)
    for (int p = 0; p < 6; ++p) CHECK(std::abs(row[p]) < 1e-13);
}

TEST_CASE("second differences match the direct stencil") {
  MotionTrajectory v(7);
  auto rng = make_rng(31);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (auto& st : v)
    for (int p = 0; p < 6; ++p) st.param(p) = u(rng);
  const auto d = second_difference(v);
  REQUIRE(d.size() == 5);
  for (std::size_t t = 1; t + 1 < v.size(); ++t)
    for (int p = 0; p < 6; ++p)
      CHECK(d[t - 1][p] ==
            Catch::Approx(v[t + 1][p] - 2.0 * v[t][p] + v[t - 1][p])
                .margin(1e-14));
}

TEST_CASE("trajectory CSV round-trips at full precision") {
  TrajectoryConfig cfg;
  cfg.num_states = 9;
  cfg.translation_bound_mm = 1.7;
  cfg.rotation_bound_deg = 2.9;
  cfg.seed = 77;
  const MotionTrajectory v = simulate_gp_trajectory(cfg);
  const std::string p =
      (std::filesystem::temp_directory_path() / "mdps_traj.csv").string();
  save_trajectory_csv(v, p);
  const MotionTrajectory w = load_trajectory_csv(p);
  CHECK(v == w);  // %.17g preserves doubles exactly
  std::filesystem::remove(p);
}

TEST_CASE("trajectory CSV loader rejects malformed input") {
  namespace fs = std::filesystem;
  const std::string p = (fs::temp_directory_path() / "mdps_bad.csv").string();
  auto write = [&](const std::string& text) {
    std::ofstream f(p);
    f << text;
  };
  write("wrong,header\n0,0,0,0,0,0,0\n");
  CHECK_THROWS(load_trajectory_csv(p));
  write(std::string(kTrajectoryCsvHeader) + "\n");
  CHECK_THROWS(load_trajectory_csv(p));  // no rows
  write(std::string(kTrajectoryCsvHeader) + "\n5,0,0,0,0,0,0\n");
  CHECK_THROWS(load_trajectory_csv(p));  // non-contiguous index
  write(std::string(kTrajectoryCsvHeader) + "\n0,0,0,0,0,0\n");
  CHECK_THROWS(load_trajectory_csv(p));  // short row
  fs::remove(p);
}
