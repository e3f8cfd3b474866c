#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <random>
#include <set>

#include "mdps/acquisition/forward.hpp"
#include "mdps/acquisition/normalize.hpp"
#include "mdps/core/random.hpp"
#include "mdps/motion/gp.hpp"
#include "mdps/transforms/fft.hpp"

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

CoilSet random_coils(const Shape3& s, int n, std::uint64_t seed,
                     Spacing3 sp = {}) {
  std::vector<ComplexVolume> maps;
  for (int j = 0; j < n; ++j)
    maps.push_back(random_volume(s, seed + std::uint64_t(j) * 1000, sp));
  return CoilSet(std::move(maps));
}

MotionTrajectory random_trajectory(int T, std::uint64_t seed, double tb = 1.2,
                                   double rb = 2.0) {
  TrajectoryConfig cfg;
  cfg.num_states = T;
  cfg.translation_bound_mm = tb;
  cfg.rotation_bound_deg = rb;
  cfg.seed = seed;
  return simulate_gp_trajectory(cfg);
}

// Smooth volume with a zeroed boundary shell, for derivative tests that
// differentiate through the trilinear warp (finite differences straddle the
// interpolant's kinks at voxel boundaries unless the data is smooth there).
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

SamplingPlan small_plan(const Shape3& s, int shots, int states_per_shot = 1,
                        double accel = 1.5, std::uint64_t seed = 21) {
  SamplingPlan tmp;
  tmp.grid_shape = s;
  tmp.readout_axis = 0;
  auto mask = make_cartesian_mask(tmp.pe_n0(), tmp.pe_n1(), accel, 0.1, seed);
  return make_sampling_plan(s, 0, std::move(mask), "interleaved_center_first",
                            shots, states_per_shot, seed);
}

KBlocks random_blocks(const SamplingPlan& plan, int coils,
                      std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  KBlocks y(static_cast<std::size_t>(plan.num_states()));
  for (int t = 0; t < plan.num_states(); ++t) {
    y[static_cast<std::size_t>(t)].resize(
        static_cast<std::size_t>(plan.samples_in_state(t) * coils));
    for (auto& s : y[static_cast<std::size_t>(t)]) s = cd(u(rng), u(rng));
  }
  return y;
}

double block_dot(const KBlocks& a, const KBlocks& b) {
  double acc = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) acc += real_dot(a[t], b[t]);
  return acc;
}

}  // namespace

// ---- masks and plans ------------------------------------------------------

TEST_CASE("cartesian mask keeps the ACL block and hits the line budget") {
  const std::int64_t n0 = 24, n1 = 20;
  const double accel = 4.0, acl = 0.04;
  const auto mask = make_cartesian_mask(n0, n1, accel, acl, 7);
  std::int64_t on = 0;
  for (auto m : mask) on += m;
  CHECK(on == std::llround(double(n0 * n1) / accel));

  // the ACL rectangle (ceil(n*sqrt(f)) per axis, centered) is fully sampled
  const auto e0 = static_cast<std::int64_t>(std::ceil(std::sqrt(acl) * n0));
  const auto e1 = static_cast<std::int64_t>(std::ceil(std::sqrt(acl) * n1));
  const std::int64_t s0 = (n0 - e0) / 2, s1 = (n1 - e1) / 2;
  for (std::int64_t p0 = s0; p0 < s0 + e0; ++p0)
    for (std::int64_t p1 = s1; p1 < s1 + e1; ++p1)
      CHECK(mask[static_cast<std::size_t>(p0 * n1 + p1)] == 1);

  CHECK(mask == make_cartesian_mask(n0, n1, accel, acl, 7));
  CHECK(mask != make_cartesian_mask(n0, n1, accel, acl, 8));
}

TEST_CASE("poisson mask separates samples and lands near the target count") {
  // Dart throwing on an integer lattice jams at discrete counts (one per
  // lattice-distance threshold), so the +-2% window only closes when the
  // target sits near a jammed plateau; elsewhere the documented density
  // error fires. At 64x64 / seed 11 the plateau for separations >= 2 holds
  // 927 lines, so accel 4.4 (target ~931) is comfortably reachable.
  const std::int64_t n0 = 64, n1 = 64;
  const double accel = 4.4;
  const auto pm = make_poisson_mask(n0, n1, accel, 0.04, 11);
  std::int64_t on = 0;
  for (auto m : pm.mask) on += m;
  const double target = double(n0 * n1) / accel;
  CHECK(std::abs(double(on) - target) <= 0.02 * target + 1.0);
  CHECK(pm.radius > 0.0);

  // non-ACL accepted samples respect the returned separation radius
  const auto e0 = static_cast<std::int64_t>(std::ceil(std::sqrt(0.04) * n0));
  const auto e1 = static_cast<std::int64_t>(std::ceil(std::sqrt(0.04) * n1));
  const std::int64_t s0 = (n0 - e0) / 2, s1 = (n1 - e1) / 2;
  auto in_acl = [&](std::int64_t p0, std::int64_t p1) {
    return p0 >= s0 && p0 < s0 + e0 && p1 >= s1 && p1 < s1 + e1;
  };
  std::vector<std::pair<std::int64_t, std::int64_t>> pts;
  for (std::int64_t p0 = 0; p0 < n0; ++p0)
    for (std::int64_t p1 = 0; p1 < n1; ++p1)
      if (pm.mask[static_cast<std::size_t>(p0 * n1 + p1)] && !in_acl(p0, p1))
        pts.emplace_back(p0, p1);
  double min_d2 = 1e18;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double d0 = double(pts[i].first - pts[j].first);
      const double d1 = double(pts[i].second - pts[j].second);
      min_d2 = std::min(min_d2, d0 * d0 + d1 * d1);
    }
  CHECK(std::sqrt(min_d2) >= pm.radius - 1e-12);

  // a target that falls in the gap between jammed plateaus is reported as a
  // density error rather than silently missing the budget
  CHECK_THROWS_WITH(make_poisson_mask(n0, n1, 4.0, 0.04, 11),
                    Catch::Matchers::ContainsSubstring("density"));
}

TEST_CASE("order_and_partition covers every line exactly once") {
  const std::int64_t n0 = 16, n1 = 16;
  const auto mask = make_cartesian_mask(n0, n1, 2.0, 0.05, 3);
  for (const std::string scheme :
       {"linear_circular", "centric", "interleaved_center_first", "random"}) {
    const auto groups = order_and_partition(mask, n0, n1, scheme, 4, 2, 9);
    CHECK(groups.size() == 8);
    std::set<std::int32_t> seen;
    std::int64_t total = 0;
    for (const auto& g : groups) {
      CHECK(!g.empty());
      for (auto line : g) {
        CHECK(mask[static_cast<std::size_t>(line)] == 1);
        seen.insert(line);
        ++total;
      }
    }
    std::int64_t on = 0;
    for (auto m : mask) on += m;
    CHECK(total == on);
    CHECK(static_cast<std::int64_t>(seen.size()) == on);
    // balanced to within one line at the shot level
    std::int64_t mn = 1 << 30, mx = 0;
    for (int s = 0; s < 4; ++s) {
      std::int64_t sz = 0;
      for (int p = 0; p < 2; ++p)
        sz += static_cast<std::int64_t>(groups[std::size_t(s * 2 + p)].size());
      mn = std::min(mn, sz);
      mx = std::max(mx, sz);
    }
    CHECK(mx - mn <= 1);
  }
}

TEST_CASE("ordering schemes start at the k-space centre") {
  const std::int64_t n0 = 15, n1 = 17;
  std::vector<std::uint8_t> full(static_cast<std::size_t>(n0 * n1), 1);
  const std::int64_t centre = (n0 / 2) * n1 + (n1 / 2);
  for (const std::string scheme :
       {"linear_circular", "centric", "interleaved_center_first", "random"}) {
    const auto groups = order_and_partition(full, n0, n1, scheme, 3, 1, 5);
    CHECK(groups[0][0] == static_cast<std::int32_t>(centre));
  }
}

TEST_CASE("sampling plan validates and reports consistent geometry") {
  const SamplingPlan p = small_plan(Shape3{6, 8, 10}, 4);
  CHECK(p.num_states() == 4);
  CHECK(p.readout_n() == 6);
  CHECK(p.pe_n0() == 8);
  CHECK(p.pe_n1() == 10);
  CHECK_NOTHROW(p.validate());

  std::int64_t samples = 0;
  for (int t = 0; t < p.num_states(); ++t) {
    const auto idx = p.state_grid_indices(t);
    CHECK(static_cast<std::int64_t>(idx.size()) == p.samples_in_state(t));
    samples += static_cast<std::int64_t>(idx.size());
    for (auto i : idx) {
      CHECK(i >= 0);
      CHECK(i < p.grid_shape.size());
    }
  }
  CHECK(samples == p.lines_on() * p.readout_n());
}

TEST_CASE("plan JSON round-trips including the RLE mask") {
  const SamplingPlan p = small_plan(Shape3{4, 12, 10}, 3, 2);
  const std::string path =
      (std::filesystem::temp_directory_path() / "mdps_plan.json").string();
  save_plan(p, path);
  const SamplingPlan q = load_plan(path);
  CHECK(q.grid_shape == p.grid_shape);
  CHECK(q.readout_axis == p.readout_axis);
  CHECK(q.mask == p.mask);
  CHECK(q.groups == p.groups);
  CHECK(q.scheme == p.scheme);
  CHECK(q.shots == p.shots);
  CHECK(q.states_per_shot == p.states_per_shot);
  CHECK(q.seed == p.seed);
  CHECK(q.id == p.id);
  std::filesystem::remove(path);
}

// ---- forward model ---------------------------------------------------------

TEST_CASE("forward_at_t gathers the masked DFT of the warped coil images") {
  const Shape3 s{4, 6, 5};
  const ComplexVolume x = random_volume(s, 71);
  const CoilSet c = random_coils(s, 3, 73);
  const SamplingPlan plan = small_plan(s, 3);
  const MotionTrajectory v = random_trajectory(3, 75);

  for (int t = 0; t < plan.num_states(); ++t) {
    const auto block = forward_at_t(x, c, v[std::size_t(t)], plan, t);
    const auto idx = plan.state_grid_indices(t);
    const ComplexVolume w = warp(x, v[std::size_t(t)]);
    std::size_t cursor = 0;
    for (int j = 0; j < c.num_coils(); ++j) {
      ComplexVolume cj(s);
      for (std::int64_t i = 0; i < s.size(); ++i)
        cj[i] = c.maps[std::size_t(j)][i] * w[i];
      const ComplexVolume k = fft3(cj);
      for (const auto i : idx) {
        CHECK(std::abs(block[cursor] - k[i]) < 1e-12);
        ++cursor;
      }
    }
    CHECK(cursor == block.size());
  }
}

TEST_CASE("forward and adjoint satisfy the dot-product identity") {
  const Shape3 s{6, 6, 6};
  const Spacing3 sp{1.0, 1.2, 0.8};
  const ComplexVolume x = random_volume(s, 81, sp);
  const CoilSet c = random_coils(s, 3, 83, sp);
  // accel 1.0: the central 3x3 block (9 lines) must fit one shot's budget
  const SamplingPlan plan = small_plan(s, 4, 1, 1.0);
  const MotionTrajectory v = random_trajectory(4, 85);
  const KBlocks y = random_blocks(plan, 3, 87);

  const KBlocks ax = forward_full(x, c, v, plan);
  const ComplexVolume aty = adjoint_full(y, c, v, plan);
  CHECK(block_dot(ax, y) ==
        Catch::Approx(real_dot(x.data, aty.data)).epsilon(1e-11));
}

TEST_CASE("adjoint_full honours the active-state mask") {
  const Shape3 s{4, 6, 6};
  const CoilSet c = random_coils(s, 2, 91);
  const SamplingPlan plan = small_plan(s, 4, 1, 1.0);
  const MotionTrajectory v = random_trajectory(4, 93);
  const KBlocks y = random_blocks(plan, 2, 95);

  ActiveMask keep_two(4, 0);
  keep_two[1] = keep_two[3] = 1;
  const ComplexVolume masked = adjoint_full(y, c, v, plan, keep_two);

  KBlocks zeroed = y;
  zeroed[0].assign(zeroed[0].size(), cd{});
  zeroed[2].assign(zeroed[2].size(), cd{});
  const ComplexVolume manual = adjoint_full(zeroed, c, v, plan);
  double m = 0.0;
  for (std::int64_t i = 0; i < s.size(); ++i)
    m = std::max(m, std::abs(masked[i] - manual[i]));
  CHECK(m < 1e-14);
}

TEST_CASE("data_fidelity is half the sigma-scaled squared residual norm") {
  const Shape3 s{4, 6, 5};
  const ComplexVolume x = random_volume(s, 103);
  const CoilSet c = random_coils(s, 2, 105);
  const SamplingPlan plan = small_plan(s, 3);
  const MotionTrajectory vt = random_trajectory(3, 107);
  KSpaceSet z = simulate_kspace(x, c, vt, plan, {0.05, 4});

  const ComplexVolume x2 = random_volume(s, 109);
  const double sigma = 0.7;
  const KBlocks ax = forward_full(x2, c, vt, plan);
  double acc = 0.0;
  for (int t = 0; t < plan.num_states(); ++t)
    for (std::size_t k = 0; k < ax[std::size_t(t)].size(); ++k)
      acc += std::norm(ax[std::size_t(t)][k] - z.data[std::size_t(t)][k]);
  const double expect = acc / (2.0 * sigma * sigma);
  CHECK(data_fidelity(x2, c, vt, z, plan, sigma) ==
        Catch::Approx(expect).epsilon(1e-12));

  // masking keeps only the selected states' contributions
  ActiveMask only1(3, 0);
  only1[1] = 1;
  double acc1 = 0.0;
  for (std::size_t k = 0; k < ax[1].size(); ++k)
    acc1 += std::norm(ax[1][k] - z.data[1][k]);
  CHECK(data_fidelity(x2, c, vt, z, plan, sigma, only1) ==
        Catch::Approx(acc1 / (2.0 * sigma * sigma)).epsilon(1e-12));
}

TEST_CASE("image gradient matches central finite differences") {
  const Shape3 s{4, 5, 4};
  const ComplexVolume x = random_volume(s, 113);
  const CoilSet c = random_coils(s, 2, 115);
  const SamplingPlan plan = small_plan(s, 2);
  const MotionTrajectory vt = random_trajectory(2, 117);
  const KSpaceSet z = simulate_kspace(x, c, vt, plan, {0.1, 5});
  const ComplexVolume x0 = random_volume(s, 119);
  const double sigma = 1.3;

  const ComplexVolume g = grad_data_fidelity_x(x0, c, vt, z, plan, sigma);
  const double eps = 1e-5;
  auto rng = make_rng(121);
  std::uniform_int_distribution<std::int64_t> pick(0, s.size() - 1);
  for (int trial = 0; trial < 12; ++trial) {
    const std::int64_t i = pick(rng);
    ComplexVolume xp = x0, xm = x0;
    xp[i] += eps;
    xm[i] -= eps;
    const double d_re = (data_fidelity(xp, c, vt, z, plan, sigma) -
                         data_fidelity(xm, c, vt, z, plan, sigma)) /
                        (2.0 * eps);
    xp = x0;
    xm = x0;
    xp[i] += cd(0.0, eps);
    xm[i] -= cd(0.0, eps);
    const double d_im = (data_fidelity(xp, c, vt, z, plan, sigma) -
                         data_fidelity(xm, c, vt, z, plan, sigma)) /
                        (2.0 * eps);
    CHECK(std::abs(g[i].real() - d_re) < 1e-6);
    CHECK(std::abs(g[i].imag() - d_im) < 1e-6);
  }
}

TEST_CASE("coil gradient matches central finite differences") {
  const Shape3 s{4, 5, 4};
  const ComplexVolume x = random_volume(s, 131);
  const CoilSet c = random_coils(s, 2, 133);
  const SamplingPlan plan = small_plan(s, 2);
  const MotionTrajectory vt = random_trajectory(2, 137);
  const KSpaceSet z = simulate_kspace(x, c, vt, plan, {0.1, 6});
  const double sigma = 0.9;

  const auto g = grad_data_fidelity_c(x, c, vt, z, plan, sigma);
  REQUIRE(g.size() == 2);
  const double eps = 1e-5;
  auto rng = make_rng(139);
  std::uniform_int_distribution<std::int64_t> pick(0, s.size() - 1);
  std::uniform_int_distribution<int> pick_coil(0, 1);
  for (int trial = 0; trial < 10; ++trial) {
    const std::int64_t i = pick(rng);
    const int j = pick_coil(rng);
    CoilSet cp = c, cm = c;
    cp.maps[std::size_t(j)][i] += eps;
    cm.maps[std::size_t(j)][i] -= eps;
    const double d_re = (data_fidelity(x, cp, vt, z, plan, sigma) -
                         data_fidelity(x, cm, vt, z, plan, sigma)) /
                        (2.0 * eps);
    cp = c;
    cm = c;
    cp.maps[std::size_t(j)][i] += cd(0.0, eps);
    cm.maps[std::size_t(j)][i] -= cd(0.0, eps);
    const double d_im = (data_fidelity(x, cp, vt, z, plan, sigma) -
                         data_fidelity(x, cm, vt, z, plan, sigma)) /
                        (2.0 * eps);
    CHECK(std::abs(g[std::size_t(j)][i].real() - d_re) < 1e-6);
    CHECK(std::abs(g[std::size_t(j)][i].imag() - d_im) < 1e-6);
  }
}

TEST_CASE("motion gradient matches central finite differences") {
  const Shape3 s{8, 8, 8};
  const Spacing3 sp{1.1, 1.0, 0.9};
  const ComplexVolume x = smooth_volume(s, 141, sp);
  const CoilSet c = random_coils(s, 2, 143, sp);
  const SamplingPlan plan = small_plan(s, 3, 1, 1.0);
  const MotionTrajectory vt = random_trajectory(3, 145);
  const KSpaceSet z = simulate_kspace(x, c, vt, plan, {0.1, 7});
  MotionTrajectory v0 = random_trajectory(3, 147, 0.9, 1.5);
  const double sigma = 1.1;

  const auto g = grad_data_fidelity_v(x, c, v0, z, plan, sigma);
  REQUIRE(g.size() == 3);
  const double eps = 1e-4;
  for (int t = 0; t < 3; ++t)
    for (int p = 0; p < 6; ++p) {
      MotionTrajectory vp = v0, vm = v0;
      vp[std::size_t(t)].param(p) += eps;
      vm[std::size_t(t)].param(p) -= eps;
      const double fd = (data_fidelity(x, c, vp, z, plan, sigma) -
                         data_fidelity(x, c, vm, z, plan, sigma)) /
                        (2.0 * eps);
      CHECK(g[std::size_t(t)][p] ==
            Catch::Approx(fd).epsilon(1e-3).margin(1e-6));
    }
}

TEST_CASE("residual-based gradients agree with the convenience wrappers") {
  const Shape3 s{4, 5, 6};
  const ComplexVolume x = random_volume(s, 151);
  const CoilSet c = random_coils(s, 2, 153);
  const SamplingPlan plan = small_plan(s, 2);
  const MotionTrajectory vt = random_trajectory(2, 155);
  const KSpaceSet z = simulate_kspace(x, c, vt, plan, {0.2, 8});
  const KBlocks r = compute_residuals(x, c, vt, plan, z);

  const ComplexVolume g1 = grad_x_from_residuals(r, c, vt, plan, 1.0);
  const ComplexVolume g2 = grad_data_fidelity_x(x, c, vt, z, plan, 1.0);
  for (std::int64_t i = 0; i < s.size(); ++i)
    CHECK(std::abs(g1[i] - g2[i]) < 1e-14);

  CHECK(fidelity_from_residuals(r, {}, 1.0) ==
        Catch::Approx(data_fidelity(x, c, vt, z, plan, 1.0)).epsilon(1e-14));
}

// ---- noise and k-space I/O --------------------------------------------------

TEST_CASE("simulated noise realizes the requested SNR") {
  const Shape3 s{6, 8, 8};
  const ComplexVolume x = random_volume(s, 161);
  const CoilSet c = random_coils(s, 3, 163);
  const SamplingPlan plan = small_plan(s, 4);
  const MotionTrajectory vt = random_trajectory(4, 165);
  const KBlocks clean = forward_full(x, c, vt, plan);

  const double sigma = sigma_for_snr_db(clean, 20.0);
  KSpaceSet z;
  z.num_coils = c.num_coils();
  z.data = clean;
  add_measurement_noise(z, sigma, 99);
  CHECK(z.noise_sigma == sigma);

  double signal = 0.0, noise = 0.0;
  std::int64_t n = 0;
  for (std::size_t t = 0; t < clean.size(); ++t)
    for (std::size_t k = 0; k < clean[t].size(); ++k) {
      signal += std::norm(clean[t][k]);
      noise += std::norm(z.data[t][k] - clean[t][k]);
      n += 1;
    }
  const double achieved_db =
      10.0 * std::log10(signal / double(n) / (noise / double(n)));
  CHECK(achieved_db == Catch::Approx(20.0).margin(0.35));

  // zero sigma leaves the data untouched; same seed reproduces the noise
  KSpaceSet z0;
  z0.num_coils = c.num_coils();
  z0.data = clean;
  add_measurement_noise(z0, 0.0, 99);
  CHECK(z0.data == clean);
  KSpaceSet z2;
  z2.num_coils = c.num_coils();
  z2.data = clean;
  add_measurement_noise(z2, sigma, 99);
  CHECK(z2.data == z.data);
}

TEST_CASE("k-space container round-trips exactly") {
  const Shape3 s{4, 6, 6};
  const ComplexVolume x = random_volume(s, 171);
  const CoilSet c = random_coils(s, 2, 173);
  const SamplingPlan plan = small_plan(s, 3);
  const MotionTrajectory vt = random_trajectory(3, 175);
  KSpaceSet z = simulate_kspace(x, c, vt, plan, {0.3, 9});
  z.norm_scale = 2.75;
  // store float32-representable samples so the round trip is bit-exact
  for (auto& block : z.data)
    for (auto& v : block)
      v = cd(double(float(v.real())), double(float(v.imag())));

  const std::string p =
      (std::filesystem::temp_directory_path() / "mdps_ksp.ksp").string();
  save_kspace(z, p);
  const KSpaceSet w = load_kspace(p);
  CHECK(w.num_coils == z.num_coils);
  CHECK(w.plan_ref == z.plan_ref);
  CHECK(w.noise_sigma == z.noise_sigma);
  CHECK(w.norm_scale == z.norm_scale);
  CHECK(w.data == z.data);
  std::filesystem::remove(p);
}

// ---- zero-filled baseline and normalization ---------------------------------

TEST_CASE("zero-filled recon of fully sampled static data is exact") {
  const Shape3 s{6, 6, 6};
  const ComplexVolume x = random_volume(s, 181);
  const CoilSet c = random_coils(s, 3, 183);
  std::vector<std::uint8_t> full(36, 1);
  const SamplingPlan plan =
      make_sampling_plan(s, 0, std::move(full), "centric", 1, 1, 0);
  const MotionTrajectory vt(1);  // identity
  const KSpaceSet z = simulate_kspace(x, c, vt, plan, {});

  const CoilSet imgs = zero_filled_coil_images(z, plan);
  for (int j = 0; j < 3; ++j) {
    double m = 0.0;
    for (std::int64_t i = 0; i < s.size(); ++i)
      m = std::max(m, std::abs(imgs.maps[std::size_t(j)][i] -
                               c.maps[std::size_t(j)][i] * x[i]));
    CHECK(m < 1e-11);
  }
}

TEST_CASE("percentile normalization rescales data and records the factor") {
  const Shape3 s{6, 8, 8};
  const ComplexVolume x = random_volume(s, 191);
  const CoilSet c = random_coils(s, 2, 193);
  const SamplingPlan plan = small_plan(s, 3);
  const MotionTrajectory vt = random_trajectory(3, 195);
  KSpaceSet z = simulate_kspace(x, c, vt, plan, {0.05, 10});
  z.noise_sigma = 0.05;

  const auto [zn, scale] = percentile_normalize(z, plan);
  CHECK(scale > 0.0);
  CHECK(zn.norm_scale == Catch::Approx(z.norm_scale * scale));
  CHECK(zn.noise_sigma == Catch::Approx(z.noise_sigma / scale));
  for (std::size_t t = 0; t < z.data.size(); ++t)
    for (std::size_t k = 0; k < z.data[t].size(); ++k)
      CHECK(std::abs(zn.data[t][k] - z.data[t][k] / scale) < 1e-14);

  // after normalization the 99th percentile of the zero-filled RSS is one
  const RealVolume rss = zero_filled_rss(zn, plan);
  CHECK(percentile(rss, 99.0) == Catch::Approx(1.0).epsilon(1e-10));

  // normalizing twice is idempotent up to round-off
  const auto [zn2, scale2] = percentile_normalize(zn, plan);
  CHECK(scale2 == Catch::Approx(1.0).epsilon(1e-10));
  (void)zn2;
}
