#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "mdps/core/random.hpp"
#include "mdps/core/volume.hpp"
#include "mdps/priors/coil.hpp"

// Synthetic ground truth: piecewise-constant ellipsoid phantoms with a
// smooth polynomial phase, and smooth complex coil sensitivity maps.

namespace mdps {

struct Ellipsoid {
  double cz = 0, cy = 0, cx = 0;  // centre, voxel coordinates
  double az = 1, ay = 1, ax = 1;  // semi-axes, voxels
  cd amplitude{1.0, 0.0};
};

// Phase field phi(u) over normalized coordinates u = 2 p / (n - 1) - 1 in
// [-1, 1]^3, with up to 10 coefficients ordered
//   1, u_z, u_y, u_x, u_z u_y, u_z u_x, u_y u_x, u_z^2, u_y^2, u_x^2.
struct PhantomSpec {
  Shape3 shape{1, 1, 1};
  Spacing3 spacing{};
  std::vector<Ellipsoid> ellipsoids;
  std::vector<double> phase_coeffs;
  std::uint64_t seed = 0;  // provenance of randomly drawn specs
};

namespace detail {

inline double phase_poly(const std::vector<double>& a, double uz, double uy,
                         double ux) {
  const double basis[10] = {1.0,     uz,      uy,      ux,      uz * uy,
                            uz * ux, uy * ux, uz * uz, uy * uy, ux * ux};
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * basis[i];
  return acc;
}

// Separable Gaussian blur, sigma in voxels, kernel truncated at 3 sigma and
// renormalized; samples outside the grid count as zero.
inline RealVolume gaussian_smooth(const RealVolume& v, double sigma) {
  if (sigma <= 0.0) return v;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * (k / sigma) * (k / sigma));
    kernel[static_cast<std::size_t>(k + radius)] = w;
    sum += w;
  }
  for (double& w : kernel) w /= sum;

  const Shape3 s = v.shape;
  RealVolume cur = v;
  RealVolume nxt(s, v.spacing);
  const std::int64_t n_axis[3] = {s.nz, s.ny, s.nx};
  const std::int64_t stride[3] = {s.ny * s.nx, s.nx, 1};
  for (int axis = 0; axis < 3; ++axis) {
    const std::int64_t n = n_axis[axis];
    const std::int64_t st = stride[axis];
    for (std::int64_t z = 0; z < s.nz; ++z)
      for (std::int64_t y = 0; y < s.ny; ++y)
        for (std::int64_t x = 0; x < s.nx; ++x) {
          const std::int64_t idx[3] = {z, y, x};
          const std::int64_t pos = idx[axis];
          const std::int64_t base = linear_index(s, z, y, x) - pos * st;
          double acc = 0.0;
          for (int k = -radius; k <= radius; ++k) {
            const std::int64_t q = pos + k;
            if (q < 0 || q >= n) continue;
            acc += kernel[static_cast<std::size_t>(k + radius)] *
                   cur[base + q * st];
          }
          nxt.at(z, y, x) = acc;
        }
    std::swap(cur, nxt);
  }
  return cur;
}

}  // namespace detail

// Sum of ellipsoid indicator amplitudes, blurred by a 1-voxel Gaussian to
// soften the edges, then multiplied by the unit-magnitude phase field.
inline ComplexVolume make_phantom(const PhantomSpec& spec) {
  detail::require(spec.phase_coeffs.size() <= 10,
                  "make_phantom: phase polynomial has at most 10 coefficients");
  const Shape3 s = spec.shape;
  for (const Ellipsoid& e : spec.ellipsoids) {
    detail::require(e.az > 0 && e.ay > 0 && e.ax > 0,
                    "make_phantom: semi-axes must be positive");
    const bool inside =
        e.cz - e.az >= 0 && e.cz + e.az <= static_cast<double>(s.nz - 1) &&
        e.cy - e.ay >= 0 && e.cy + e.ay <= static_cast<double>(s.ny - 1) &&
        e.cx - e.ax >= 0 && e.cx + e.ax <= static_cast<double>(s.nx - 1);
    detail::require(inside, "make_phantom: ellipsoid extends past the grid");
  }

  RealVolume re(s, spec.spacing), im(s, spec.spacing);
  for (const Ellipsoid& e : spec.ellipsoids)
    for (std::int64_t z = 0; z < s.nz; ++z)
      for (std::int64_t y = 0; y < s.ny; ++y)
        for (std::int64_t x = 0; x < s.nx; ++x) {
          const double dz = (static_cast<double>(z) - e.cz) / e.az;
          const double dy = (static_cast<double>(y) - e.cy) / e.ay;
          const double dx = (static_cast<double>(x) - e.cx) / e.ax;
          if (dz * dz + dy * dy + dx * dx <= 1.0) {
            re.at(z, y, x) += e.amplitude.real();
            im.at(z, y, x) += e.amplitude.imag();
          }
        }
  re = detail::gaussian_smooth(re, 1.0);
  im = detail::gaussian_smooth(im, 1.0);

  ComplexVolume out(s, spec.spacing);
  const auto norm_coord = [](std::int64_t i, std::int64_t n) {
    return n > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) -
                       1.0
                 : 0.0;
  };
  for (std::int64_t z = 0; z < s.nz; ++z)
    for (std::int64_t y = 0; y < s.ny; ++y)
      for (std::int64_t x = 0; x < s.nx; ++x) {
        const double phi =
            detail::phase_poly(spec.phase_coeffs, norm_coord(z, s.nz),
                               norm_coord(y, s.ny), norm_coord(x, s.nx));
        out.at(z, y, x) = cd(re.at(z, y, x), im.at(z, y, x)) *
                          cd(std::cos(phi), std::sin(phi));
      }
  return out;
}

// Deterministic pseudo-random phantom: one large background ellipsoid plus
// a few interior structures, all guaranteed to fit, with a mild random
// polynomial phase.
inline PhantomSpec random_phantom_spec(const Shape3& shape,
                                       std::uint64_t seed,
                                       const Spacing3& spacing = {},
                                       int num_inner = 5) {
  detail::require(shape.nz >= 8 && shape.ny >= 8 && shape.nx >= 8,
                  "random_phantom_spec: grid too small");
  detail::require(num_inner >= 0, "random_phantom_spec: negative count");
  PhantomSpec spec;
  spec.shape = shape;
  spec.spacing = spacing;
  spec.seed = seed;

  const double cz = 0.5 * static_cast<double>(shape.nz - 1);
  const double cy = 0.5 * static_cast<double>(shape.ny - 1);
  const double cx = 0.5 * static_cast<double>(shape.nx - 1);
  Ellipsoid bg;
  bg.cz = cz;
  bg.cy = cy;
  bg.cx = cx;
  bg.az = 0.42 * static_cast<double>(shape.nz - 1);
  bg.ay = 0.42 * static_cast<double>(shape.ny - 1);
  bg.ax = 0.42 * static_cast<double>(shape.nx - 1);
  bg.amplitude = cd(0.6, 0.0);
  spec.ellipsoids.push_back(bg);

  auto rng = make_rng(seed, 0x7068616EULL);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int k = 0; k < num_inner; ++k) {
    Ellipsoid e;
    const double axes[3] = {static_cast<double>(shape.nz - 1),
                            static_cast<double>(shape.ny - 1),
                            static_cast<double>(shape.nx - 1)};
    double* centre[3] = {&e.cz, &e.cy, &e.cx};
    double* semi[3] = {&e.az, &e.ay, &e.ax};
    for (int a = 0; a < 3; ++a) {
      const double n1 = axes[a];
      *semi[a] = (0.05 + 0.10 * u01(rng)) * n1;
      const double margin = 0.20 * n1;  // keep inside the background body
      *centre[a] = 0.5 * n1 + (2.0 * u01(rng) - 1.0) * margin;
    }
    const double mag = 0.3 + 0.7 * u01(rng);
    const double arg = 2.0 * M_PI * u01(rng);
    e.amplitude = mag * cd(std::cos(arg), std::sin(arg));
    spec.ellipsoids.push_back(e);
  }

  spec.phase_coeffs.resize(10);
  std::uniform_real_distribution<double> lin(-0.5, 0.5);
  std::uniform_real_distribution<double> quad(-0.25, 0.25);
  for (int i = 0; i < 4; ++i)
    spec.phase_coeffs[static_cast<std::size_t>(i)] = lin(rng);
  for (int i = 4; i < 10; ++i)
    spec.phase_coeffs[static_cast<std::size_t>(i)] = quad(rng);
  return spec;
}

/// Smooth complex sensitivity maps: one broad Gaussian bump per channel,
// centred on equally spaced points of the mid-plane boundary ellipse, with a
// seeded linear phase ramp (channel 0 keeps zero phase as the reference),
// normalized to unit root-sum-of-squares.
inline CoilSet make_synthetic_coils(const Shape3& shape, int num_coils,
                                    std::uint64_t seed,
                                    const Spacing3& spacing = {}) {
  detail::require(num_coils >= 1, "make_synthetic_coils: need >= 1 coil");
  const double cz = 0.5 * static_cast<double>(shape.nz - 1);
  const double cy = 0.5 * static_cast<double>(shape.ny - 1);
  const double cx = 0.5 * static_cast<double>(shape.nx - 1);
  const double ry = 0.5 * static_cast<double>(shape.ny - 1);
  const double rx = 0.5 * static_cast<double>(shape.nx - 1);
  const double width =
      0.5 * static_cast<double>(
                std::max(shape.nz, std::max(shape.ny, shape.nx)));

  std::vector<ComplexVolume> maps;
  maps.reserve(static_cast<std::size_t>(num_coils));
  for (int j = 0; j < num_coils; ++j) {
    auto rng = make_rng(seed, 0xC011'0000ULL + static_cast<std::uint64_t>(j));
    std::uniform_real_distribution<double> ph(-M_PI / 4.0, M_PI / 4.0);
    double kz = 0.0, ky = 0.0, kx = 0.0;
    if (j > 0) {
      kz = ph(rng);
      ky = ph(rng);
      kx = ph(rng);
    }
    const double theta =
        2.0 * M_PI * static_cast<double>(j) / static_cast<double>(num_coils);
    const double bz = cz;
    const double by = cy + ry * std::sin(theta);
    const double bx = cx + rx * std::cos(theta);

    ComplexVolume m(shape, spacing);
    for (std::int64_t z = 0; z < shape.nz; ++z)
      for (std::int64_t y = 0; y < shape.ny; ++y)
        for (std::int64_t x = 0; x < shape.nx; ++x) {
          const double dz = static_cast<double>(z) - bz;
          const double dy = static_cast<double>(y) - by;
          const double dx = static_cast<double>(x) - bx;
          const double mag = std::exp(-0.5 * (dz * dz + dy * dy + dx * dx) /
                                      (width * width));
          const double uz = static_cast<double>(z) / std::max<double>(
                                1.0, static_cast<double>(shape.nz - 1));
          const double uy = static_cast<double>(y) / std::max<double>(
                                1.0, static_cast<double>(shape.ny - 1));
          const double ux = static_cast<double>(x) / std::max<double>(
                                1.0, static_cast<double>(shape.nx - 1));
          const double phi = kz * uz + ky * uy + kx * ux;
          m.at(z, y, x) = mag * cd(std::cos(phi), std::sin(phi));
        }
    maps.push_back(std::move(m));
  }
  return coil_normalize(CoilSet(std::move(maps)));
}

}  // namespace mdps
