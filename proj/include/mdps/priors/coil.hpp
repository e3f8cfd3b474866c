#pragma once

#include <cmath>
#include <vector>

#include "mdps/core/volume.hpp"
#include "mdps/transforms/dst.hpp"

// Smoothness regularization of coil sensitivity maps.
//
// R(c) = (1/2) sum_j || D c_j ||^2 with D the 3-D forward-difference
// operator under zero (Dirichlet) boundary conditions, applied separately to
// the real and imaginary channels. D^T D is the Dirichlet Laplacian, which
// the orthonormal DST-I diagonalizes, so the proximal step has a closed form
// in sine coordinates.

namespace mdps {

// (gamma/2) sum over axes of all forward differences, counting the two
// boundary differences against an implicit zero sample outside the grid.
inline double coil_reg_value(const CoilSet& c, double gamma = 1.0) {
  const auto quad = [](const ComplexVolume& v) {
    const Shape3 s = v.shape;
    double acc = 0.0;
    const auto edge = [&acc](cd a, cd b) {
      const cd d = b - a;
      acc += d.real() * d.real() + d.imag() * d.imag();
    };
    for (std::int64_t z = 0; z < s.nz; ++z)
      for (std::int64_t y = 0; y < s.ny; ++y)
        for (std::int64_t x = 0; x < s.nx; ++x) {
          const cd v0 = v.at(z, y, x);
          edge(z > 0 ? v.at(z - 1, y, x) : cd{}, v0);
          edge(y > 0 ? v.at(z, y - 1, x) : cd{}, v0);
          edge(x > 0 ? v.at(z, y, x - 1) : cd{}, v0);
          if (z == s.nz - 1) edge(v0, cd{});
          if (y == s.ny - 1) edge(v0, cd{});
          if (x == s.nx - 1) edge(v0, cd{});
        }
    return acc;
  };
  detail::require(gamma >= 0.0, "coil_reg_value: gamma must be >= 0");
  double total = 0.0;
  for (const auto& m : c.maps) total += quad(m);
  return 0.5 * gamma * total;
}

// Exact minimizer of gamma * R(c) + (L/2) ||c - w||^2:
//   c_j = S diag(L / (gamma * ell + L)) S w_j   per real/imag channel,
// with S the orthonormal DST-I and ell the Dirichlet Laplacian eigenvalues.
inline CoilSet coil_prox(const CoilSet& w, double gamma, double L) {
  detail::require(gamma >= 0.0 && L > 0.0,
                  "coil_prox: need gamma >= 0 and L > 0");
  const Shape3 shape = w.shape();
  const RealVolume ell = dirichlet_laplacian_eigenvalues(shape);
  std::vector<ComplexVolume> out;
  out.reserve(w.maps.size());
  for (const auto& m : w.maps) {
    RealVolume re(shape, m.spacing), im(shape, m.spacing);
    for (std::size_t i = 0; i < m.data.size(); ++i) {
      re.data[i] = m.data[i].real();
      im.data[i] = m.data[i].imag();
    }
    RealVolume fre = dst3(re), fim = dst3(im);
    for (std::size_t i = 0; i < fre.data.size(); ++i) {
      const double f = L / (gamma * ell.data[i] + L);
      fre.data[i] *= f;
      fim.data[i] *= f;
    }
    fre = idst3(fre);
    fim = idst3(fim);
    ComplexVolume filt(shape, m.spacing);
    for (std::size_t i = 0; i < filt.data.size(); ++i)
      filt.data[i] = cd(fre.data[i], fim.data[i]);
    out.push_back(std::move(filt));
  }
  return CoilSet(std::move(out));
}

// Projects onto the pointwise unit-RSS constraint sum_j |c_j|^2 = 1.
// Voxels where every coil vanishes are left at zero.
inline CoilSet coil_normalize(const CoilSet& c) {
  detail::require(c.num_coils() > 0, "coil_normalize: empty coil set");
  const std::size_t n = c.maps[0].data.size();
  std::vector<double> inv_rss(n, 0.0);
  for (const auto& m : c.maps)
    for (std::size_t i = 0; i < n; ++i) inv_rss[i] += std::norm(m.data[i]);
  for (std::size_t i = 0; i < n; ++i)
    inv_rss[i] = inv_rss[i] > 0.0 ? 1.0 / std::sqrt(inv_rss[i]) : 0.0;
  CoilSet out = c;
  for (auto& m : out.maps)
    for (std::size_t i = 0; i < n; ++i) m.data[i] *= inv_rss[i];
  return out;
}

}  // namespace mdps
