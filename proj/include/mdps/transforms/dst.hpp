#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include <fftw3.h>

#include "mdps/core/volume.hpp"

// Orthonormal 3-D type-I discrete sine transform (Dirichlet boundary) and
// the matching Laplacian spectrum.
//
// 1-D DST-I basis: S[k][j] = sqrt(2/(n+1)) * sin(pi (j+1)(k+1) / (n+1)).
// S is symmetric and involutory (S S = Id), so the inverse transform is the
// same computation; idst3 is provided for readability. FFTW's RODFT00 kind
// computes the unnormalized sum (factor 2 per axis), hence the
// 1/sqrt(2(n+1)) per-axis scaling below.
//
// The DST-I vectors diagonalize the Dirichlet second-difference operator
// D^T D (forward differences with zero samples just outside the grid):
// per-axis eigenvalues 2 - 2 cos(pi (k+1)/(n+1)); the 3-D operator is the
// Kronecker sum, so eigenvalues add across axes and lie in [0, 12).

namespace mdps {
namespace detail {

class DstPlanCache {
 public:
  static DstPlanCache& instance() {
    static DstPlanCache c;
    return c;
  }

  fftw_plan get(const Shape3& s) {
    std::lock_guard<std::mutex> lock(mu_);
    const Key key{s.nz, s.ny, s.nx};
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<double> in(static_cast<std::size_t>(s.size()));
    std::vector<double> out(static_cast<std::size_t>(s.size()));
    fftw_plan p = fftw_plan_r2r_3d(
        static_cast<int>(s.nz), static_cast<int>(s.ny),
        static_cast<int>(s.nx), in.data(), out.data(), FFTW_RODFT00,
        FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw std::runtime_error("dst3: FFTW plan creation failed");
    plans_.emplace(key, p);
    return p;
  }

 private:
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  DstPlanCache() = default;
  std::mutex mu_;
  std::map<Key, fftw_plan> plans_;
};

}  // namespace detail

inline RealVolume dst3(const RealVolume& v) {
  const Shape3 s = v.shape;
  fftw_plan plan = detail::DstPlanCache::instance().get(s);
  RealVolume out(s, v.spacing);
  std::vector<double> in = v.data;  // FFTW r2r may clobber its input
  fftw_execute_r2r(plan, in.data(), out.data.data());
  const double scale = 1.0 / std::sqrt(8.0 * static_cast<double>(s.nz + 1) *
                                       static_cast<double>(s.ny + 1) *
                                       static_cast<double>(s.nx + 1));
  for (double& d : out.data) d *= scale;
  return out;
}

inline RealVolume idst3(const RealVolume& v) { return dst3(v); }

// Eigenvalues of the 3-D Dirichlet Laplacian (D^T D of forward differences
// with zero boundary) in DST-I coordinate order.
inline RealVolume dirichlet_laplacian_eigenvalues(const Shape3& s) {
  detail::require(s.nz > 0 && s.ny > 0 && s.nx > 0,
                  "dirichlet_laplacian_eigenvalues: invalid shape");
  RealVolume out(s);
  auto axis_eig = [](std::int64_t k, std::int64_t n) {
    return 2.0 - 2.0 * std::cos(M_PI * static_cast<double>(k + 1) /
                                static_cast<double>(n + 1));
  };
  for (std::int64_t z = 0; z < s.nz; ++z)
    for (std::int64_t y = 0; y < s.ny; ++y)
      for (std::int64_t x = 0; x < s.nx; ++x)
        out.at(z, y, x) =
            axis_eig(z, s.nz) + axis_eig(y, s.ny) + axis_eig(x, s.nx);
  return out;
}

}  // namespace mdps
