#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include <fftw3.h>

#include "mdps/core/volume.hpp"

// Centered orthonormal 3-D DFT pair.
//
//   fft3  = fftshift o DFT o ifftshift, scaled by 1/sqrt(D)
//   ifft3 = fftshift o IDFT o ifftshift, scaled by 1/sqrt(D)
//
// so the zero-frequency coefficient sits at index (nz/2, ny/2, nx/2) and
// ifft3(fft3(v)) == v up to round-off. Parseval holds with the 1/sqrt(D)
// scaling. The shifts are fused into the load/store passes that move data to
// and from the FFTW buffers, so no extra array copies are made.
//
// FFTW plans are cached per shape and direction behind a mutex; plan
// execution via the new-array interface is thread-safe and never changes
// results (FFTW_ESTIMATE picks a fixed algorithm per shape).

namespace mdps {
namespace detail {

class FftPlanCache {
 public:
  static FftPlanCache& instance() {
    static FftPlanCache c;
    return c;
  }

  fftw_plan get(const Shape3& s, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    const Key key{s.nz, s.ny, s.nx, sign};
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    // Plan on scratch buffers; executions use the new-array interface.
    // FFTW_UNALIGNED keeps the plan valid for any caller buffer.
    std::vector<fftw_complex> in(static_cast<std::size_t>(s.size()));
    std::vector<fftw_complex> out(static_cast<std::size_t>(s.size()));
    fftw_plan p = fftw_plan_dft_3d(static_cast<int>(s.nz),
                                   static_cast<int>(s.ny),
                                   static_cast<int>(s.nx), in.data(),
                                   out.data(), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw std::runtime_error("fft3: FFTW plan creation failed");
    plans_.emplace(key, p);
    return p;
  }

 private:
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t, int>;
  FftPlanCache() = default;
  std::mutex mu_;
  std::map<Key, fftw_plan> plans_;
};

// fftshift moves index i to (i + n/2) mod n (DC to the grid centre);
// ifftshift is its inverse. Gathers are expressed as source-index maps.
inline std::int64_t ifftshift_src(std::int64_t i, std::int64_t n) {
  return (i + n / 2) % n;  // out[i] = in[(i + n/2) % n]
}
inline std::int64_t fftshift_src(std::int64_t i, std::int64_t n) {
  return (i + n - n / 2) % n;  // out[i] = in[(i - n/2) mod n]
}

template <typename SrcMap>
void shuffled_copy(const cd* in, const Shape3& s, cd* out, SrcMap&& src,
                   double scale) {
  std::int64_t i = 0;
  for (std::int64_t z = 0; z < s.nz; ++z) {
    const std::int64_t sz = src(z, s.nz);
    for (std::int64_t y = 0; y < s.ny; ++y) {
      const std::int64_t sy = src(y, s.ny);
      const std::int64_t row = (sz * s.ny + sy) * s.nx;
      for (std::int64_t x = 0; x < s.nx; ++x, ++i)
        out[i] = in[row + src(x, s.nx)] * scale;
    }
  }
}

inline ComplexVolume fft3_impl(const ComplexVolume& v, int sign) {
  const Shape3 s = v.shape;
  fftw_plan plan = FftPlanCache::instance().get(s, sign);

  std::vector<cd> buf(static_cast<std::size_t>(s.size()));
  shuffled_copy(v.data.data(), s, buf.data(), ifftshift_src, 1.0);

  std::vector<cd> spec(static_cast<std::size_t>(s.size()));
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(buf.data()),
                   reinterpret_cast<fftw_complex*>(spec.data()));

  ComplexVolume out(s, v.spacing);
  const double scale = 1.0 / std::sqrt(static_cast<double>(s.size()));
  shuffled_copy(spec.data(), s, out.data.data(), fftshift_src, scale);
  return out;
}

}  // namespace detail

inline ComplexVolume fft3(const ComplexVolume& v) {
  return detail::fft3_impl(v, FFTW_FORWARD);
}

inline ComplexVolume ifft3(const ComplexVolume& v) {
  return detail::fft3_impl(v, FFTW_BACKWARD);
}

}  // namespace mdps
