#pragma once

#include <complex>
#include <vector>

#include "mdps/core/types.hpp"

namespace mdps {

// Dense 3-D grid of samples. The template keeps real masks/metric maps and
// complex image volumes on the same indexing convention.
template <typename T>
struct Grid3 {
  Shape3 shape;
  Spacing3 spacing;
  std::vector<T> data;

  Grid3() = default;
  Grid3(Shape3 s, Spacing3 sp = {}) : shape(s), spacing(sp) {
    detail::require(s.nz > 0 && s.ny > 0 && s.nx > 0,
                    "Grid3: shape must be positive along every axis");
    data.assign(static_cast<std::size_t>(s.size()), T{});
  }

  std::int64_t size() const { return shape.size(); }

  T& at(std::int64_t z, std::int64_t y, std::int64_t x) {
    return data[static_cast<std::size_t>(linear_index(shape, z, y, x))];
  }
  const T& at(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return data[static_cast<std::size_t>(linear_index(shape, z, y, x))];
  }
  T& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const {
    return data[static_cast<std::size_t>(i)];
  }
};

using ComplexVolume = Grid3<cd>;
using RealVolume = Grid3<double>;

inline ComplexVolume zeros_like(const ComplexVolume& v) {
  return ComplexVolume(v.shape, v.spacing);
}

// Receive coil sensitivity maps: one complex volume per channel, all on the
// same grid.
struct CoilSet {
  std::vector<ComplexVolume> maps;

  CoilSet() = default;
  explicit CoilSet(std::vector<ComplexVolume> m) : maps(std::move(m)) {
    validate();
  }

  int num_coils() const { return static_cast<int>(maps.size()); }
  Shape3 shape() const { return maps.empty() ? Shape3{} : maps[0].shape; }

  void validate() const {
    for (const auto& m : maps)
      detail::require(m.shape == maps[0].shape && m.spacing == maps[0].spacing,
                      "CoilSet: all maps must share one grid");
  }
};

// Real inner product on complex vectors: Re<a, b> = sum Re(conj(a_i) b_i).
// This is the inner product under which all adjoint/VJP contracts in the
// library are stated (C^D treated as R^{2D}).
inline double real_dot(const std::vector<cd>& a, const std::vector<cd>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  return acc;
}

inline double squared_norm(const std::vector<cd>& a) {
  double acc = 0.0;
  for (const cd& v : a) acc += std::norm(v);
  return acc;
}

}  // namespace mdps
