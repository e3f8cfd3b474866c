#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

// Basic grid geometry shared by every module.
//
// Conventions used throughout the library:
//   * volumes have shape (n_z, n_y, n_x) and are stored row-major with x
//     fastest, i.e. linear index = (z * n_y + y) * n_x + x
//   * spacing is in millimetres per voxel, one entry per axis (z, y, x)
//   * complex samples are std::complex<double> in memory; file payloads are
//     float32 pairs (see volume_io.hpp)

namespace mdps {

using cd = std::complex<double>;

namespace detail {

// Precondition check helper: throws std::invalid_argument so callers can
// distinguish bad arguments from I/O failures (std::runtime_error).
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail

struct Shape3 {
  std::int64_t nz = 0, ny = 0, nx = 0;

  std::int64_t size() const { return nz * ny * nx; }
  std::int64_t operator[](int axis) const {
    return axis == 0 ? nz : (axis == 1 ? ny : nx);
  }
  bool operator==(const Shape3&) const = default;
};

struct Spacing3 {
  double sz = 1.0, sy = 1.0, sx = 1.0;  // mm per voxel

  double operator[](int axis) const {
    return axis == 0 ? sz : (axis == 1 ? sy : sx);
  }
  bool operator==(const Spacing3&) const = default;
};

inline std::int64_t linear_index(const Shape3& s, std::int64_t z,
                                 std::int64_t y, std::int64_t x) {
  return (z * s.ny + y) * s.nx + x;
}

inline bool in_bounds(const Shape3& s, std::int64_t z, std::int64_t y,
                      std::int64_t x) {
  return z >= 0 && z < s.nz && y >= 0 && y < s.ny && x >= 0 && x < s.nx;
}

}  // namespace mdps
