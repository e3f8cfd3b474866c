#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "mdps/core/types.hpp"

// Rigid-body motion states.
//
// A state holds 6 parameters in the fixed order
//   (t_z_mm, t_y_mm, t_x_mm, r_z_deg, r_y_deg, r_x_deg):
// translations in millimetres, rotations in degrees. The voxel-space
// transform rotates about the geometric volume centre ((n-1)/2 per axis)
// with intrinsic Z-Y-X Euler angles, then translates; translations are
// converted mm -> voxels through the grid spacing. Rotation angles act
// directly in voxel coordinates, so the rotation block is exactly
// orthonormal; this equals the physical world-space rigid motion whenever
// the spacing is isotropic (the bundled configurations all are).
//
// Axis convention: vectors are stored (z, y, x); a positive r_z is a
// right-handed rotation about the +z axis, which maps +x toward +y.

namespace mdps {

struct MotionState {
  double t_z_mm = 0, t_y_mm = 0, t_x_mm = 0;
  double r_z_deg = 0, r_y_deg = 0, r_x_deg = 0;

  double operator[](int i) const {
    const double* p[6] = {&t_z_mm, &t_y_mm, &t_x_mm,
                          &r_z_deg, &r_y_deg, &r_x_deg};
    return *p[i];
  }
  double& param(int i) {
    double* p[6] = {&t_z_mm, &t_y_mm, &t_x_mm, &r_z_deg, &r_y_deg, &r_x_deg};
    return *p[i];
  }
  bool operator==(const MotionState&) const = default;
};

using MotionTrajectory = std::vector<MotionState>;

enum class Severity { mild, moderate, severe };

struct SeverityBounds {
  double translation_mm;
  double rotation_deg;
};

inline SeverityBounds severity_bounds(Severity s) {
  switch (s) {
    case Severity::mild: return {3.0, 5.0};
    case Severity::moderate: return {6.0, 10.0};
    case Severity::severe: return {9.0, 15.0};
  }
  throw std::invalid_argument("severity_bounds: unknown level");
}

struct Vec3 {
  double z = 0, y = 0, x = 0;
};

struct Mat3 {
  // m[row][col], rows and columns in (z, y, x) order
  double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  Vec3 apply(const Vec3& v) const {
    return {m[0][0] * v.z + m[0][1] * v.y + m[0][2] * v.x,
            m[1][0] * v.z + m[1][1] * v.y + m[1][2] * v.x,
            m[2][0] * v.z + m[2][1] * v.y + m[2][2] * v.x};
  }
  Mat3 transposed() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t.m[r][c] = m[c][r];
    return t;
  }
};

inline Mat3 mat_mul(const Mat3& a, const Mat3& b) {
  Mat3 out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      double acc = 0;
      for (int k = 0; k < 3; ++k) acc += a.m[r][k] * b.m[k][c];
      out.m[r][c] = acc;
    }
  return out;
}

struct Mat4 {
  Mat3 rot;
  Vec3 trans;  // voxel units

  Vec3 apply(const Vec3& p) const {
    Vec3 r = rot.apply(p);
    return {r.z + trans.z, r.y + trans.y, r.x + trans.x};
  }
};

namespace detail {

constexpr double kDegToRad = M_PI / 180.0;

// Elementary rotations expressed on (z, y, x)-ordered components.
inline Mat3 rot_z(double c, double s) {
  Mat3 r;
  r.m[0][0] = 1; r.m[0][1] = 0; r.m[0][2] = 0;
  r.m[1][0] = 0; r.m[1][1] = c; r.m[1][2] = s;
  r.m[2][0] = 0; r.m[2][1] = -s; r.m[2][2] = c;
  return r;
}
inline Mat3 rot_y(double c, double s) {
  Mat3 r;
  r.m[0][0] = c; r.m[0][1] = 0; r.m[0][2] = -s;
  r.m[1][0] = 0; r.m[1][1] = 1; r.m[1][2] = 0;
  r.m[2][0] = s; r.m[2][1] = 0; r.m[2][2] = c;
  return r;
}
inline Mat3 rot_x(double c, double s) {
  Mat3 r;
  r.m[0][0] = c; r.m[0][1] = s; r.m[0][2] = 0;
  r.m[1][0] = -s; r.m[1][1] = c; r.m[1][2] = 0;
  r.m[2][0] = 0; r.m[2][1] = 0; r.m[2][2] = 1;
  return r;
}

inline Mat3 euler_zyx(const MotionState& s) {
  const double az = s.r_z_deg * kDegToRad;
  const double ay = s.r_y_deg * kDegToRad;
  const double ax = s.r_x_deg * kDegToRad;
  return mat_mul(rot_z(std::cos(az), std::sin(az)),
                 mat_mul(rot_y(std::cos(ay), std::sin(ay)),
                         rot_x(std::cos(ax), std::sin(ax))));
}

// d(euler_zyx)/d(angle), angle in radians, for the three rotation params.
inline Mat3 euler_zyx_deriv(const MotionState& s, int which) {
  const double az = s.r_z_deg * kDegToRad;
  const double ay = s.r_y_deg * kDegToRad;
  const double ax = s.r_x_deg * kDegToRad;
  auto d_rot = [](Mat3 (*rot)(double, double), double a) {
    // d/da rot(cos a, sin a): substitute c -> -sin, s -> cos and zero the
    // constant entries.
    Mat3 r = rot(-std::sin(a), std::cos(a));
    Mat3 base = rot(0.0, 0.0);  // structural ones/zeros
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] -= base.m[i][j];
    return r;
  };
  const Mat3 rz = rot_z(std::cos(az), std::sin(az));
  const Mat3 ry = rot_y(std::cos(ay), std::sin(ay));
  const Mat3 rx = rot_x(std::cos(ax), std::sin(ax));
  switch (which) {
    case 0: return mat_mul(d_rot(rot_z, az), mat_mul(ry, rx));
    case 1: return mat_mul(rz, mat_mul(d_rot(rot_y, ay), rx));
    case 2: return mat_mul(rz, mat_mul(ry, d_rot(rot_x, ax)));
  }
  throw std::invalid_argument("euler_zyx_deriv: which must be 0..2");
}

inline Vec3 volume_centre(const Shape3& s) {
  return {0.5 * static_cast<double>(s.nz - 1),
          0.5 * static_cast<double>(s.ny - 1),
          0.5 * static_cast<double>(s.nx - 1)};
}

inline Vec3 translation_voxels(const MotionState& st, const Spacing3& sp) {
  return {st.t_z_mm / sp.sz, st.t_y_mm / sp.sy, st.t_x_mm / sp.sx};
}

}  // namespace detail

// Voxel-coordinate rigid transform p' = R (p - c) + c + t_vox.
inline Mat4 se3_matrix(const MotionState& st, const Shape3& shape,
                       const Spacing3& spacing) {
  detail::require(spacing.sz > 0 && spacing.sy > 0 && spacing.sx > 0,
                  "se3_matrix: spacing must be positive");
  const Mat3 r = detail::euler_zyx(st);
  const Vec3 c = detail::volume_centre(shape);
  const Vec3 t = detail::translation_voxels(st, spacing);
  const Vec3 rc = r.apply(c);
  return Mat4{r, {c.z - rc.z + t.z, c.y - rc.y + t.y, c.x - rc.x + t.x}};
}

// Second differences of a trajectory: d_t = v_{t+1} - 2 v_t + v_{t-1} for the
// T-2 interior states, component-wise. Affine-in-t trajectories map to zero.
inline std::vector<std::array<double, 6>> second_difference(
    const MotionTrajectory& v) {
  std::vector<std::array<double, 6>> out;
  if (v.size() < 3) return out;
  out.resize(v.size() - 2);
  for (std::size_t t = 1; t + 1 < v.size(); ++t)
    for (int j = 0; j < 6; ++j)
      out[t - 1][j] = v[t + 1][j] - 2.0 * v[t][j] + v[t - 1][j];
  return out;
}

}  // namespace mdps
