#pragma once

#include <array>
#include <cmath>

#include "mdps/core/volume.hpp"
#include "mdps/motion/state.hpp"

// Rigid warp W(x, s): pull-back resampling with trilinear interpolation.
// Output voxel p reads x at the inverse-transformed position q = M(s)^{-1} p;
// samples outside the grid are zero. W is linear in x, and W(x, 0) == x
// bit-exactly for in-range voxels.
//
// Differentiation. warp_jvp / warp_vjp share one linearization: weights for
// the image part, analytic position gradients for the 6 rigid parameters
// (translations per-mm through the spacing, rotations per-degree). Trilinear
// interpolation has derivative kinks on grid planes; exactly on a node the
// position gradient is defined as the mean of the left/right cell slopes
// (the symmetric / Clarke choice), which is what central finite differences
// of the warp converge to and what makes the s = 0 linearization match them.
// Both directions use the same rule, so <jvp(dx, ds), u> ==
// <dx, grad_x> + <ds, grad_s> holds to round-off in the real inner product.

namespace mdps {

namespace detail {

inline Mat4 rigid_inverse(const Mat4& m) {
  const Mat3 rt = m.rot.transposed();
  const Vec3 bt = rt.apply(m.trans);
  return Mat4{rt, {-bt.z, -bt.y, -bt.x}};
}

inline cd fetch(const ComplexVolume& x, std::int64_t z, std::int64_t y,
                std::int64_t xx) {
  return in_bounds(x.shape, z, y, xx) ? x.at(z, y, xx) : cd{};
}

struct TrilinearPoint {
  std::int64_t bz, by, bx;  // base corner (floor of the sample position)
  double fz, fy, fx;        // fractional offsets in [0, 1)
};

inline TrilinearPoint locate(const Vec3& q) {
  TrilinearPoint t;
  const double flz = std::floor(q.z), fly = std::floor(q.y),
               flx = std::floor(q.x);
  t.bz = static_cast<std::int64_t>(flz);
  t.by = static_cast<std::int64_t>(fly);
  t.bx = static_cast<std::int64_t>(flx);
  t.fz = q.z - flz;
  t.fy = q.y - fly;
  t.fx = q.x - flx;
  return t;
}

inline cd interp_value(const ComplexVolume& x, const TrilinearPoint& t) {
  cd acc{};
  for (int dz = 0; dz < 2; ++dz) {
    const double wz = dz ? t.fz : 1.0 - t.fz;
    if (wz == 0.0) continue;
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? t.fy : 1.0 - t.fy;
      if (wy == 0.0) continue;
      for (int dx = 0; dx < 2; ++dx) {
        const double wx = dx ? t.fx : 1.0 - t.fx;
        if (wx == 0.0) continue;
        acc += (wz * wy * wx) * fetch(x, t.bz + dz, t.by + dy, t.bx + dx);
      }
    }
  }
  return acc;
}

// Position gradient of the interpolant at the sample point, (z, y, x) order.
inline std::array<cd, 3> interp_pos_grad(const ComplexVolume& x,
                                         const TrilinearPoint& t) {
  std::array<cd, 3> g{};
  const double w[3][2] = {{1.0 - t.fz, t.fz},
                          {1.0 - t.fy, t.fy},
                          {1.0 - t.fx, t.fx}};
  const double f[3] = {t.fz, t.fy, t.fx};
  const std::int64_t b[3] = {t.bz, t.by, t.bx};
  for (int axis = 0; axis < 3; ++axis) {
    const int oa = axis == 0 ? 1 : 0;          // first other axis
    const int ob = axis == 2 ? 1 : 2;          // second other axis
    for (int da = 0; da < 2; ++da) {
      const double wa = w[oa][da];
      if (wa == 0.0) continue;
      for (int db = 0; db < 2; ++db) {
        const double wb = w[ob][db];
        if (wb == 0.0) continue;
        std::int64_t idx[3];
        idx[oa] = b[oa] + da;
        idx[ob] = b[ob] + db;
        cd slope;
        if (f[axis] > 0.0) {
          idx[axis] = b[axis];
          const cd lo = fetch(x, idx[0], idx[1], idx[2]);
          idx[axis] = b[axis] + 1;
          slope = fetch(x, idx[0], idx[1], idx[2]) - lo;
        } else {
          // exactly on a node: symmetric slope across the two adjacent cells
          idx[axis] = b[axis] - 1;
          const cd lo = fetch(x, idx[0], idx[1], idx[2]);
          idx[axis] = b[axis] + 1;
          slope = 0.5 * (fetch(x, idx[0], idx[1], idx[2]) - lo);
        }
        g[axis] += (wa * wb) * slope;
      }
    }
  }
  return g;
}

// Per-parameter derivatives of the sample position q(p) = R^T (p - c) + c -
// R^T t_vox: translations give constant columns, rotations depend on p via
// u = (p - c) - t_vox.
struct WarpGeometry {
  Mat4 inv;               // q = inv.rot p + inv.trans
  Vec3 centre, t_vox;
  std::array<Vec3, 3> d_trans;  // dq/dt_j (per mm), j = z, y, x
  std::array<Mat3, 3> d_rot_t;  // (dR/dr_j)^T (per radian)

  Vec3 dq_rotation(int j, const Vec3& u) const {
    const Vec3 r = d_rot_t[j].apply(u);
    return {r.z * kDegToRad, r.y * kDegToRad, r.x * kDegToRad};
  }
};

inline WarpGeometry warp_geometry(const MotionState& s, const Shape3& shape,
                                  const Spacing3& spacing) {
  WarpGeometry g;
  const Mat4 m = se3_matrix(s, shape, spacing);
  g.inv = rigid_inverse(m);
  g.centre = volume_centre(shape);
  g.t_vox = translation_voxels(s, spacing);
  const Mat3 rt = g.inv.rot;  // = R^T
  const double sp[3] = {spacing.sz, spacing.sy, spacing.sx};
  for (int j = 0; j < 3; ++j) {
    // -R^T e_j / spacing_j: minus the j-th column of R^T, scaled
    g.d_trans[j] = {-rt.m[0][j] / sp[j], -rt.m[1][j] / sp[j],
                    -rt.m[2][j] / sp[j]};
    g.d_rot_t[j] = euler_zyx_deriv(s, j).transposed();
  }
  return g;
}

}  // namespace detail

inline ComplexVolume warp(const ComplexVolume& x, const MotionState& s) {
  const auto geo = detail::warp_geometry(s, x.shape, x.spacing);
  ComplexVolume out(x.shape, x.spacing);
  std::int64_t i = 0;
  for (std::int64_t z = 0; z < x.shape.nz; ++z)
    for (std::int64_t y = 0; y < x.shape.ny; ++y)
      for (std::int64_t xx = 0; xx < x.shape.nx; ++xx, ++i) {
        const Vec3 q = geo.inv.apply({static_cast<double>(z),
                                      static_cast<double>(y),
                                      static_cast<double>(xx)});
        out[i] = detail::interp_value(x, detail::locate(q));
      }
  return out;
}

// Adjoint of the image linearization, W(s)^T u: scatter each output sample
// back onto its stencil with the same (real) weights.
inline ComplexVolume warp_adjoint(const ComplexVolume& u,
                                  const MotionState& s) {
  const auto geo = detail::warp_geometry(s, u.shape, u.spacing);
  ComplexVolume out(u.shape, u.spacing);
  std::int64_t i = 0;
  for (std::int64_t z = 0; z < u.shape.nz; ++z)
    for (std::int64_t y = 0; y < u.shape.ny; ++y)
      for (std::int64_t xx = 0; xx < u.shape.nx; ++xx, ++i) {
        const cd uv = u[i];
        if (uv == cd{}) continue;
        const Vec3 q = geo.inv.apply({static_cast<double>(z),
                                      static_cast<double>(y),
                                      static_cast<double>(xx)});
        const auto t = detail::locate(q);
        for (int dz = 0; dz < 2; ++dz) {
          const double wz = dz ? t.fz : 1.0 - t.fz;
          if (wz == 0.0) continue;
          for (int dy = 0; dy < 2; ++dy) {
            const double wy = dy ? t.fy : 1.0 - t.fy;
            if (wy == 0.0) continue;
            for (int dx = 0; dx < 2; ++dx) {
              const double wx = dx ? t.fx : 1.0 - t.fx;
              if (wx == 0.0) continue;
              if (in_bounds(u.shape, t.bz + dz, t.by + dy, t.bx + dx))
                out.at(t.bz + dz, t.by + dy, t.bx + dx) +=
                    (wz * wy * wx) * uv;
            }
          }
        }
      }
  return out;
}

// Directional derivative of warp at (x, s) along (dx, ds).
inline ComplexVolume warp_jvp(const ComplexVolume& x, const MotionState& s,
                              const ComplexVolume& dx,
                              const std::array<double, 6>& ds) {
  detail::require(dx.shape == x.shape, "warp_jvp: dx shape mismatch");
  const auto geo = detail::warp_geometry(s, x.shape, x.spacing);
  ComplexVolume out(x.shape, x.spacing);
  std::int64_t i = 0;
  for (std::int64_t z = 0; z < x.shape.nz; ++z)
    for (std::int64_t y = 0; y < x.shape.ny; ++y)
      for (std::int64_t xx = 0; xx < x.shape.nx; ++xx, ++i) {
        const Vec3 p{static_cast<double>(z), static_cast<double>(y),
                     static_cast<double>(xx)};
        const Vec3 q = geo.inv.apply(p);
        const auto t = detail::locate(q);
        cd val = detail::interp_value(dx, t);
        const auto g = detail::interp_pos_grad(x, t);
        const Vec3 u{p.z - geo.centre.z - geo.t_vox.z,
                     p.y - geo.centre.y - geo.t_vox.y,
                     p.x - geo.centre.x - geo.t_vox.x};
        Vec3 dq{};
        for (int j = 0; j < 3; ++j) {
          if (ds[j] != 0.0) {
            dq.z += ds[j] * geo.d_trans[j].z;
            dq.y += ds[j] * geo.d_trans[j].y;
            dq.x += ds[j] * geo.d_trans[j].x;
          }
          if (ds[3 + j] != 0.0) {
            const Vec3 dr = geo.dq_rotation(j, u);
            dq.z += ds[3 + j] * dr.z;
            dq.y += ds[3 + j] * dr.y;
            dq.x += ds[3 + j] * dr.x;
          }
        }
        val += g[0] * dq.z + g[1] * dq.y + g[2] * dq.x;
        out[i] = val;
      }
  return out;
}

struct WarpVjp {
  ComplexVolume grad_x;          // W(s)^T u
  std::array<double, 6> grad_s;  // Re<u, dW/ds_j x> per parameter
};

inline WarpVjp warp_vjp(const ComplexVolume& x, const MotionState& s,
                        const ComplexVolume& u) {
  detail::require(u.shape == x.shape, "warp_vjp: cotangent shape mismatch");
  const auto geo = detail::warp_geometry(s, x.shape, x.spacing);
  WarpVjp out{warp_adjoint(u, s), {}};
  std::int64_t i = 0;
  for (std::int64_t z = 0; z < x.shape.nz; ++z)
    for (std::int64_t y = 0; y < x.shape.ny; ++y)
      for (std::int64_t xx = 0; xx < x.shape.nx; ++xx, ++i) {
        const cd uv = u[i];
        if (uv == cd{}) continue;
        const Vec3 p{static_cast<double>(z), static_cast<double>(y),
                     static_cast<double>(xx)};
        const Vec3 q = geo.inv.apply(p);
        const auto g = detail::interp_pos_grad(x, detail::locate(q));
        const Vec3 uvec{p.z - geo.centre.z - geo.t_vox.z,
                        p.y - geo.centre.y - geo.t_vox.y,
                        p.x - geo.centre.x - geo.t_vox.x};
        for (int j = 0; j < 3; ++j) {
          const Vec3& dt = geo.d_trans[j];
          const cd dir_t = g[0] * dt.z + g[1] * dt.y + g[2] * dt.x;
          out.grad_s[j] += uv.real() * dir_t.real() + uv.imag() * dir_t.imag();
          const Vec3 dr = geo.dq_rotation(j, uvec);
          const cd dir_r = g[0] * dr.z + g[1] * dr.y + g[2] * dr.x;
          out.grad_s[3 + j] +=
              uv.real() * dir_r.real() + uv.imag() * dir_r.imag();
        }
      }
  return out;
}

}  // namespace mdps
