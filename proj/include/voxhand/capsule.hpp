#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "voxhand/depth.hpp"
#include "voxhand/kinematics.hpp"
#include "voxhand/skeleton.hpp"

namespace voxhand {

// Renderable hand geometry: sphere-capped cylinders along the bone links
// plus one ellipsoid for the palm bulk.
struct CapsuleModel {
  std::vector<SkeletonCapsule> capsules;
  int palm_a = -1, palm_b = -1;   // ellipsoid spans these joints; -1 = none
  Vec3 palm_radii;                // semi-axes in the root frame, mm

  void validate(int joint_count) const {
    for (const SkeletonCapsule& c : capsules)
      if (c.a < 0 || c.b < 0 || c.a >= joint_count || c.b >= joint_count || !(c.radius > 0.0))
        throw InvalidSpec("CapsuleModel: malformed capsule");
    if (palm_a >= 0 || palm_b >= 0) {
      if (palm_a < 0 || palm_b < 0 || palm_a >= joint_count || palm_b >= joint_count)
        throw InvalidSpec("CapsuleModel: palm joints out of range");
      if (!(palm_radii.x > 0.0) || !(palm_radii.y > 0.0) || !(palm_radii.z > 0.0))
        throw InvalidSpec("CapsuleModel: palm radii must be > 0");
    }
  }
};

inline CapsuleModel capsule_model_of(const SkeletonModel& model) {
  CapsuleModel out;
  out.capsules = model.capsules;
  out.palm_a = model.palm_a;
  out.palm_b = model.palm_b;
  out.palm_radii = model.palm_radii;
  out.validate(static_cast<int>(model.joints.size()));
  return out;
}

// Rigid world-to-camera map plus the pinhole intrinsics.
struct CameraPose {
  Mat3 rotation = Mat3::identity();
  Vec3 translation;
  CameraIntrinsics intrinsics;
  int width = 0;
  int height = 0;

  void validate() const {
    if (rotation.orthonormality_error() > 1e-9 || rotation.determinant() < 0.0)
      throw InvalidSpec("CameraPose: rotation must be a proper rotation");
    if (width <= 0 || height <= 0) throw InvalidSpec("CameraPose: image size must be positive");
  }

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
};

namespace detail {

constexpr double kRayEps = 1e-9;

// Smallest t > eps with |t*d - c| = r; d unit. False when the ray misses.
inline bool ray_sphere(const Vec3& c, double r, const Vec3& d, double& t_out) {
  const double proj = d.dot(c);
  const double disc = proj * proj - (c.dot(c) - r * r);
  if (disc < 0.0) return false;
  const double s = std::sqrt(disc);
  for (double t : {proj - s, proj + s})
    if (t > kRayEps) {
      t_out = t;
      return true;
    }
  return false;
}

// Nearest entry into the capsule solid around segment [a,b] with radius r.
inline bool ray_capsule(const Vec3& a, const Vec3& b, double r, const Vec3& d, double& t_out) {
  double best = std::numeric_limits<double>::infinity();
  double t = 0.0;
  const Vec3 ab = b - a;
  const double len = ab.norm();
  if (len > kRayEps) {
    const Vec3 k = ab * (1.0 / len);
    const Vec3 d_perp = d - k * d.dot(k);
    const Vec3 m = a * -1.0;  // origin relative to a
    const Vec3 m_perp = m - k * m.dot(k);
    const double qa = d_perp.dot(d_perp);
    if (qa > 1e-14) {
      const double qb = 2.0 * d_perp.dot(m_perp);
      const double qc = m_perp.dot(m_perp) - r * r;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        for (double tc : {(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)}) {
          if (tc <= kRayEps) continue;
          const double axial = (d * tc - a).dot(k);
          if (axial >= 0.0 && axial <= len && tc < best) best = tc;
          break;  // only the nearer in-slab root can be the entry
        }
      }
    }
  }
  if (ray_sphere(a, r, d, t) && t < best) best = t;
  if (ray_sphere(b, r, d, t) && t < best) best = t;
  if (!std::isfinite(best)) return false;
  t_out = best;
  return true;
}

// Nearest entry into an oriented ellipsoid: axes = local-to-camera rotation,
// radii = semi-axes. Solved in the axis-scaled local frame.
inline bool ray_ellipsoid(const Vec3& center, const Mat3& axes, const Vec3& radii, const Vec3& d,
                          double& t_out) {
  const Mat3 to_local = axes.transposed();
  const Vec3 dl = to_local * d;
  const Vec3 cl = to_local * center;
  const Vec3 u{dl.x / radii.x, dl.y / radii.y, dl.z / radii.z};
  const Vec3 w{cl.x / radii.x, cl.y / radii.y, cl.z / radii.z};
  const double qa = u.dot(u);
  const double qb = -2.0 * u.dot(w);
  const double qc = w.dot(w) - 1.0;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0 || qa < 1e-14) return false;
  const double s = std::sqrt(disc);
  for (double t : {(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)})
    if (t > kRayEps) {
      t_out = t;
      return true;
    }
  return false;
}

}  // namespace detail

// Analytic depth render: per pixel, the nearest ray intersection over every
// capsule and the palm ellipsoid, z-buffer style. Depth holds the camera-z
// of the hit in mm (0 where nothing is hit), the mask marks hits.
inline DepthImage render_depth(const SkeletonModel& model, const CapsuleModel& caps,
                               const HandPose& pose, const CameraPose& cam) {
  cam.validate();
  caps.validate(static_cast<int>(model.joints.size()));
  const std::vector<Vec3> world = joint_positions(model, pose);
  std::vector<Vec3> joints_cam(world.size());
  for (std::size_t i = 0; i < world.size(); ++i) joints_cam[i] = cam.to_camera(world[i]);

  const bool has_palm = caps.palm_a >= 0;
  Vec3 palm_center;
  Mat3 palm_axes = Mat3::identity();
  if (has_palm) {
    palm_center = (joints_cam[caps.palm_a] + joints_cam[caps.palm_b]) * 0.5;
    palm_axes = cam.rotation * pose.root_orientation;
  }

  DepthImage img(cam.width, cam.height);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Vec3 dir = Vec3{(u - cam.intrinsics.cx) / cam.intrinsics.fx,
                            (v - cam.intrinsics.cy) / cam.intrinsics.fy, 1.0}
                           .normalized();
      double best = std::numeric_limits<double>::infinity();
      double t = 0.0;
      for (const SkeletonCapsule& c : caps.capsules)
        if (detail::ray_capsule(joints_cam[c.a], joints_cam[c.b], c.radius, dir, t) && t < best)
          best = t;
      if (has_palm &&
          detail::ray_ellipsoid(palm_center, palm_axes, caps.palm_radii, dir, t) && t < best)
        best = t;
      if (std::isfinite(best)) {
        const double z = best * dir.z;
        if (z > 0.0) {
          img.at(u, v) = z;
          img.mask[img.index(u, v)] = 1;
        }
      }
    }
  }
  return img;
}

}  // namespace voxhand
