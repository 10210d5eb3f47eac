#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "voxhand/capsule.hpp"
#include "voxhand/depth.hpp"
#include "voxhand/kinematics.hpp"
#include "voxhand/skeleton.hpp"

namespace voxhand {

struct SynthConfig {
  int count = 0;
  std::uint64_t seed = 0;
  std::vector<double> scales{0.85, 0.95, 1.0, 1.1, 1.2};
  double azimuth_range = M_PI / 3.0;          // +/- around the vertical axis
  double elevation_range = M_PI * 40.0 / 180.0;
  double distance_lo = 400.0;                 // camera-to-root range, mm
  double distance_hi = 900.0;
  int image_size = 128;
  double focal = 160.0;
  bool corrupt = false;                       // also emit a holed copy
  int hole_count = 6;
  double hole_radius_lo = 2.0;                // hole semi-axes, px
  double hole_radius_hi = 10.0;

  void validate() const {
    if (count < 0) throw InvalidSpec("SynthConfig: count must be >= 0");
    if (scales.empty()) throw InvalidSpec("SynthConfig: scale list is empty");
    for (double s : scales)
      if (!(s > 0.0) || !std::isfinite(s)) throw InvalidSpec("SynthConfig: bad scale");
    if (!(distance_lo > 0.0) || distance_hi < distance_lo)
      throw InvalidSpec("SynthConfig: bad distance range");
    if (image_size <= 0 || !(focal > 0.0)) throw InvalidSpec("SynthConfig: bad camera");
    if (azimuth_range < 0.0 || elevation_range < 0.0 || elevation_range >= M_PI / 2.0)
      throw InvalidSpec("SynthConfig: bad orbit range");
    if (corrupt && (hole_count <= 0 || !(hole_radius_lo > 0.0) ||
                    hole_radius_hi < hole_radius_lo))
      throw InvalidSpec("SynthConfig: bad hole parameters");
  }
};

struct SynthSample {
  DepthImage depth;       // clean render
  DepthImage corrupted;   // holed copy; empty unless corruption is on
  JointSet joints;        // annotated joints, camera frame, mm
  HandPose pose;
  double scale = 1.0;
  CameraPose camera;
};

// Camera orbiting `target`: spherical offset by azimuth/elevation/distance,
// then a look-at with world up (0,1,0). Forward is camera +z.
inline CameraPose orbit_camera(const Vec3& target, double azimuth, double elevation,
                               double distance, int image_size, double focal) {
  const Vec3 center = target + Vec3{std::sin(azimuth) * std::cos(elevation), std::sin(elevation),
                                    -std::cos(azimuth) * std::cos(elevation)} *
                                   distance;
  const Vec3 z_axis = (target - center).normalized();
  const Vec3 x_axis = Vec3{0.0, 1.0, 0.0}.cross(z_axis).normalized();
  const Vec3 y_axis = z_axis.cross(x_axis);
  CameraPose cam;
  cam.rotation = Mat3::from_columns(x_axis, y_axis, z_axis).transposed();
  cam.translation = -(cam.rotation * center);
  cam.width = image_size;
  cam.height = image_size;
  cam.intrinsics = CameraIntrinsics(focal, focal, image_size / 2.0, image_size / 2.0);
  return cam;
}

// Punch `count` rotated elliptical holes of missing depth into a copy.
inline DepthImage corrupt_depth(const DepthImage& img, Rng& rng, int count, double radius_lo,
                                double radius_hi) {
  DepthImage out = img;
  for (int h = 0; h < count; ++h) {
    const double cx = rng.uniform(0.0, img.width);
    const double cy = rng.uniform(0.0, img.height);
    const double ra = rng.uniform(radius_lo, radius_hi);
    const double rb = rng.uniform(radius_lo, radius_hi);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    const double ca = std::cos(angle), sa = std::sin(angle);
    const int reach = static_cast<int>(std::ceil(std::max(ra, rb)));
    for (int v = static_cast<int>(cy) - reach; v <= static_cast<int>(cy) + reach; ++v)
      for (int u = static_cast<int>(cx) - reach; u <= static_cast<int>(cx) + reach; ++u) {
        if (!out.in_bounds(u, v)) continue;
        const double du = u - cx, dv = v - cy;
        const double ex = (du * ca + dv * sa) / ra;
        const double ey = (-du * sa + dv * ca) / rb;
        if (ex * ex + ey * ey <= 1.0) {
          out.at(u, v) = 0.0;
          out.mask[out.index(u, v)] = 0;
        }
      }
  }
  return out;
}

// Deterministic dataset: sample i draws from Rng(seed + i) in a fixed order
// (pose, scale, azimuth, elevation, distance, hole parameters).
inline std::vector<SynthSample> generate_synthetic_dataset(const SkeletonModel& model,
                                                           const std::vector<HandPose>& poses,
                                                           const SynthConfig& cfg) {
  cfg.validate();
  if (poses.empty()) throw EmptyPoseSource("generate_synthetic_dataset: no source poses");
  std::vector<SynthSample> out;
  out.reserve(cfg.count);
  for (int i = 0; i < cfg.count; ++i) {
    Rng rng(cfg.seed + static_cast<std::uint64_t>(i));
    SynthSample s;
    s.pose = poses[rng.uniform_index(poses.size())];
    s.scale = cfg.scales[rng.uniform_index(cfg.scales.size())];
    const double azimuth = rng.uniform(-cfg.azimuth_range, cfg.azimuth_range);
    const double elevation = rng.uniform(-cfg.elevation_range, cfg.elevation_range);
    const double distance = rng.uniform(cfg.distance_lo, cfg.distance_hi);

    const SkeletonModel sized = scaled(model, s.scale);
    const std::vector<Vec3> world = joint_positions(sized, s.pose);
    s.camera = orbit_camera(world[0], azimuth, elevation, distance, cfg.image_size, cfg.focal);
    s.depth = render_depth(sized, capsule_model_of(sized), s.pose, s.camera);

    const JointSet annotated = forward_kinematics(sized, s.pose);
    s.joints.names = annotated.names;
    s.joints.positions.reserve(annotated.positions.size());
    for (const Vec3& p : annotated.positions) s.joints.positions.push_back(s.camera.to_camera(p));

    if (cfg.corrupt)
      s.corrupted = corrupt_depth(s.depth, rng, cfg.hole_count, cfg.hole_radius_lo,
                                  cfg.hole_radius_hi);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace voxhand
