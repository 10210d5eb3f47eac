#pragma once

#include <cstdint>
#include <vector>

#include "voxhand/common.hpp"
#include "voxhand/vecmath.hpp"

namespace voxhand {

// Pinhole model. Depth values are z-coordinates (mm), not ray lengths.
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx_, double fy_, double cx_, double cy_)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_) {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(cx) || !std::isfinite(cy))
      throw InvalidSpec("CameraIntrinsics: fx, fy must be > 0 and cx, cy finite");
  }

  // Pixel (u,v) at depth z -> camera-frame point, mm.
  Vec3 backproject(double u, double v, double z) const {
    return {(u - cx) * z / fx, (v - cy) * z / fy, z};
  }

  // Camera-frame point -> pixel coordinates (requires p.z > 0).
  void project(const Vec3& p, double& u, double& v) const {
    u = fx * p.x / p.z + cx;
    v = fy * p.y / p.z + cy;
  }
};

// Per-pixel range image in mm; 0 encodes missing depth. The mask marks
// foreground pixels and has the same dimensions as the depth plane.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> depth;   // row-major, height rows of width
  std::vector<std::uint8_t> mask;

  DepthImage() = default;
  DepthImage(int w, int h)
      : width(w), height(h),
        depth(static_cast<std::size_t>(w) * h, 0.0),
        mask(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width + u;
  }
  double at(int u, int v) const { return depth[index(u, v)]; }
  double& at(int u, int v) { return depth[index(u, v)]; }
  bool masked(int u, int v) const { return mask[index(u, v)] != 0; }
  bool in_bounds(int u, int v) const {
    return u >= 0 && v >= 0 && u < width && v < height;
  }

  // Foreground sample usable for geometry: masked and non-missing.
  bool foreground(int u, int v) const { return masked(u, v) && at(u, v) > 0.0; }
};

}  // namespace voxhand
