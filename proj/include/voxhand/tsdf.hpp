#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "voxhand/depth.hpp"

namespace voxhand {

// Cubic voxel grid description. Defaults follow the 60^3 x 5mm layout with
// 50mm truncation, spanning 300mm per axis.
struct VoxelGridSpec {
  int resolution = 60;     // voxels per axis
  double voxel_size = 5.0; // mm per voxel edge
  double truncation = 50.0;

  void validate() const {
    if (resolution < 2) throw InvalidSpec("VoxelGridSpec: resolution must be >= 2");
    if (!(voxel_size > 0.0)) throw InvalidSpec("VoxelGridSpec: voxel_size must be > 0");
    if (!(truncation > 0.0)) throw InvalidSpec("VoxelGridSpec: truncation must be > 0");
  }

  double extent() const { return resolution * voxel_size; }
};

// COM-centered truncated signed distance volume. Values are normalized by
// the truncation, so they live in [-1, 1]: positive on the camera side of
// the surface, negative behind it, +1 where no depth evidence exists.
struct TsdfVolume {
  VoxelGridSpec spec;
  Vec3 origin;  // COM position in camera coordinates, mm
  std::vector<double> values;  // resolution^3, x-fastest

  TsdfVolume() = default;
  TsdfVolume(const VoxelGridSpec& s, const Vec3& o)
      : spec(s), origin(o),
        values(static_cast<std::size_t>(s.resolution) * s.resolution * s.resolution, 1.0) {}

  std::size_t index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(iz) * spec.resolution * spec.resolution +
           static_cast<std::size_t>(iy) * spec.resolution + ix;
  }
  double at(int ix, int iy, int iz) const { return values[index(ix, iy, iz)]; }
  double& at(int ix, int iy, int iz) { return values[index(ix, iy, iz)]; }

  // Center of voxel (ix,iy,iz) in camera coordinates. The grid is centered
  // at the origin with axes parallel to the camera axes.
  Vec3 voxel_center(int ix, int iy, int iz) const {
    const double half = spec.resolution / 2.0;
    return origin + Vec3{(ix + 0.5 - half) * spec.voxel_size,
                         (iy + 0.5 - half) * spec.voxel_size,
                         (iz + 0.5 - half) * spec.voxel_size};
  }
};

// One camera-frame point (mm) per masked, non-missing pixel.
inline std::vector<Vec3> backproject(const DepthImage& img, const CameraIntrinsics& k) {
  std::vector<Vec3> points;
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u)
      if (img.foreground(u, v))
        points.push_back(k.backproject(u, v, img.at(u, v)));
  if (points.empty())
    throw EmptyForeground("backproject: no masked pixel has depth > 0");
  return points;
}

// Arithmetic mean of the backprojected foreground cloud.
inline Vec3 compute_com(const DepthImage& img, const CameraIntrinsics& k) {
  const std::vector<Vec3> points = backproject(img, k);
  Vec3 sum;
  for (const Vec3& p : points) sum += p;
  return sum / static_cast<double>(points.size());
}

// Projective TSDF of a masked depth image on a grid centered at com.
// Each voxel center projects to its nearest pixel; the stored value is
// clamp((depth - z) / truncation, -1, 1). Voxels that project outside the
// image, onto missing depth, onto background, or that lie behind the
// camera store +1.
inline TsdfVolume depth_to_tsdf(const DepthImage& img, const CameraIntrinsics& k,
                                const Vec3& com, const VoxelGridSpec& spec) {
  spec.validate();
  TsdfVolume vol(spec, com);
  const int res = spec.resolution;
  for (int iz = 0; iz < res; ++iz)
    for (int iy = 0; iy < res; ++iy)
      for (int ix = 0; ix < res; ++ix) {
        const Vec3 c = vol.voxel_center(ix, iy, iz);
        double value = 1.0;
        if (c.z > 0.0) {
          double u, v;
          k.project(c, u, v);
          const int pu = static_cast<int>(std::lround(u));
          const int pv = static_cast<int>(std::lround(v));
          if (img.in_bounds(pu, pv) && img.foreground(pu, pv)) {
            const double d = img.at(pu, pv) - c.z;
            value = std::clamp(d / spec.truncation, -1.0, 1.0);
          }
        }
        vol.at(ix, iy, iz) = value;
      }
  return vol;
}

}  // namespace voxhand
