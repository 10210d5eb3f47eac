#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "voxhand/common.hpp"

namespace voxhand {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  double squared_norm() const { return dot(*this); }
  Vec3 normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n};
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Column-major semantics: m[r][c], columns are the images of the basis.
struct Mat3 {
  std::array<std::array<double, 3>, 3> m{};

  static Mat3 identity() {
    Mat3 r;
    r.m[0][0] = r.m[1][1] = r.m[2][2] = 1.0;
    return r;
  }

  static Mat3 from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
    Mat3 r;
    r.m[0][0] = c0.x; r.m[1][0] = c0.y; r.m[2][0] = c0.z;
    r.m[0][1] = c1.x; r.m[1][1] = c1.y; r.m[2][1] = c1.z;
    r.m[0][2] = c2.x; r.m[1][2] = c2.y; r.m[2][2] = c2.z;
    return r;
  }

  static Mat3 rotation_x(double a) {
    Mat3 r = identity();
    const double c = std::cos(a), s = std::sin(a);
    r.m[1][1] = c; r.m[1][2] = -s;
    r.m[2][1] = s; r.m[2][2] = c;
    return r;
  }

  static Mat3 rotation_y(double a) {
    Mat3 r = identity();
    const double c = std::cos(a), s = std::sin(a);
    r.m[0][0] = c; r.m[0][2] = s;
    r.m[2][0] = -s; r.m[2][2] = c;
    return r;
  }

  static Mat3 rotation_z(double a) {
    Mat3 r = identity();
    const double c = std::cos(a), s = std::sin(a);
    r.m[0][0] = c; r.m[0][1] = -s;
    r.m[1][0] = s; r.m[1][1] = c;
    return r;
  }

  Vec3 column(int c) const { return {m[0][c], m[1][c], m[2][c]}; }

  Vec3 operator*(const Vec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += m[i][k] * o.m[k][j];
        r.m[i][j] = s;
      }
    return r;
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
  }

  double determinant() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  }

  // max |(R^T R - I)_ij|, the orthonormality defect.
  double orthonormality_error() const {
    const Mat3 g = transposed() * (*this);
    double e = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        e = std::max(e, std::abs(g.m[i][j] - (i == j ? 1.0 : 0.0)));
    return e;
  }
};

// 4x4 homogeneous rotation-translation matrix; bottom row fixed (0,0,0,1).
struct RigidTransform {
  Mat3 rotation = Mat3::identity();
  Vec3 translation;

  static RigidTransform translate(const Vec3& t) {
    RigidTransform r;
    r.translation = t;
    return r;
  }

  static RigidTransform rotate(const Mat3& rot) {
    RigidTransform r;
    r.rotation = rot;
    return r;
  }

  RigidTransform operator*(const RigidTransform& o) const {
    RigidTransform r;
    r.rotation = rotation * o.rotation;
    r.translation = rotation * o.translation + translation;
    return r;
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  RigidTransform inverse() const {
    RigidTransform r;
    r.rotation = rotation.transposed();
    r.translation = -(r.rotation * translation);
    return r;
  }
};

// Intrinsic Z-X-Y Euler composition: R = Rz(a) * Rx(b) * Ry(c).
inline Mat3 euler_zxy_to_matrix(double az, double ax, double ay) {
  return Mat3::rotation_z(az) * Mat3::rotation_x(ax) * Mat3::rotation_y(ay);
}

// Inverse of euler_zxy_to_matrix. Near the |sin(ax)| = 1 singularity only
// az + ay is determined; ay is pinned to zero there.
inline void matrix_to_euler_zxy(const Mat3& r, double& az, double& ax, double& ay) {
  const double sb = std::clamp(r.m[2][1], -1.0, 1.0);
  ax = std::asin(sb);
  if (std::abs(sb) < 1.0 - 1e-9) {
    az = std::atan2(-r.m[0][1], r.m[1][1]);
    ay = std::atan2(-r.m[2][0], r.m[2][2]);
  } else {
    az = std::atan2(r.m[1][0], r.m[0][0]);
    ay = 0.0;
  }
}

}  // namespace voxhand
