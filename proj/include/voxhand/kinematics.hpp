#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "voxhand/skeleton.hpp"
#include "voxhand/vecmath.hpp"

namespace voxhand {

inline Mat3 axis_rotation(char axis, double angle) {
  switch (axis) {
    case 'x': return Mat3::rotation_x(angle);
    case 'y': return Mat3::rotation_y(angle);
    default: return Mat3::rotation_z(angle);
  }
}

// World transform of every model joint: the root rigid transform chained
// with each joint's fixed offset and its local Euler rotations composed in
// dof order.
inline std::vector<RigidTransform> forward_transforms(const SkeletonModel& model,
                                                      const HandPose& pose) {
  pose.validate(model);
  std::vector<RigidTransform> world(model.joints.size());
  int angle_at = 0;
  for (std::size_t i = 0; i < model.joints.size(); ++i) {
    const SkeletonJoint& j = model.joints[i];
    Mat3 local = Mat3::identity();
    for (const JointDof& d : j.dofs) local = local * axis_rotation(d.axis, pose.angles[angle_at++]);
    const RigidTransform step{local, j.offset};
    if (j.parent < 0) {
      world[i] = RigidTransform{pose.root_orientation, pose.root_position} * step;
    } else {
      world[i] = world[j.parent] * step;
    }
  }
  return world;
}

inline std::vector<Vec3> joint_positions(const SkeletonModel& model, const HandPose& pose) {
  const std::vector<RigidTransform> world = forward_transforms(model, pose);
  std::vector<Vec3> out(world.size());
  for (std::size_t i = 0; i < world.size(); ++i) out[i] = world[i].translation;
  return out;
}

// Positions of the annotated joints, labeled and ordered per the dataset.
inline JointSet forward_kinematics(const SkeletonModel& model, const HandPose& pose) {
  const std::vector<Vec3> all = joint_positions(model, pose);
  JointSet out;
  out.names.reserve(model.annotations.size());
  out.positions.reserve(model.annotations.size());
  for (const auto& [label, idx] : model.annotations) {
    out.names.push_back(label);
    out.positions.push_back(all[idx]);
  }
  return out;
}

// Root orientation from four labeled joints (palm center, two wrist points,
// middle knuckle by default): r_x = (a−c)×(b−c), r_z = m−c orthogonalized
// against r_x, r_y = r_z×r_x. Columns are unit length and the determinant
// is +1 by construction.
inline Mat3 root_frame_from_joints(const JointSet& joints,
                                   const std::array<std::string, 4>& labels = {"C", "W1", "W2",
                                                                               "M1"}) {
  const Vec3 c = joints.at(labels[0]);
  const Vec3 a = joints.at(labels[1]);
  const Vec3 b = joints.at(labels[2]);
  const Vec3 m = joints.at(labels[3]);
  Vec3 rx = (a - c).cross(b - c);
  if (rx.norm() < 1e-6) throw DegenerateFrame("root frame: wrist cross product is degenerate");
  rx = rx.normalized();
  Vec3 rz = m - c;
  rz = rz - rx * rz.dot(rx);
  if (rz.norm() < 1e-6)
    throw DegenerateFrame("root frame: palm axis is degenerate after orthogonalization");
  rz = rz.normalized();
  const Vec3 ry = rz.cross(rx);
  return Mat3::from_columns(rx, ry, rz);
}

// Canonical rest offsets of annotated joints relative to their nearest
// annotated ancestor: palm-adjacent joints keep their full displacement
// expressed in the root frame, finger-chain joints are straightened onto
// the local z axis with only their length retained.
inline std::map<std::string, Vec3> relative_offsets_from_joints(const SkeletonModel& model,
                                                                const JointSet& joints,
                                                                const Mat3& root) {
  std::map<std::string, Vec3> out;
  const int root_joint = 0;
  for (const auto& [label, idx] : model.annotations) {
    if (idx == root_joint) continue;
    const int anc = model.mapped_ancestor(idx);
    if (anc < 0)
      throw MissingJoint("relative offsets: " + label + " has no annotated ancestor");
    std::string anc_label;
    for (const auto& [l, j] : model.annotations)
      if (j == anc) anc_label = l;
    const Vec3 d = joints.at(label) - joints.at(anc_label);
    if (anc == root_joint) {
      out[label] = root.transposed() * d;
    } else {
      out[label] = Vec3{0.0, 0.0, d.norm()};
    }
  }
  return out;
}

// Links between annotated joints (child label, ancestor label), skipping
// the root itself. These are the bones whose lengths get estimated.
inline std::vector<std::pair<std::string, std::string>> bone_links(const SkeletonModel& model) {
  std::vector<std::pair<std::string, std::string>> links;
  for (const auto& [label, idx] : model.annotations) {
    if (idx == 0) continue;
    const int anc = model.mapped_ancestor(idx);
    if (anc < 0) continue;
    for (const auto& [l, j] : model.annotations)
      if (j == anc) links.emplace_back(label, l);
  }
  return links;
}

struct BoneLength {
  std::string joint;      // child label
  std::string ancestor;   // ancestor label
  double mean = 0.0;      // mm
  double sd = 0.0;        // sample standard deviation, 0 for a single frame
};

// Per-link mean and spread of inter-joint distances across a dataset of
// labeled frames.
inline std::vector<BoneLength> estimate_bone_lengths(const std::vector<JointSet>& dataset,
                                                     const SkeletonModel& model) {
  if (dataset.empty()) throw EmptyDataset("estimate_bone_lengths: no frames");
  std::vector<BoneLength> out;
  for (const auto& [child, ancestor] : bone_links(model)) {
    BoneLength b;
    b.joint = child;
    b.ancestor = ancestor;
    std::vector<double> lengths;
    lengths.reserve(dataset.size());
    for (const JointSet& frame : dataset)
      lengths.push_back((frame.at(child) - frame.at(ancestor)).norm());
    double sum = 0.0;
    for (double v : lengths) sum += v;
    b.mean = sum / static_cast<double>(lengths.size());
    if (lengths.size() > 1) {
      double ss = 0.0;
      for (double v : lengths) ss += (v - b.mean) * (v - b.mean);
      b.sd = std::sqrt(ss / static_cast<double>(lengths.size() - 1));
    }
    out.push_back(std::move(b));
  }
  return out;
}

// Angles pushed into their limit ranges; the root transform is untouched.
inline HandPose clamp_pose(const SkeletonModel& model, const HandPose& pose) {
  HandPose out = pose;
  if (static_cast<int>(out.angles.size()) != model.angle_count())
    throw DimensionMismatch("clamp_pose: angle count mismatch");
  int k = 0;
  for (const SkeletonJoint& j : model.joints)
    for (const JointDof& d : j.dofs) {
      out.angles[k] = std::clamp(out.angles[k], d.lo, d.hi);
      ++k;
    }
  return out;
}

// A pose with zero articulation at the given root placement.
inline HandPose rest_pose(const SkeletonModel& model, const Vec3& position = {},
                          const Mat3& orientation = Mat3::identity()) {
  HandPose pose;
  pose.root_position = position;
  pose.root_orientation = orientation;
  pose.angles.assign(model.angle_count(), 0.0);
  return pose;
}

// Uniform random pose within limits: articulation from the limit box, root
// orientation from random Euler angles, root position from the given box.
inline HandPose random_pose(const SkeletonModel& model, Rng& rng, const Vec3& pos_lo = {},
                            const Vec3& pos_hi = {}) {
  HandPose pose;
  pose.root_position = {rng.uniform(pos_lo.x, pos_hi.x), rng.uniform(pos_lo.y, pos_hi.y),
                        rng.uniform(pos_lo.z, pos_hi.z)};
  pose.root_orientation = euler_zxy_to_matrix(rng.uniform(-M_PI, M_PI), rng.uniform(-M_PI, M_PI),
                                              rng.uniform(-M_PI, M_PI));
  pose.angles.reserve(model.angle_count());
  for (const SkeletonJoint& j : model.joints)
    for (const JointDof& d : j.dofs) pose.angles.push_back(rng.uniform(d.lo, d.hi));
  return pose;
}

}  // namespace voxhand
