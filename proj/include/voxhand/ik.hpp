#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "voxhand/kinematics.hpp"
#include "voxhand/pso.hpp"

namespace voxhand {

enum class IkCost { MeanDistance, MeanSquaredDistance };

struct IkResult {
  HandPose pose;
  double residual = 0.0;  // mean joint distance to the target, mm
};

namespace detail {

// One independently solvable group of articulation parameters: a subtree
// hanging off the root whose angles move only its own annotated joints.
struct IkBlock {
  std::vector<int> joints;                    // model joint indices, topological order
  std::vector<int> local_parent;              // index into `joints`, -1 = root
  std::vector<std::pair<double, double>> bounds;  // per angle
  std::vector<int> angle_slot;                // global angle index per block angle
  std::vector<int> target_local;              // local joint index per annotated target
  std::vector<Vec3> target_pos;               // matching target positions
};

inline std::vector<IkBlock> ik_blocks(const SkeletonModel& model, const JointSet& target) {
  std::vector<IkBlock> blocks;
  const bool root_has_dofs = !model.joints[0].dofs.empty();
  // Subtree roots: every child of the root, or the root itself when it owns
  // angle parameters (no decomposition is valid then).
  std::vector<int> subtree_of(model.joints.size(), -1);
  if (root_has_dofs) {
    for (std::size_t i = 0; i < model.joints.size(); ++i) subtree_of[i] = 0;
  } else {
    for (std::size_t i = 1; i < model.joints.size(); ++i)
      subtree_of[i] = model.joints[i].parent == 0 ? static_cast<int>(i)
                                                  : subtree_of[model.joints[i].parent];
  }

  std::vector<int> roots;
  for (std::size_t i = 0; i < model.joints.size(); ++i)
    if (subtree_of[i] == static_cast<int>(i) || (root_has_dofs && i == 0)) {
      if (root_has_dofs && i > 0) continue;
      roots.push_back(static_cast<int>(i));
    }

  for (int r : roots) {
    IkBlock block;
    std::vector<int> local_of(model.joints.size(), -1);
    for (std::size_t i = (root_has_dofs ? 0 : static_cast<std::size_t>(r));
         i < model.joints.size(); ++i) {
      if (subtree_of[i] != (root_has_dofs ? 0 : r)) continue;
      local_of[i] = static_cast<int>(block.joints.size());
      block.joints.push_back(static_cast<int>(i));
      const int p = model.joints[i].parent;
      block.local_parent.push_back(p < 0 ? -1 : local_of[p]);
      for (const JointDof& d : model.joints[i].dofs) {
        block.bounds.emplace_back(d.lo, d.hi);
        block.angle_slot.push_back(model.angle_offset(static_cast<int>(i)) +
                                   static_cast<int>(&d - model.joints[i].dofs.data()));
      }
    }
    if (block.bounds.empty()) continue;
    for (const auto& [label, idx] : model.annotations) {
      if (local_of[idx] < 0) continue;
      block.target_local.push_back(local_of[idx]);
      block.target_pos.push_back(target.at(label));
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

inline double ik_block_cost(const SkeletonModel& model, const IkBlock& block,
                            const RigidTransform& root, const std::vector<double>& x,
                            IkCost kind) {
  std::vector<RigidTransform> world(block.joints.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < block.joints.size(); ++i) {
    const SkeletonJoint& j = model.joints[block.joints[i]];
    Mat3 local = Mat3::identity();
    for (const JointDof& d : j.dofs) local = local * axis_rotation(d.axis, x[k++]);
    const RigidTransform step{local, j.offset};
    world[i] = (block.local_parent[i] < 0 ? root : world[block.local_parent[i]]) * step;
  }
  double acc = 0.0;
  for (std::size_t t = 0; t < block.target_local.size(); ++t) {
    const double d = (world[block.target_local[t]].translation - block.target_pos[t]).norm();
    acc += kind == IkCost::MeanDistance ? d : d * d;
  }
  return block.target_local.empty() ? 0.0 : acc / static_cast<double>(block.target_local.size());
}

}  // namespace detail

// Pose recovery from labeled joint positions. The root transform is pinned
// by the target (palm position, wrist/knuckle frame); the articulation is
// found by particle swarms, one per root-child subtree — their angle sets
// move disjoint annotated joints, so the blocks are exactly independent.
// Each swarm carries the rest pose as one seed particle.
inline IkResult ik_solve(const SkeletonModel& model, const JointSet& target, const PsoConfig& cfg,
                         IkCost kind = IkCost::MeanDistance) {
  for (const auto& entry : model.annotations) (void)target.at(entry.first);  // MissingJoint check
  const Vec3 root_pos = target.at(model.frame_labels[0]);
  const Mat3 root_rot = root_frame_from_joints(target, model.frame_labels);
  const RigidTransform root{root_rot, root_pos};

  HandPose pose = rest_pose(model, root_pos, root_rot);
  const std::vector<detail::IkBlock> blocks = detail::ik_blocks(model, target);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const detail::IkBlock& block = blocks[b];
    PsoConfig block_cfg = cfg;
    block_cfg.seed = cfg.seed + b;
    const std::vector<std::vector<double>> seeds{std::vector<double>(block.bounds.size(), 0.0)};
    const PsoResult r = pso_minimize(
        [&](const std::vector<double>& x) {
          return detail::ik_block_cost(model, block, root, x, kind);
        },
        block.bounds, block_cfg, seeds);
    for (std::size_t k = 0; k < block.angle_slot.size(); ++k)
      pose.angles[block.angle_slot[k]] = r.best[k];
  }
  pose = clamp_pose(model, pose);

  const JointSet fit = forward_kinematics(model, pose);
  double acc = 0.0;
  for (std::size_t i = 0; i < fit.names.size(); ++i)
    acc += (fit.positions[i] - target.at(fit.names[i])).norm();
  return {std::move(pose), acc / static_cast<double>(fit.names.size())};
}

}  // namespace voxhand
