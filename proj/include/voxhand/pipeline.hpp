#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "voxhand/depth.hpp"
#include "voxhand/nets.hpp"
#include "voxhand/network.hpp"
#include "voxhand/skeleton.hpp"
#include "voxhand/tsdf.hpp"

namespace voxhand {

namespace detail {

// Re-throws the in-flight exception with a stage-tagged message, keeping the
// concrete error type so callers can still catch what they expect.
[[noreturn]] inline void rethrow_stage_tagged(const std::string& stage) {
  const auto tag = [&stage](const Error& e) { return "stage " + stage + ": " + e.what(); };
  try {
    throw;
  } catch (const EmptyForeground& e) {
    throw EmptyForeground(tag(e));
  } catch (const ShapeMismatch& e) {
    throw ShapeMismatch(tag(e));
  } catch (const DimensionMismatch& e) {
    throw DimensionMismatch(tag(e));
  } catch (const TapeMismatch& e) {
    throw TapeMismatch(tag(e));
  } catch (const InvalidFraction& e) {
    throw InvalidFraction(tag(e));
  } catch (const InvalidJointCount& e) {
    throw InvalidJointCount(tag(e));
  } catch (const EmptyDataset& e) {
    throw EmptyDataset(tag(e));
  } catch (const DegenerateFrame& e) {
    throw DegenerateFrame(tag(e));
  } catch (const MissingJoint& e) {
    throw MissingJoint(tag(e));
  } catch (const InvalidBounds& e) {
    throw InvalidBounds(tag(e));
  } catch (const ParseError& e) {
    throw ParseError(tag(e));
  } catch (const ChannelMismatch& e) {
    throw ChannelMismatch(tag(e));
  } catch (const InvalidScale& e) {
    throw InvalidScale(tag(e));
  } catch (const EmptyPoseSource& e) {
    throw EmptyPoseSource(tag(e));
  } catch (const JointMismatch& e) {
    throw JointMismatch(tag(e));
  } catch (const EmptyEvaluation& e) {
    throw EmptyEvaluation(tag(e));
  } catch (const FormatError& e) {
    throw FormatError(tag(e));
  } catch (const InvalidSpec& e) {
    throw InvalidSpec(tag(e));
  } catch (const StageError& e) {
    throw;  // already tagged by an inner stage
  } catch (const Error& e) {
    throw StageError(stage, e.what());
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace detail

// Depth to joints: center-of-mass, TSDF voxelization, optional volumetric
// refinement, then pose regression. Errors carry the failing stage's name.
inline JointSet run_pipeline(const DepthImage& depth, const CameraIntrinsics& intrinsics,
                             const VoxelGridSpec& grid, Network* refine_net, Network& pose_net,
                             const PoseTargetCodec& codec,
                             const std::vector<std::string>& joint_names) {
  TsdfVolume vol;
  try {
    const Vec3 com = compute_com(depth, intrinsics);
    vol = depth_to_tsdf(depth, intrinsics, com, grid);
  } catch (...) {
    detail::rethrow_stage_tagged("voxelize");
  }
  if (refine_net != nullptr) {
    try {
      vol = refine_tsdf(*refine_net, vol);
    } catch (...) {
      detail::rethrow_stage_tagged("refine");
    }
  }
  try {
    const std::vector<Vec3> joints = predict_joints(pose_net, vol, codec);
    if (joints.size() != joint_names.size())
      throw InvalidJointCount("pipeline: network emits " + std::to_string(joints.size()) +
                              " joints for " + std::to_string(joint_names.size()) + " labels");
    JointSet out;
    out.names = joint_names;
    out.positions = joints;
    out.validate();
    return out;
  } catch (...) {
    detail::rethrow_stage_tagged("predict");
  }
}

// Reduced-size pipeline settings sized so a full train/predict cycle runs in
// minutes on one desktop core. Values fixed by desk-scale experiments.
struct ToyPreset {
  VoxelGridSpec grid{24, 12.5, 50.0};
  int max_samples = 200;
  double head_gain = 0.01;  // final-layer init scale for stable regression

  int pose_conv_channels = 2;
  int pose_fc_width = 128;
  double pose_dropout = 0.0;
  double pose_learning_rate = 0.003;
  int pose_batch = 10;
  int pose_epochs = 500;

  int refine_base = 4;
  double refine_rate_init = 1e-6;
  double refine_rate_cap = 3e-4;
  int refine_epochs = 80;  // total epoch budget across all rounds
  int refine_batch = 5;
};

inline Network build_pose_net_toy(const ToyPreset& p, int joints) {
  return build_pose_net(joints, p.grid.resolution, p.pose_conv_channels, p.pose_fc_width,
                        p.pose_dropout);
}

inline std::vector<EpochStats> train_pose_toy(
    Network& net, const std::vector<Tensor>& inputs, const std::vector<Tensor>& targets,
    const ToyPreset& p, std::uint64_t seed,
    const std::function<bool(const EpochStats&)>& on_epoch = {}) {
  TrainConfig cfg;
  cfg.epochs = p.pose_epochs;
  cfg.batch_size = p.pose_batch;
  cfg.learning_rate = p.pose_learning_rate;
  cfg.seed = seed;
  return train_network(net, inputs, targets, cfg, on_epoch);
}

namespace detail {

inline double dataset_loss(Network& net, const std::vector<Tensor>& inputs,
                           const std::vector<Tensor>& targets) {
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<int> batched{1};
    for (int e : inputs[i].shape()) batched.push_back(e);
    const Tensor y = net.forward(inputs[i].reshaped(batched), DropoutMode::Infer);
    if (y.size() != targets[i].size())
      throw ShapeMismatch("dataset_loss: output size does not match the target");
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      const double d = y[k] - targets[i][k];
      s += d * d;
    }
    total += s;
  }
  return total / static_cast<double>(inputs.size());
}

}  // namespace detail

// Trains the volumetric net with a self-tuning rate: short fixed-size rounds,
// each run from a snapshot; a round that fails to lower the full-dataset loss
// is rolled back and the rate halved, otherwise the rate grows geometrically.
// A fixed rate is unusable here — the bounded output head goes irreversibly
// flat once a few large steps push it into its rails, and the step size that
// triggers this varies with dataset size and content. Two further guards:
// the output bias starts at the empty-space prior so the net never has to
// learn the dominant constant, and targets are pulled slightly inside the
// output range so the optimum stays reachable.
//
// History holds one entry per accepted round; `loss` is the full-dataset
// loss after that round and decreases strictly; `epoch` counts epochs spent
// so far, rolled-back rounds included. The callback may stop the loop early
// by returning false.
inline std::vector<EpochStats> train_refine_toy(
    Network& net, const std::vector<Tensor>& inputs, const std::vector<Tensor>& targets,
    const ToyPreset& p, std::uint64_t seed,
    const std::function<bool(const EpochStats&)>& on_round = {}) {
  if (inputs.empty()) throw EmptyDataset("train_refine_toy: no samples");
  constexpr double kTargetShrink = 0.995;
  constexpr int kRoundEpochs = 2;
  net.bias_of("out")[0] = std::atanh(0.9 * kTargetShrink);

  std::vector<Tensor> shrunk;
  shrunk.reserve(targets.size());
  for (const Tensor& t : targets) {
    Tensor s = t;
    for (std::size_t k = 0; k < s.size(); ++k) s[k] *= kTargetShrink;
    shrunk.push_back(std::move(s));
  }

  std::vector<EpochStats> history;
  double rate = p.refine_rate_init;
  double best = detail::dataset_loss(net, inputs, shrunk);
  int used = 0;
  std::uint64_t round_seed = seed;
  while (used < p.refine_epochs && rate >= 1e-9) {
    const Network snapshot = net;
    TrainConfig cfg;
    cfg.epochs = kRoundEpochs;
    cfg.batch_size = p.refine_batch;
    cfg.learning_rate = rate;
    cfg.seed = round_seed++;
    train_network(net, inputs, shrunk, cfg);
    used += kRoundEpochs;
    const double now = detail::dataset_loss(net, inputs, shrunk);
    if (!(now < best)) {
      net = snapshot;
      net.reset_momentum();  // a stale velocity would repeat the bad move at any rate
      rate *= 0.5;
      continue;
    }
    best = now;
    rate = std::min(rate * 1.3, p.refine_rate_cap);
    history.push_back({used - 1, now});
    if (on_round && !on_round(history.back())) break;
  }
  return history;
}

}  // namespace voxhand
