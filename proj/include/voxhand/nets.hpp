#pragma once

#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "voxhand/network.hpp"
#include "voxhand/tsdf.hpp"

namespace voxhand {

// Hourglass denoiser over TSDF volumes: two pool stages down, two uppool
// stages back, skip concatenations at matching resolutions, Tanh output so
// values stay in the normalized distance range. `base` is the stem width;
// the published layout uses 32.
inline Network build_refine_net(int base = 32) {
  if (base < 2 || base % 2 != 0)
    throw InvalidSpec("build_refine_net: base width must be even and >= 2");
  const int c = base;
  Network net;
  const Extent3 k{3, 3, 3}, s{1, 1, 1}, p{1, 1, 1};
  net.add(conv_layer("enc1a", 1, c, k, s, p));
  net.add(act_layer("enc1a_relu", Activation::ReLU));
  net.add(conv_layer("enc1b", c, c, k, s, p));
  net.add(act_layer("enc1b_relu", Activation::ReLU));
  net.add(save_skip_layer("skip1_save", "skip1"));
  net.add(maxpool_layer("pool1"));
  net.add(conv_layer("enc2a", c, 2 * c, k, s, p));
  net.add(act_layer("enc2a_relu", Activation::ReLU));
  net.add(conv_layer("enc2b", 2 * c, 2 * c, k, s, p));
  net.add(act_layer("enc2b_relu", Activation::ReLU));
  net.add(save_skip_layer("skip2_save", "skip2"));
  net.add(maxpool_layer("pool2"));
  net.add(conv_layer("mid_a", 2 * c, 4 * c, k, s, p));
  net.add(act_layer("mid_a_relu", Activation::ReLU));
  net.add(conv_layer("mid_b", 4 * c, 4 * c, k, s, p));
  net.add(act_layer("mid_b_relu", Activation::ReLU));
  net.add(uppool_layer("up1"));
  net.add(concat_skip_layer("cat1", "skip2"));
  net.add(conv_layer("dec1a", 6 * c, 2 * c, k, s, p));
  net.add(act_layer("dec1a_relu", Activation::ReLU));
  net.add(conv_layer("dec1b", 2 * c, 2 * c, k, s, p));
  net.add(act_layer("dec1b_relu", Activation::ReLU));
  net.add(uppool_layer("up2"));
  net.add(concat_skip_layer("cat2", "skip1"));
  net.add(conv_layer("dec2a", 3 * c, c, k, s, p));
  net.add(act_layer("dec2a_relu", Activation::ReLU));
  net.add(conv_layer("dec2b", c, c / 2, k, s, p));
  net.add(act_layer("dec2b_relu", Activation::ReLU));
  net.add(conv_layer("out", c / 2, 1, k, s, p));
  net.add(act_layer("out_tanh", Activation::Tanh));
  return net;
}

// Two 5^3 conv/pool stages into a three-layer fully connected head with
// dropout; the output is 3 normalized coordinates per joint.
inline Network build_pose_net(int joints, int resolution, int conv_channels = 8,
                              int fc_width = 2048, double dropout = 0.5) {
  if (joints < 1) throw InvalidSpec("build_pose_net: joints must be >= 1");
  if (resolution % 4 != 0)
    throw InvalidSpec("build_pose_net: resolution must be divisible by 4, got " +
                      std::to_string(resolution));
  const int c = conv_channels;
  const int side = resolution / 4;
  const int flat = c * side * side * side;
  Network net;
  const Extent3 k{5, 5, 5}, s{1, 1, 1}, p{2, 2, 2};
  net.add(conv_layer("conv1", 1, c, k, s, p));
  net.add(act_layer("conv1_relu", Activation::ReLU));
  net.add(maxpool_layer("pool1"));
  net.add(conv_layer("conv2", c, c, k, s, p));
  net.add(act_layer("conv2_relu", Activation::ReLU));
  net.add(maxpool_layer("pool2"));
  net.add(flatten_layer("flatten"));
  net.add(dense_layer("fc1", flat, fc_width));
  net.add(act_layer("fc1_relu", Activation::ReLU));
  net.add(dropout_layer("drop1", dropout));
  net.add(dense_layer("fc2", fc_width, fc_width));
  net.add(act_layer("fc2_relu", Activation::ReLU));
  net.add(dropout_layer("drop2", dropout));
  net.add(dense_layer("fc3", fc_width, 3 * joints));
  return net;
}

// Maps joint positions to and from the network's normalized output space:
// offsets from the volume origin, scaled by a fixed half extent in mm.
struct PoseTargetCodec {
  double half_extent = 150.0;

  Tensor encode(const std::vector<Vec3>& joints, const Vec3& com) const {
    Tensor t({static_cast<int>(joints.size()) * 3});
    for (std::size_t j = 0; j < joints.size(); ++j) {
      t[3 * j + 0] = (joints[j].x - com.x) / half_extent;
      t[3 * j + 1] = (joints[j].y - com.y) / half_extent;
      t[3 * j + 2] = (joints[j].z - com.z) / half_extent;
    }
    return t;
  }

  std::vector<Vec3> decode(const Tensor& row, const Vec3& com) const {
    if (row.size() % 3 != 0)
      throw ShapeMismatch("PoseTargetCodec: coordinate count not a multiple of 3");
    std::vector<Vec3> joints(row.size() / 3);
    for (std::size_t j = 0; j < joints.size(); ++j)
      joints[j] = {com.x + row[3 * j + 0] * half_extent,
                   com.y + row[3 * j + 1] * half_extent,
                   com.z + row[3 * j + 2] * half_extent};
    return joints;
  }
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 6;
  double learning_rate = 0.0001;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
};

// TSDF values as a single-channel rank-4 tensor and back.
inline Tensor tsdf_to_tensor(const TsdfVolume& vol) {
  const int r = vol.spec.resolution;
  Tensor t({1, r, r, r});
  std::copy(vol.values.begin(), vol.values.end(), t.data());
  return t;
}

inline TsdfVolume tensor_to_tsdf(const Tensor& t, const VoxelGridSpec& spec, const Vec3& origin) {
  TsdfVolume vol(spec, origin);
  if (t.size() != vol.values.size())
    throw ShapeMismatch("tensor_to_tsdf: element count " + std::to_string(t.size()) +
                        " != " + std::to_string(vol.values.size()));
  std::copy(t.data(), t.data() + t.size(), vol.values.begin());
  return vol;
}

// Minibatch SGD over paired sample lists. Items are stacked along a new
// batch axis; the epoch loss is the per-sample mean. The optional callback
// sees each epoch's stats and can stop training early by returning false.
inline std::vector<EpochStats> train_network(
    Network& net, const std::vector<Tensor>& inputs, const std::vector<Tensor>& targets,
    const TrainConfig& cfg, const std::function<bool(const EpochStats&)>& on_epoch = {}) {
  if (inputs.empty()) throw EmptyDataset("train_network: no training samples");
  if (inputs.size() != targets.size())
    throw ShapeMismatch("train_network: input/target counts differ");
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw InvalidSpec("train_network: epochs and batch size must be >= 1");
  const std::size_t n = inputs.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (!inputs[i].same_shape(inputs[0]) || !targets[i].same_shape(targets[0]))
      throw ShapeMismatch("train_network: ragged sample shapes");
  }

  net.set_dropout_seed(cfg.seed * 0x51e7f00dull + 1);
  std::vector<EpochStats> history;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t step = 0;

  const auto stack = [](const std::vector<Tensor>& items, const std::vector<std::size_t>& order_,
                        std::size_t lo, std::size_t hi) {
    const Tensor& head = items[order_[lo]];
    std::vector<int> shape{static_cast<int>(hi - lo)};
    shape.insert(shape.end(), head.shape().begin(), head.shape().end());
    Tensor batch(shape);
    const std::size_t item = head.size();
    for (std::size_t i = lo; i < hi; ++i)
      std::copy(items[order_[i]].data(), items[order_[i]].data() + item,
                batch.data() + (i - lo) * item);
    return batch;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(cfg.seed * 1000003ull + epoch);
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

    double epoch_loss = 0.0;
    for (std::size_t lo = 0; lo < n; lo += cfg.batch_size) {
      const std::size_t hi = std::min(n, lo + cfg.batch_size);
      const Tensor x = stack(inputs, order, lo, hi);
      const Tensor y = stack(targets, order, lo, hi);
      const Tensor pred = net.forward(x, DropoutMode::Train, ++step);
      const auto [loss, grad] = l2_loss(pred, y);
      net.backward(grad);
      net.sgd_step(cfg.learning_rate, cfg.momentum);
      epoch_loss += loss * static_cast<double>(hi - lo);
    }
    EpochStats stats{epoch, epoch_loss / static_cast<double>(n)};
    history.push_back(stats);
    if (on_epoch && !on_epoch(stats)) break;
  }
  return history;
}

// Inference helpers. Both run the net with dropout disabled.
inline std::vector<Vec3> predict_joints(Network& net, const TsdfVolume& vol,
                                        const PoseTargetCodec& codec) {
  const Tensor x = tsdf_to_tensor(vol);
  const int r = vol.spec.resolution;
  const Tensor out = net.forward(x.reshaped({1, 1, r, r, r}), DropoutMode::Infer);
  return codec.decode(out.reshaped({static_cast<int>(out.size())}), vol.origin);
}

inline TsdfVolume refine_tsdf(Network& net, const TsdfVolume& vol) {
  const Tensor x = tsdf_to_tensor(vol);
  const int r = vol.spec.resolution;
  const Tensor out = net.forward(x.reshaped({1, 1, r, r, r}), DropoutMode::Infer);
  return tensor_to_tsdf(out, vol.spec, vol.origin);
}

}  // namespace voxhand
