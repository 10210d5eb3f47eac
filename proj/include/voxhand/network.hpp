#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "voxhand/binio.hpp"
#include "voxhand/layers.hpp"

namespace voxhand {

enum class LayerKind { Conv, MaxPool, Uppool, Dense, Flatten, Act, Dropout, SaveSkip, ConcatSkip };

// One node of a feed-forward graph. A layer list plus named skip slots is
// enough to express both hourglass nets and the plain conv/dense stack.
struct LayerDesc {
  LayerKind kind{};
  std::string name;
  int in_channels = 0, out_channels = 0;       // Conv
  Extent3 kernel{1, 1, 1};
  Extent3 stride{1, 1, 1};
  Extent3 padding{0, 0, 0};
  Extent3 factor{2, 2, 2};                     // MaxPool window / Uppool factor
  int in_features = 0, out_features = 0;       // Dense
  Activation activation = Activation::ReLU;    // Act
  double fraction = 0.5;                       // Dropout
  std::string slot;                            // SaveSkip / ConcatSkip
};

inline LayerDesc conv_layer(std::string name, int in, int out, Extent3 kernel,
                            Extent3 stride = {1, 1, 1}, Extent3 padding = {0, 0, 0}) {
  LayerDesc d;
  d.kind = LayerKind::Conv;
  d.name = std::move(name);
  d.in_channels = in;
  d.out_channels = out;
  d.kernel = kernel;
  d.stride = stride;
  d.padding = padding;
  return d;
}

inline LayerDesc maxpool_layer(std::string name, Extent3 window = {2, 2, 2}) {
  LayerDesc d;
  d.kind = LayerKind::MaxPool;
  d.name = std::move(name);
  d.factor = window;
  return d;
}

inline LayerDesc uppool_layer(std::string name, Extent3 factor = {2, 2, 2}) {
  LayerDesc d;
  d.kind = LayerKind::Uppool;
  d.name = std::move(name);
  d.factor = factor;
  return d;
}

inline LayerDesc dense_layer(std::string name, int in, int out) {
  LayerDesc d;
  d.kind = LayerKind::Dense;
  d.name = std::move(name);
  d.in_features = in;
  d.out_features = out;
  return d;
}

inline LayerDesc flatten_layer(std::string name) {
  LayerDesc d;
  d.kind = LayerKind::Flatten;
  d.name = std::move(name);
  return d;
}

inline LayerDesc act_layer(std::string name, Activation a) {
  LayerDesc d;
  d.kind = LayerKind::Act;
  d.name = std::move(name);
  d.activation = a;
  return d;
}

inline LayerDesc dropout_layer(std::string name, double fraction) {
  LayerDesc d;
  d.kind = LayerKind::Dropout;
  d.name = std::move(name);
  d.fraction = fraction;
  return d;
}

inline LayerDesc save_skip_layer(std::string name, std::string slot) {
  LayerDesc d;
  d.kind = LayerKind::SaveSkip;
  d.name = std::move(name);
  d.slot = std::move(slot);
  return d;
}

inline LayerDesc concat_skip_layer(std::string name, std::string slot) {
  LayerDesc d;
  d.kind = LayerKind::ConcatSkip;
  d.name = std::move(name);
  d.slot = std::move(slot);
  return d;
}

// Feed-forward network with taped forward, full backward, and momentum SGD.
// Deterministic given the init seed and the per-step dropout seeds.
class Network {
 public:
  void add(const LayerDesc& desc) {
    Layer l;
    l.desc = desc;
    if (desc.name.empty()) throw InvalidSpec("Network: layer needs a name");
    for (const Layer& o : layers_)
      if (o.desc.name == desc.name)
        throw InvalidSpec("Network: duplicate layer name " + desc.name);
    switch (desc.kind) {
      case LayerKind::Conv: {
        l.conv.in_channels = desc.in_channels;
        l.conv.out_channels = desc.out_channels;
        l.conv.kernel = desc.kernel;
        l.conv.stride = desc.stride;
        l.conv.padding = desc.padding;
        l.conv.weights = Tensor({desc.out_channels, desc.in_channels, desc.kernel[0],
                                 desc.kernel[1], desc.kernel[2]});
        l.conv.bias.assign(desc.out_channels, 0.0);
        l.vel_w = Tensor::zeros_like(l.conv.weights);
        l.vel_b.assign(desc.out_channels, 0.0);
        break;
      }
      case LayerKind::Dense: {
        l.dense_w = Tensor({desc.in_features, desc.out_features});
        l.dense_b.assign(desc.out_features, 0.0);
        l.vel_w = Tensor::zeros_like(l.dense_w);
        l.vel_b.assign(desc.out_features, 0.0);
        break;
      }
      case LayerKind::SaveSkip:
      case LayerKind::ConcatSkip:
        if (desc.slot.empty()) throw InvalidSpec("Network: skip layer needs a slot name");
        break;
      default:
        break;
    }
    layers_.push_back(std::move(l));
  }

  // He-style fan-in scaling for every weight matrix; biases start at zero.
  // `head_gain` additionally scales the final parameterized layer's weights;
  // a small gain starts the output near zero, which keeps the first steps of
  // a high-rate regression fit from blowing up the hidden layers.
  void initialize(std::uint64_t seed, double head_gain = 1.0) {
    Rng rng(seed);
    for (Layer& l : layers_) {
      if (l.desc.kind == LayerKind::Conv) {
        const double fan_in = static_cast<double>(l.desc.in_channels) * l.desc.kernel[0] *
                              l.desc.kernel[1] * l.desc.kernel[2];
        const double s = std::sqrt(2.0 / fan_in);
        for (std::size_t i = 0; i < l.conv.weights.size(); ++i)
          l.conv.weights[i] = rng.normal() * s;
        std::fill(l.conv.bias.begin(), l.conv.bias.end(), 0.0);
        l.vel_w.fill(0.0);
        std::fill(l.vel_b.begin(), l.vel_b.end(), 0.0);
      } else if (l.desc.kind == LayerKind::Dense) {
        const double s = std::sqrt(2.0 / l.desc.in_features);
        for (std::size_t i = 0; i < l.dense_w.size(); ++i) l.dense_w[i] = rng.normal() * s;
        std::fill(l.dense_b.begin(), l.dense_b.end(), 0.0);
        l.vel_w.fill(0.0);
        std::fill(l.vel_b.begin(), l.vel_b.end(), 0.0);
      }
    }
    if (head_gain != 1.0) {
      for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        if (it->desc.kind == LayerKind::Conv) {
          for (std::size_t i = 0; i < it->conv.weights.size(); ++i)
            it->conv.weights[i] *= head_gain;
          break;
        }
        if (it->desc.kind == LayerKind::Dense) {
          for (std::size_t i = 0; i < it->dense_w.size(); ++i) it->dense_w[i] *= head_gain;
          break;
        }
      }
    }
  }

  // Runs the graph, taping everything backward() will need. `step` keys the
  // dropout masks: the same step replays the same masks.
  Tensor forward(const Tensor& x, DropoutMode mode = DropoutMode::Infer, std::uint64_t step = 0) {
    slots_.clear();
    Tensor cur = x;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      Layer& l = layers_[li];
      switch (l.desc.kind) {
        case LayerKind::Conv:
          l.input = cur;
          cur = conv3d_forward(cur, l.conv);
          break;
        case LayerKind::MaxPool: {
          auto [y, tape] = maxpool3d_forward(cur, l.desc.factor, l.desc.factor);
          l.tape = std::move(tape);
          cur = std::move(y);
          break;
        }
        case LayerKind::Uppool:
          l.in_shape = cur.shape();
          cur = uppool3d_forward(cur, l.desc.factor);
          break;
        case LayerKind::Dense:
          l.input = cur;
          cur = dense_forward(cur, l.dense_w, l.dense_b);
          break;
        case LayerKind::Flatten: {
          l.in_shape = cur.shape();
          int rest = 1;
          for (int a = 1; a < cur.rank(); ++a) rest *= cur.extent(a);
          cur = cur.reshaped({cur.extent(0), rest});
          break;
        }
        case LayerKind::Act:
          l.input = cur;
          cur = activation_forward(cur, l.desc.activation);
          break;
        case LayerKind::Dropout: {
          auto [y, tape] =
              dropout_forward(cur, l.desc.fraction, mode, dropout_seed_ ^ (step * 0x9e3779b97f4a7c15ull + li));
          l.tape = std::move(tape);
          cur = std::move(y);
          break;
        }
        case LayerKind::SaveSkip:
          slots_[l.desc.slot] = cur;
          break;
        case LayerKind::ConcatSkip: {
          const auto it = slots_.find(l.desc.slot);
          if (it == slots_.end())
            throw TapeMismatch("Network: concat reads slot '" + l.desc.slot +
                               "' before any save");
          l.concat_a = cur.extent(1);
          l.concat_b = it->second.extent(1);
          cur = concat_channels(cur, it->second);
          break;
        }
      }
    }
    forward_ran_ = true;
    return cur;
  }

  // Backpropagates gy through the taped forward pass, filling every
  // parameter gradient; returns the gradient at the network input.
  Tensor backward(const Tensor& gy) {
    if (!forward_ran_) throw TapeMismatch("Network: backward without a taped forward");
    std::map<std::string, Tensor> slot_grads;
    Tensor g = gy;
    for (std::size_t ri = layers_.size(); ri > 0; --ri) {
      Layer& l = layers_[ri - 1];
      switch (l.desc.kind) {
        case LayerKind::Conv: {
          Conv3dGrads cg = conv3d_backward(l.input, l.conv, g);
          l.grad_w = std::move(cg.weights);
          l.grad_b = std::move(cg.bias);
          g = std::move(cg.input);
          break;
        }
        case LayerKind::MaxPool:
          g = maxpool3d_backward(l.tape, g);
          break;
        case LayerKind::Uppool:
          g = uppool3d_backward(l.in_shape, l.desc.factor, g);
          break;
        case LayerKind::Dense: {
          DenseGrads dg = dense_backward(l.input, l.dense_w, g);
          l.grad_w = std::move(dg.weights);
          l.grad_b = std::move(dg.bias);
          g = std::move(dg.input);
          break;
        }
        case LayerKind::Flatten:
          g = g.reshaped(l.in_shape);
          break;
        case LayerKind::Act:
          g = activation_backward(l.input, l.desc.activation, g);
          break;
        case LayerKind::Dropout:
          g = dropout_backward(l.tape, l.desc.fraction, g);
          break;
        case LayerKind::SaveSkip: {
          const auto it = slot_grads.find(l.desc.slot);
          if (it != slot_grads.end()) {
            if (!it->second.same_shape(g))
              throw TapeMismatch("Network: skip gradient shape mismatch at slot '" +
                                 l.desc.slot + "'");
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += it->second[i];
          }
          break;
        }
        case LayerKind::ConcatSkip: {
          auto [gc, gs] = concat_channels_backward(g, l.concat_a, l.concat_b);
          const auto it = slot_grads.find(l.desc.slot);
          if (it == slot_grads.end()) {
            slot_grads.emplace(l.desc.slot, std::move(gs));
          } else {
            for (std::size_t i = 0; i < it->second.size(); ++i) it->second[i] += gs[i];
          }
          g = std::move(gc);
          break;
        }
      }
    }
    return g;
  }

  void sgd_step(double lr, double momentum) {
    for (Layer& l : layers_) {
      if (l.desc.kind != LayerKind::Conv && l.desc.kind != LayerKind::Dense) continue;
      Tensor& w = l.desc.kind == LayerKind::Conv ? l.conv.weights : l.dense_w;
      std::vector<double>& b = l.desc.kind == LayerKind::Conv ? l.conv.bias : l.dense_b;
      if (l.grad_w.size() == 0)
        throw TapeMismatch("Network: sgd_step before backward filled gradients");
      sgd_momentum_step(w, l.grad_w, lr, momentum, l.vel_w);
      sgd_momentum_step(b, l.grad_b, lr, momentum, l.vel_b);
    }
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers_) {
      if (l.desc.kind == LayerKind::Conv) n += l.conv.weights.size() + l.conv.bias.size();
      if (l.desc.kind == LayerKind::Dense) n += l.dense_w.size() + l.dense_b.size();
    }
    return n;
  }

  void set_dropout_seed(std::uint64_t s) { dropout_seed_ = s; }

  // Clears SGD momentum so the next step follows the raw gradient.
  void reset_momentum() {
    for (Layer& l : layers_) {
      if (l.vel_w.size() > 0) l.vel_w = Tensor::zeros_like(l.vel_w);
      std::fill(l.vel_b.begin(), l.vel_b.end(), 0.0);
    }
  }

  std::size_t layer_count() const { return layers_.size(); }
  const LayerDesc& layer_desc(std::size_t i) const { return layers_[i].desc; }

  // Parameter access for tests and serialization.
  Tensor& weights_of(const std::string& name) {
    Layer& l = find(name);
    return l.desc.kind == LayerKind::Conv ? l.conv.weights : l.dense_w;
  }
  std::vector<double>& bias_of(const std::string& name) {
    Layer& l = find(name);
    return l.desc.kind == LayerKind::Conv ? l.conv.bias : l.dense_b;
  }
  const Tensor& gradient_of(const std::string& name) { return find(name).grad_w; }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    binio::write_magic(os, "W3D1");
    binio::write_u32(os, static_cast<std::uint32_t>(layers_.size()));
    for (const Layer& l : layers_) {
      binio::write_string(os, l.desc.name);
      if (l.desc.kind == LayerKind::Conv || l.desc.kind == LayerKind::Dense) {
        const Tensor& w = l.desc.kind == LayerKind::Conv ? l.conv.weights : l.dense_w;
        const std::vector<double>& b = l.desc.kind == LayerKind::Conv ? l.conv.bias : l.dense_b;
        binio::write_u32(os, 2);
        write_tensor(os, w);
        binio::write_u32(os, 1);
        binio::write_u32(os, static_cast<std::uint32_t>(b.size()));
        for (double v : b) binio::write_f32(os, static_cast<float>(v));
      } else {
        binio::write_u32(os, 0);
      }
    }
    if (!os) throw FormatError("write failed for " + path);
  }

  void load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    binio::expect_magic(is, "W3D1", "W3D1");
    const std::uint32_t n = binio::read_u32(is, "layer count");
    if (n != layers_.size())
      throw FormatError("W3D1: file has " + std::to_string(n) + " layers, network has " +
                        std::to_string(layers_.size()));
    for (Layer& l : layers_) {
      const std::string name = binio::read_string(is, "layer name");
      if (name != l.desc.name)
        throw FormatError("W3D1: layer name '" + name + "' does not match '" + l.desc.name + "'");
      const std::uint32_t tensors = binio::read_u32(is, "tensor count");
      const bool has_params =
          l.desc.kind == LayerKind::Conv || l.desc.kind == LayerKind::Dense;
      if (tensors != (has_params ? 2u : 0u))
        throw FormatError("W3D1: layer '" + name + "' tensor count " + std::to_string(tensors) +
                          " does not match the architecture");
      if (!has_params) continue;
      Tensor& w = l.desc.kind == LayerKind::Conv ? l.conv.weights : l.dense_w;
      std::vector<double>& b = l.desc.kind == LayerKind::Conv ? l.conv.bias : l.dense_b;
      read_tensor_into(is, w, name);
      const std::uint32_t brank = binio::read_u32(is, "bias rank");
      if (brank != 1) throw FormatError("W3D1: bias of '" + name + "' must be rank 1");
      const std::uint32_t blen = binio::read_u32(is, "bias length");
      if (blen != b.size())
        throw FormatError("W3D1: bias length mismatch in layer '" + name + "'");
      for (double& v : b) v = binio::read_f32(is, "bias value");
    }
  }

 private:
  struct Layer {
    LayerDesc desc;
    Conv3dParams conv;
    Tensor dense_w;
    std::vector<double> dense_b;
    Tensor vel_w, grad_w;
    std::vector<double> vel_b, grad_b;
    Tensor input;             // conv/dense/act tape
    LayerTape tape;           // pool argmax / dropout mask
    std::vector<int> in_shape;  // uppool / flatten tape
    int concat_a = 0, concat_b = 0;
  };

  Layer& find(const std::string& name) {
    for (Layer& l : layers_)
      if (l.desc.name == name) return l;
    throw InvalidSpec("Network: no layer named " + name);
  }

  static void write_tensor(std::ostream& os, const Tensor& t) {
    binio::write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (int a = 0; a < t.rank(); ++a)
      binio::write_u32(os, static_cast<std::uint32_t>(t.extent(a)));
    for (std::size_t i = 0; i < t.size(); ++i)
      binio::write_f32(os, static_cast<float>(t[i]));
  }

  static void read_tensor_into(std::istream& is, Tensor& t, const std::string& layer) {
    const std::uint32_t rank = binio::read_u32(is, "tensor rank");
    if (rank != static_cast<std::uint32_t>(t.rank()))
      throw FormatError("W3D1: tensor rank mismatch in layer '" + layer + "'");
    for (int a = 0; a < t.rank(); ++a) {
      const std::uint32_t e = binio::read_u32(is, "tensor extent");
      if (e != static_cast<std::uint32_t>(t.extent(a)))
        throw FormatError("W3D1: tensor extent mismatch in layer '" + layer + "'");
    }
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = binio::read_f32(is, "tensor value");
  }

  std::vector<Layer> layers_;
  std::map<std::string, Tensor> slots_;
  std::uint64_t dropout_seed_ = 0;
  bool forward_ran_ = false;
};

}  // namespace voxhand
