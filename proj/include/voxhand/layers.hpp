#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "voxhand/common.hpp"
#include "voxhand/tensor.hpp"

namespace voxhand {

using Extent3 = std::array<int, 3>;

inline int conv_output_extent(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

struct Conv3dParams {
  int in_channels = 0;
  int out_channels = 0;
  Extent3 kernel{1, 1, 1};
  Extent3 stride{1, 1, 1};
  Extent3 padding{0, 0, 0};
  Tensor weights;            // (out, in, kd, kh, kw)
  std::vector<double> bias;  // per output channel

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (kernel[a] < 1) throw InvalidSpec("conv3d: kernel extent must be >= 1 on axis " + std::to_string(a));
      if (stride[a] < 1) throw InvalidSpec("conv3d: stride must be >= 1 on axis " + std::to_string(a));
      if (padding[a] < 0) throw InvalidSpec("conv3d: padding must be >= 0 on axis " + std::to_string(a));
    }
    const std::vector<int> want{out_channels, in_channels, kernel[0], kernel[1], kernel[2]};
    if (weights.shape() != want)
      throw ShapeMismatch("conv3d: weight shape " + weights.shape_string() + " inconsistent with params");
    if (static_cast<int>(bias.size()) != out_channels)
      throw ShapeMismatch("conv3d: bias length != out_channels");
  }
};

// Whatever a backward pass needs from the matching forward call: the input
// (conv/dense), pooling argmax indices, dropout masks, input shapes.
struct LayerTape {
  Tensor input;
  std::vector<std::size_t> argmax;   // maxpool: flat input index per window
  std::vector<std::uint8_t> mask;    // dropout keep flags
  std::vector<int> input_shape;
  std::vector<int> output_shape;
};

namespace detail {

inline void check_conv_input(const Tensor& x, const Conv3dParams& p) {
  if (x.rank() != 5)
    throw ShapeMismatch("conv3d: input rank " + std::to_string(x.rank()) + " != 5");
  if (x.extent(1) != p.in_channels)
    throw ShapeMismatch("conv3d: input channel extent " + std::to_string(x.extent(1)) +
                        " != in_channels " + std::to_string(p.in_channels));
  for (int a = 0; a < 3; ++a)
    if (conv_output_extent(x.extent(2 + a), p.kernel[a], p.stride[a], p.padding[a]) < 1)
      throw ShapeMismatch("conv3d: spatial axis " + std::to_string(a) +
                          " too small for kernel/stride/padding");
}

// Clamp kernel tap range so the input index stays inside [0, in_extent).
inline void tap_bounds(int out_pos, int stride, int pad, int kernel, int in_extent,
                       int& lo, int& hi) {
  const int base = out_pos * stride - pad;
  lo = std::max(0, -base);
  hi = std::min(kernel, in_extent - base);
}

}  // namespace detail

// Cross-correlation sum plus bias per output channel.
inline Tensor conv3d_forward(const Tensor& x, const Conv3dParams& p) {
  p.validate();
  detail::check_conv_input(x, p);
  const int N = x.extent(0), IC = x.extent(1);
  const int ID = x.extent(2), IH = x.extent(3), IW = x.extent(4);
  const int OD = conv_output_extent(ID, p.kernel[0], p.stride[0], p.padding[0]);
  const int OH = conv_output_extent(IH, p.kernel[1], p.stride[1], p.padding[1]);
  const int OW = conv_output_extent(IW, p.kernel[2], p.stride[2], p.padding[2]);
  const int OC = p.out_channels;
  Tensor y({N, OC, OD, OH, OW});

  const double* xd = x.data();
  const double* wd = p.weights.data();
  double* yd = y.data();
  const int KD = p.kernel[0], KH = p.kernel[1], KW = p.kernel[2];

  for (int n = 0; n < N; ++n)
    for (int oc = 0; oc < OC; ++oc) {
      const double b = p.bias[oc];
      for (int od = 0; od < OD; ++od) {
        int kd_lo, kd_hi;
        detail::tap_bounds(od, p.stride[0], p.padding[0], KD, ID, kd_lo, kd_hi);
        const int id0 = od * p.stride[0] - p.padding[0];
        for (int oh = 0; oh < OH; ++oh) {
          int kh_lo, kh_hi;
          detail::tap_bounds(oh, p.stride[1], p.padding[1], KH, IH, kh_lo, kh_hi);
          const int ih0 = oh * p.stride[1] - p.padding[1];
          for (int ow = 0; ow < OW; ++ow) {
            int kw_lo, kw_hi;
            detail::tap_bounds(ow, p.stride[2], p.padding[2], KW, IW, kw_lo, kw_hi);
            const int iw0 = ow * p.stride[2] - p.padding[2];
            double acc = b;
            for (int ic = 0; ic < IC; ++ic)
              for (int kd = kd_lo; kd < kd_hi; ++kd)
                for (int kh = kh_lo; kh < kh_hi; ++kh) {
                  const double* xrow =
                      xd + ((((static_cast<std::size_t>(n) * IC + ic) * ID + id0 + kd) * IH + ih0 + kh) * IW + iw0);
                  const double* wrow =
                      wd + ((((static_cast<std::size_t>(oc) * IC + ic) * KD + kd) * KH + kh) * KW);
                  for (int kw = kw_lo; kw < kw_hi; ++kw) acc += xrow[kw] * wrow[kw];
                }
            yd[((((static_cast<std::size_t>(n) * OC + oc) * OD + od) * OH + oh) * OW + ow)] = acc;
          }
        }
      }
    }
  return y;
}

struct Conv3dGrads {
  Tensor input;
  Tensor weights;
  std::vector<double> bias;
};

inline Conv3dGrads conv3d_backward(const Tensor& x, const Conv3dParams& p, const Tensor& gy) {
  detail::check_conv_input(x, p);
  const int N = x.extent(0), IC = x.extent(1);
  const int ID = x.extent(2), IH = x.extent(3), IW = x.extent(4);
  const int OD = conv_output_extent(ID, p.kernel[0], p.stride[0], p.padding[0]);
  const int OH = conv_output_extent(IH, p.kernel[1], p.stride[1], p.padding[1]);
  const int OW = conv_output_extent(IW, p.kernel[2], p.stride[2], p.padding[2]);
  const int OC = p.out_channels;
  if (gy.shape() != std::vector<int>{N, OC, OD, OH, OW})
    throw TapeMismatch("conv3d backward: upstream shape " + gy.shape_string() +
                       " != forward output shape");

  Conv3dGrads g{Tensor(x.shape()), Tensor(p.weights.shape()), std::vector<double>(OC, 0.0)};
  const double* xd = x.data();
  const double* wd = p.weights.data();
  const double* gyd = gy.data();
  double* gxd = g.input.data();
  double* gwd = g.weights.data();
  const int KD = p.kernel[0], KH = p.kernel[1], KW = p.kernel[2];

  for (int n = 0; n < N; ++n)
    for (int oc = 0; oc < OC; ++oc)
      for (int od = 0; od < OD; ++od) {
        int kd_lo, kd_hi;
        detail::tap_bounds(od, p.stride[0], p.padding[0], KD, ID, kd_lo, kd_hi);
        const int id0 = od * p.stride[0] - p.padding[0];
        for (int oh = 0; oh < OH; ++oh) {
          int kh_lo, kh_hi;
          detail::tap_bounds(oh, p.stride[1], p.padding[1], KH, IH, kh_lo, kh_hi);
          const int ih0 = oh * p.stride[1] - p.padding[1];
          for (int ow = 0; ow < OW; ++ow) {
            int kw_lo, kw_hi;
            detail::tap_bounds(ow, p.stride[2], p.padding[2], KW, IW, kw_lo, kw_hi);
            const int iw0 = ow * p.stride[2] - p.padding[2];
            const double gv =
                gyd[((((static_cast<std::size_t>(n) * OC + oc) * OD + od) * OH + oh) * OW + ow)];
            g.bias[oc] += gv;
            for (int ic = 0; ic < IC; ++ic)
              for (int kd = kd_lo; kd < kd_hi; ++kd)
                for (int kh = kh_lo; kh < kh_hi; ++kh) {
                  const std::size_t xoff =
                      ((((static_cast<std::size_t>(n) * IC + ic) * ID + id0 + kd) * IH + ih0 + kh) * IW + iw0);
                  const std::size_t woff =
                      ((((static_cast<std::size_t>(oc) * IC + ic) * KD + kd) * KH + kh) * KW);
                  for (int kw = kw_lo; kw < kw_hi; ++kw) {
                    gwd[woff + kw] += xd[xoff + kw] * gv;
                    gxd[xoff + kw] += wd[woff + kw] * gv;
                  }
                }
          }
        }
      }
  return g;
}

// Per-window maximum; ties break to the first (lowest flat index) element,
// which keeps the backward routing deterministic.
inline std::pair<Tensor, LayerTape> maxpool3d_forward(const Tensor& x, Extent3 kernel, Extent3 stride) {
  if (x.rank() != 5) throw ShapeMismatch("maxpool3d: input rank != 5");
  for (int a = 0; a < 3; ++a) {
    if (kernel[a] < 1 || stride[a] < 1)
      throw ShapeMismatch("maxpool3d: kernel/stride must be >= 1 on axis " + std::to_string(a));
    if (x.extent(2 + a) < kernel[a])
      throw ShapeMismatch("maxpool3d: spatial axis " + std::to_string(a) + " smaller than kernel");
  }
  const int N = x.extent(0), C = x.extent(1);
  const int ID = x.extent(2), IH = x.extent(3), IW = x.extent(4);
  const int OD = (ID - kernel[0]) / stride[0] + 1;
  const int OH = (IH - kernel[1]) / stride[1] + 1;
  const int OW = (IW - kernel[2]) / stride[2] + 1;
  Tensor y({N, C, OD, OH, OW});
  LayerTape tape;
  tape.input_shape = x.shape();
  tape.output_shape = y.shape();
  tape.argmax.resize(y.size());
  const double* xd = x.data();
  double* yd = y.data();
  std::size_t o = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int od = 0; od < OD; ++od)
        for (int oh = 0; oh < OH; ++oh)
          for (int ow = 0; ow < OW; ++ow, ++o) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_idx = 0;
            for (int kd = 0; kd < kernel[0]; ++kd)
              for (int kh = 0; kh < kernel[1]; ++kh)
                for (int kw = 0; kw < kernel[2]; ++kw) {
                  const std::size_t idx =
                      ((((static_cast<std::size_t>(n) * C + c) * ID + od * stride[0] + kd) * IH +
                        oh * stride[1] + kh) * IW + ow * stride[2] + kw);
                  if (xd[idx] > best) {
                    best = xd[idx];
                    best_idx = idx;
                  }
                }
            yd[o] = best;
            tape.argmax[o] = best_idx;
          }
  return {std::move(y), std::move(tape)};
}

inline Tensor maxpool3d_backward(const LayerTape& tape, const Tensor& gy) {
  if (gy.shape() != tape.output_shape)
    throw TapeMismatch("maxpool3d backward: upstream shape " + gy.shape_string() +
                       " disagrees with recorded forward");
  Tensor gx(tape.input_shape);
  double* gxd = gx.data();
  const double* gyd = gy.data();
  for (std::size_t o = 0; o < gy.size(); ++o) gxd[tape.argmax[o]] += gyd[o];
  return gx;
}

// Nearest-neighbor replication: each input voxel fills a factor-shaped block.
inline Tensor uppool3d_forward(const Tensor& x, Extent3 factor) {
  if (x.rank() != 5) throw ShapeMismatch("uppool3d: input rank != 5");
  for (int a = 0; a < 3; ++a)
    if (factor[a] < 1)
      throw ShapeMismatch("uppool3d: factor must be >= 1 on axis " + std::to_string(a));
  const int N = x.extent(0), C = x.extent(1);
  const int ID = x.extent(2), IH = x.extent(3), IW = x.extent(4);
  const int OD = ID * factor[0], OH = IH * factor[1], OW = IW * factor[2];
  Tensor y({N, C, OD, OH, OW});
  const double* xd = x.data();
  double* yd = y.data();
  std::size_t o = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int od = 0; od < OD; ++od)
        for (int oh = 0; oh < OH; ++oh) {
          const std::size_t row =
              ((((static_cast<std::size_t>(n) * C + c) * ID + od / factor[0]) * IH + oh / factor[1]) * IW);
          for (int ow = 0; ow < OW; ++ow, ++o) yd[o] = xd[row + ow / factor[2]];
        }
  return y;
}

// Sum over each replication block.
inline Tensor uppool3d_backward(const std::vector<int>& input_shape, Extent3 factor, const Tensor& gy) {
  const int N = input_shape[0], C = input_shape[1];
  const int ID = input_shape[2], IH = input_shape[3], IW = input_shape[4];
  if (gy.shape() != std::vector<int>{N, C, ID * factor[0], IH * factor[1], IW * factor[2]})
    throw TapeMismatch("uppool3d backward: upstream shape " + gy.shape_string() +
                       " disagrees with recorded forward");
  Tensor gx(input_shape);
  double* gxd = gx.data();
  const double* gyd = gy.data();
  const int OD = ID * factor[0], OH = IH * factor[1], OW = IW * factor[2];
  std::size_t o = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int od = 0; od < OD; ++od)
        for (int oh = 0; oh < OH; ++oh) {
          const std::size_t row =
              ((((static_cast<std::size_t>(n) * C + c) * ID + od / factor[0]) * IH + oh / factor[1]) * IW);
          for (int ow = 0; ow < OW; ++ow, ++o) gxd[row + ow / factor[2]] += gyd[o];
        }
  return gx;
}

// Channel concatenation, a's channels first.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 5 || b.rank() != 5) throw ShapeMismatch("concat: inputs must be rank 5");
  for (int axis : {0, 2, 3, 4})
    if (a.extent(axis) != b.extent(axis))
      throw ShapeMismatch("concat: extents differ on axis " + std::to_string(axis));
  const int N = a.extent(0), CA = a.extent(1), CB = b.extent(1);
  const int D = a.extent(2), H = a.extent(3), W = a.extent(4);
  Tensor y({N, CA + CB, D, H, W});
  const std::size_t plane = static_cast<std::size_t>(D) * H * W;
  for (int n = 0; n < N; ++n) {
    std::copy_n(a.data() + static_cast<std::size_t>(n) * CA * plane, CA * plane,
                y.data() + static_cast<std::size_t>(n) * (CA + CB) * plane);
    std::copy_n(b.data() + static_cast<std::size_t>(n) * CB * plane, CB * plane,
                y.data() + (static_cast<std::size_t>(n) * (CA + CB) + CA) * plane);
  }
  return y;
}

inline std::pair<Tensor, Tensor> concat_channels_backward(const Tensor& gy, int channels_a, int channels_b) {
  if (gy.rank() != 5 || gy.extent(1) != channels_a + channels_b)
    throw TapeMismatch("concat backward: upstream channels != recorded split");
  const int N = gy.extent(0), D = gy.extent(2), H = gy.extent(3), W = gy.extent(4);
  Tensor ga({N, channels_a, D, H, W});
  Tensor gb({N, channels_b, D, H, W});
  const std::size_t plane = static_cast<std::size_t>(D) * H * W;
  for (int n = 0; n < N; ++n) {
    std::copy_n(gy.data() + static_cast<std::size_t>(n) * (channels_a + channels_b) * plane,
                channels_a * plane, ga.data() + static_cast<std::size_t>(n) * channels_a * plane);
    std::copy_n(gy.data() + (static_cast<std::size_t>(n) * (channels_a + channels_b) + channels_a) * plane,
                channels_b * plane, gb.data() + static_cast<std::size_t>(n) * channels_b * plane);
  }
  return {std::move(ga), std::move(gb)};
}

// y = W^T x + b per sample. x: (N, K); weights: (K, M); bias: M.
inline Tensor dense_forward(const Tensor& x, const Tensor& weights, const std::vector<double>& bias) {
  if (x.rank() != 2) throw ShapeMismatch("dense: input must be rank 2 (batch, features)");
  if (weights.rank() != 2 || weights.extent(0) != x.extent(1))
    throw ShapeMismatch("dense: flattened input length " + std::to_string(x.extent(1)) +
                        " != weight rows " + std::to_string(weights.extent(0)));
  const int N = x.extent(0), K = x.extent(1), M = weights.extent(1);
  if (static_cast<int>(bias.size()) != M) throw ShapeMismatch("dense: bias length != output width");
  Tensor y({N, M});
  const double* xd = x.data();
  const double* wd = weights.data();
  double* yd = y.data();
  for (int n = 0; n < N; ++n) {
    double* yrow = yd + static_cast<std::size_t>(n) * M;
    for (int m = 0; m < M; ++m) yrow[m] = bias[m];
    const double* xrow = xd + static_cast<std::size_t>(n) * K;
    for (int k = 0; k < K; ++k) {
      const double xv = xrow[k];
      const double* wrow = wd + static_cast<std::size_t>(k) * M;
      for (int m = 0; m < M; ++m) yrow[m] += xv * wrow[m];
    }
  }
  return y;
}

struct DenseGrads {
  Tensor input;
  Tensor weights;
  std::vector<double> bias;
};

inline DenseGrads dense_backward(const Tensor& x, const Tensor& weights, const Tensor& gy) {
  const int N = x.extent(0), K = x.extent(1), M = weights.extent(1);
  if (gy.shape() != std::vector<int>{N, M})
    throw TapeMismatch("dense backward: upstream shape " + gy.shape_string() +
                       " disagrees with recorded forward");
  DenseGrads g{Tensor(x.shape()), Tensor(weights.shape()), std::vector<double>(M, 0.0)};
  const double* xd = x.data();
  const double* wd = weights.data();
  const double* gyd = gy.data();
  for (int n = 0; n < N; ++n) {
    const double* xrow = xd + static_cast<std::size_t>(n) * K;
    const double* grow = gyd + static_cast<std::size_t>(n) * M;
    double* gxrow = g.input.data() + static_cast<std::size_t>(n) * K;
    for (int m = 0; m < M; ++m) g.bias[m] += grow[m];
    for (int k = 0; k < K; ++k) {
      const double* wrow = wd + static_cast<std::size_t>(k) * M;
      double* gwrow = g.weights.data() + static_cast<std::size_t>(k) * M;
      double acc = 0.0;
      const double xv = xrow[k];
      for (int m = 0; m < M; ++m) {
        acc += wrow[m] * grow[m];
        gwrow[m] += xv * grow[m];
      }
      gxrow[k] = acc;
    }
  }
  return g;
}

enum class Activation { ReLU, Tanh };

inline Tensor activation_forward(const Tensor& x, Activation kind) {
  Tensor y(x.shape());
  const double* xd = x.data();
  double* yd = y.data();
  if (kind == Activation::ReLU)
    for (std::size_t i = 0; i < x.size(); ++i) yd[i] = xd[i] > 0.0 ? xd[i] : 0.0;
  else
    for (std::size_t i = 0; i < x.size(); ++i) yd[i] = std::tanh(xd[i]);
  return y;
}

// ReLU gates on the sign of the forward input; Tanh uses 1 - tanh(x)^2.
inline Tensor activation_backward(const Tensor& x, Activation kind, const Tensor& gy) {
  if (!gy.same_shape(x))
    throw TapeMismatch("activation backward: upstream shape " + gy.shape_string() +
                       " disagrees with recorded forward");
  Tensor gx(x.shape());
  const double* xd = x.data();
  const double* gyd = gy.data();
  double* gxd = gx.data();
  if (kind == Activation::ReLU)
    for (std::size_t i = 0; i < x.size(); ++i) gxd[i] = xd[i] > 0.0 ? gyd[i] : 0.0;
  else
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double t = std::tanh(xd[i]);
      gxd[i] = (1.0 - t * t) * gyd[i];
    }
  return gx;
}

enum class DropoutMode { Train, Infer };

// Inverted dropout: training zeroes with probability `fraction` and scales
// survivors by 1/(1-fraction); inference is the identity.
inline std::pair<Tensor, LayerTape> dropout_forward(const Tensor& x, double fraction,
                                                    DropoutMode mode, std::uint64_t rng_seed) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw InvalidFraction("dropout: fraction must be in [0, 1), got " + std::to_string(fraction));
  LayerTape tape;
  tape.input_shape = x.shape();
  if (mode == DropoutMode::Infer || fraction == 0.0) {
    tape.mask.assign(x.size(), 1);
    return {x, std::move(tape)};
  }
  Rng rng(rng_seed);
  Tensor y(x.shape());
  tape.mask.resize(x.size());
  const double scale = 1.0 / (1.0 - fraction);
  const double* xd = x.data();
  double* yd = y.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool keep = rng.uniform() >= fraction;
    tape.mask[i] = keep ? 1 : 0;
    yd[i] = keep ? xd[i] * scale : 0.0;
  }
  return {std::move(y), std::move(tape)};
}

inline Tensor dropout_backward(const LayerTape& tape, double fraction, const Tensor& gy) {
  if (gy.shape() != tape.input_shape)
    throw TapeMismatch("dropout backward: upstream shape " + gy.shape_string() +
                       " disagrees with recorded forward");
  Tensor gx(gy.shape());
  const double scale = fraction > 0.0 ? 1.0 / (1.0 - fraction) : 1.0;
  const double* gyd = gy.data();
  double* gxd = gx.data();
  for (std::size_t i = 0; i < gy.size(); ++i) gxd[i] = tape.mask[i] ? gyd[i] * scale : 0.0;
  return gx;
}

// Mean over batch of the squared Euclidean norm of (pred - target).
inline std::pair<double, Tensor> l2_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target))
    throw ShapeMismatch("l2_loss: shapes " + pred.shape_string() + " vs " + target.shape_string());
  const int N = pred.extent(0);
  Tensor grad(pred.shape());
  const double* pd = pred.data();
  const double* td = target.data();
  double* gd = grad.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pd[i] - td[i];
    loss += d * d;
    gd[i] = 2.0 * d / N;
  }
  return {loss / N, std::move(grad)};
}

// v <- momentum*v + grad; p <- p - lr*v. State is owned by the caller and
// must be shape-aligned with params.
inline void sgd_momentum_step(Tensor& params, const Tensor& grads, double lr, double momentum,
                              Tensor& velocity) {
  if (!params.same_shape(grads) || !params.same_shape(velocity))
    throw ShapeMismatch("sgd: params/grads/velocity shapes disagree");
  double* pd = params.data();
  const double* gd = grads.data();
  double* vd = velocity.data();
  for (std::size_t i = 0; i < params.size(); ++i) {
    vd[i] = momentum * vd[i] + gd[i];
    pd[i] -= lr * vd[i];
  }
}

inline void sgd_momentum_step(std::vector<double>& params, const std::vector<double>& grads,
                              double lr, double momentum, std::vector<double>& velocity) {
  if (params.size() != grads.size() || params.size() != velocity.size())
    throw ShapeMismatch("sgd: params/grads/velocity lengths disagree");
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grads[i];
    params[i] -= lr * velocity[i];
  }
}

}  // namespace voxhand
