#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "voxhand/layers.hpp"

using namespace voxhand;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

Conv3dParams random_conv(int ic, int oc, Extent3 kernel, Extent3 stride, Extent3 pad, Rng& rng) {
  Conv3dParams p;
  p.in_channels = ic;
  p.out_channels = oc;
  p.kernel = kernel;
  p.stride = stride;
  p.padding = pad;
  p.weights = random_tensor({oc, ic, kernel[0], kernel[1], kernel[2]}, rng);
  p.bias.resize(oc);
  for (double& b : p.bias) b = rng.uniform(-0.5, 0.5);
  return p;
}

// Independent convolution oracle: per-tap bounds check against a conceptual
// zero-padded input, no precomputed tap ranges, accessor-based indexing.
double conv_oracle_at(const Tensor& x, const Conv3dParams& p, int n, int oc, int od, int oh,
                      int ow) {
  double acc = p.bias[oc];
  for (int ic = 0; ic < p.in_channels; ++ic)
    for (int kd = 0; kd < p.kernel[0]; ++kd)
      for (int kh = 0; kh < p.kernel[1]; ++kh)
        for (int kw = 0; kw < p.kernel[2]; ++kw) {
          const int id = od * p.stride[0] - p.padding[0] + kd;
          const int ih = oh * p.stride[1] - p.padding[1] + kh;
          const int iw = ow * p.stride[2] - p.padding[2] + kw;
          if (id < 0 || ih < 0 || iw < 0 || id >= x.extent(2) || ih >= x.extent(3) ||
              iw >= x.extent(4))
            continue;
          acc += x.at(n, ic, id, ih, iw) * p.weights.at(oc, ic, kd, kh, kw);
        }
  return acc;
}

}  // namespace

TEST(Conv3d, OutputExtentFormula) {
  EXPECT_EQ(conv_output_extent(60, 3, 1, 1), 60);
  EXPECT_EQ(conv_output_extent(60, 5, 1, 2), 60);
  EXPECT_EQ(conv_output_extent(8, 2, 2, 0), 4);
  EXPECT_EQ(conv_output_extent(7, 3, 2, 0), 3);
}

TEST(Conv3d, OneByOneIdentity) {
  Rng rng(1);
  Tensor x = random_tensor({2, 1, 3, 3, 3}, rng);
  Conv3dParams p;
  p.in_channels = 1;
  p.out_channels = 1;
  p.weights = Tensor({1, 1, 1, 1, 1});
  p.weights[0] = 1.0;
  p.bias = {0.0};
  const Tensor y = conv3d_forward(x, p);
  ASSERT_TRUE(y.same_shape(x));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y[i], x[i]);
}

TEST(Conv3d, AllOnesKernelIsWindowSum) {
  // 3^3 all-ones kernel over a constant-1 input with padding 1: interior
  // voxels see 27 taps, corner voxels 8.
  Tensor x({1, 1, 4, 4, 4});
  x.fill(1.0);
  Conv3dParams p;
  p.in_channels = 1;
  p.out_channels = 1;
  p.kernel = {3, 3, 3};
  p.padding = {1, 1, 1};
  p.weights = Tensor({1, 1, 3, 3, 3});
  p.weights.fill(1.0);
  p.bias = {0.0};
  const Tensor y = conv3d_forward(x, p);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 1, 1, 1), 27.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 0, 0), 8.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 1, 1), 18.0);
}

TEST(Conv3d, BiasAddsPerOutputChannel) {
  Tensor x({1, 1, 2, 2, 2});
  Conv3dParams p;
  p.in_channels = 1;
  p.out_channels = 2;
  p.weights = Tensor({2, 1, 1, 1, 1});
  p.bias = {0.25, -3.5};
  const Tensor y = conv3d_forward(x, p);
  for (int i = 0; i < 8; ++i) {
    EXPECT_DOUBLE_EQ(y[i], 0.25);
    EXPECT_DOUBLE_EQ(y[8 + i], -3.5);
  }
}

TEST(Conv3d, MatchesNaiveOracle) {
  Rng rng(11);
  const Tensor x = random_tensor({2, 3, 5, 4, 6}, rng);
  const Conv3dParams p = random_conv(3, 2, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, rng);
  const Tensor y = conv3d_forward(x, p);
  ASSERT_EQ(y.shape(), (std::vector<int>{2, 2, 5, 4, 6}));
  for (int n = 0; n < 2; ++n)
    for (int oc = 0; oc < 2; ++oc)
      for (int od = 0; od < 5; ++od)
        for (int oh = 0; oh < 4; ++oh)
          for (int ow = 0; ow < 6; ++ow)
            EXPECT_NEAR(y.at(n, oc, od, oh, ow), conv_oracle_at(x, p, n, oc, od, oh, ow), 1e-12);
}

TEST(Conv3d, MatchesNaiveOracleStridedAnisotropic) {
  Rng rng(12);
  const Tensor x = random_tensor({1, 2, 7, 6, 5}, rng);
  const Conv3dParams p = random_conv(2, 3, {3, 2, 1}, {2, 2, 1}, {1, 0, 0}, rng);
  const Tensor y = conv3d_forward(x, p);
  ASSERT_EQ(y.shape(), (std::vector<int>{1, 3, 4, 3, 5}));
  for (int oc = 0; oc < 3; ++oc)
    for (int od = 0; od < 4; ++od)
      for (int oh = 0; oh < 3; ++oh)
        for (int ow = 0; ow < 5; ++ow)
          EXPECT_NEAR(y.at(0, oc, od, oh, ow), conv_oracle_at(x, p, 0, oc, od, oh, ow), 1e-12);
}

TEST(Conv3d, RejectsChannelMismatch) {
  Rng rng(2);
  const Tensor x = random_tensor({1, 2, 4, 4, 4}, rng);
  const Conv3dParams p = random_conv(3, 1, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, rng);
  EXPECT_THROW(conv3d_forward(x, p), ShapeMismatch);
}

TEST(MaxPool3d, KnownWindows) {
  // 1x1x4x4x4 with values 0..63; 2^3 pool stride 2 takes the max corner of
  // each block, which in this layout is the last element.
  Tensor x({1, 1, 4, 4, 4});
  for (std::size_t i = 0; i < 64; ++i) x[i] = static_cast<double>(i);
  const auto [y, tape] = maxpool3d_forward(x, {2, 2, 2}, {2, 2, 2});
  ASSERT_EQ(y.shape(), (std::vector<int>{1, 1, 2, 2, 2}));
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 0, 0), x.at(0, 0, 1, 1, 1));
  EXPECT_DOUBLE_EQ(y.at(0, 0, 1, 1, 1), x.at(0, 0, 3, 3, 3));
  EXPECT_EQ(tape.argmax[0], 21u);  // (1,1,1) flat in 4x4x4
}

TEST(MaxPool3d, TieBreaksToFirstElement) {
  Tensor x({1, 1, 2, 2, 2});
  x.fill(7.0);
  const auto [y, tape] = maxpool3d_forward(x, {2, 2, 2}, {2, 2, 2});
  EXPECT_DOUBLE_EQ(y[0], 7.0);
  EXPECT_EQ(tape.argmax[0], 0u);

  const Tensor gy_ones = [&] {
    Tensor t(y.shape());
    t.fill(1.0);
    return t;
  }();
  const Tensor gx = maxpool3d_backward(tape, gy_ones);
  EXPECT_DOUBLE_EQ(gx[0], 1.0);
  for (std::size_t i = 1; i < 8; ++i) EXPECT_DOUBLE_EQ(gx[i], 0.0);
}

TEST(MaxPool3d, BackwardRoutesToArgmaxOnly) {
  Rng rng(5);
  const Tensor x = random_tensor({2, 3, 4, 4, 4}, rng);
  const auto [y, tape] = maxpool3d_forward(x, {2, 2, 2}, {2, 2, 2});
  Tensor gy(y.shape());
  for (std::size_t i = 0; i < gy.size(); ++i) gy[i] = rng.uniform(-1.0, 1.0);
  const Tensor gx = maxpool3d_backward(tape, gy);
  // Sum is conserved and every nonzero lands on a recorded argmax.
  double sum_gy = 0.0, sum_gx = 0.0;
  for (std::size_t i = 0; i < gy.size(); ++i) sum_gy += gy[i];
  for (std::size_t i = 0; i < gx.size(); ++i) sum_gx += gx[i];
  EXPECT_NEAR(sum_gy, sum_gx, 1e-12);
  std::vector<bool> is_argmax(x.size(), false);
  for (std::size_t a : tape.argmax) is_argmax[a] = true;
  for (std::size_t i = 0; i < gx.size(); ++i)
    if (!is_argmax[i]) EXPECT_DOUBLE_EQ(gx[i], 0.0);
}

TEST(Uppool3d, ReplicatesBlocks) {
  Tensor x({1, 2, 1, 1, 2});
  x[0] = 3.0;
  x[1] = -1.0;
  x[2] = 5.0;
  x[3] = 9.0;
  const Tensor y = uppool3d_forward(x, {2, 2, 2});
  ASSERT_EQ(y.shape(), (std::vector<int>{1, 2, 2, 2, 4}));
  for (int d = 0; d < 2; ++d)
    for (int h = 0; h < 2; ++h) {
      EXPECT_DOUBLE_EQ(y.at(0, 0, d, h, 0), 3.0);
      EXPECT_DOUBLE_EQ(y.at(0, 0, d, h, 1), 3.0);
      EXPECT_DOUBLE_EQ(y.at(0, 0, d, h, 2), -1.0);
      EXPECT_DOUBLE_EQ(y.at(0, 0, d, h, 3), -1.0);
      EXPECT_DOUBLE_EQ(y.at(0, 1, d, h, 0), 5.0);
      EXPECT_DOUBLE_EQ(y.at(0, 1, d, h, 3), 9.0);
    }
}

TEST(Uppool3d, BackwardSumsBlocks) {
  Tensor x({1, 1, 1, 1, 1});
  x[0] = 2.0;
  const Tensor y = uppool3d_forward(x, {2, 2, 2});
  Tensor gy(y.shape());
  for (std::size_t i = 0; i < 8; ++i) gy[i] = static_cast<double>(i + 1);
  const Tensor gx = uppool3d_backward(x.shape(), {2, 2, 2}, gy);
  EXPECT_DOUBLE_EQ(gx[0], 36.0);  // 1+2+...+8
}

TEST(Uppool3d, InverseOfPoolOnConstantBlocks) {
  // On block-constant data, pool then uppool reproduces the input exactly.
  Tensor x({1, 1, 4, 4, 4});
  for (int d = 0; d < 4; ++d)
    for (int h = 0; h < 4; ++h)
      for (int w = 0; w < 4; ++w)
        x.at(0, 0, d, h, w) = static_cast<double>((d / 2) * 4 + (h / 2) * 2 + (w / 2));
  const auto [pooled, tape] = maxpool3d_forward(x, {2, 2, 2}, {2, 2, 2});
  const Tensor back = uppool3d_forward(pooled, {2, 2, 2});
  ASSERT_TRUE(back.same_shape(x));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(back[i], x[i]);
}

TEST(Concat, FirstInputChannelsComeFirst) {
  Tensor a({1, 2, 1, 1, 2});
  Tensor b({1, 1, 1, 1, 2});
  for (std::size_t i = 0; i < 4; ++i) a[i] = static_cast<double>(i + 1);
  b[0] = 10.0;
  b[1] = 20.0;
  const Tensor y = concat_channels(a, b);
  ASSERT_EQ(y.shape(), (std::vector<int>{1, 3, 1, 1, 2}));
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(y.at(0, 1, 0, 0, 1), 4.0);
  EXPECT_DOUBLE_EQ(y.at(0, 2, 0, 0, 0), 10.0);
  EXPECT_DOUBLE_EQ(y.at(0, 2, 0, 0, 1), 20.0);
}

TEST(Concat, BackwardSplitsRoundTrip) {
  Rng rng(8);
  const Tensor a = random_tensor({2, 3, 2, 2, 2}, rng);
  const Tensor b = random_tensor({2, 2, 2, 2, 2}, rng);
  const Tensor y = concat_channels(a, b);
  const auto [ga, gb] = concat_channels_backward(y, 3, 2);
  ASSERT_TRUE(ga.same_shape(a));
  ASSERT_TRUE(gb.same_shape(b));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(ga[i], a[i]);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_DOUBLE_EQ(gb[i], b[i]);
}

TEST(Concat, RejectsSpatialMismatch) {
  Tensor a({1, 1, 2, 2, 2});
  Tensor b({1, 1, 2, 2, 3});
  EXPECT_THROW(concat_channels(a, b), ShapeMismatch);
}

TEST(Dense, SmallMatrixOracle) {
  // x = [[1,2]], W = [[1,3],[2,4]] (K=2 rows, M=2 cols), b = [10, 20].
  // y = x W + b = [1*1+2*2+10, 1*3+2*4+20] = [15, 31].
  Tensor x({1, 2});
  x[0] = 1.0;
  x[1] = 2.0;
  Tensor w({2, 2});
  w[0] = 1.0;
  w[1] = 3.0;
  w[2] = 2.0;
  w[3] = 4.0;
  const Tensor y = dense_forward(x, w, {10.0, 20.0});
  ASSERT_EQ(y.shape(), (std::vector<int>{1, 2}));
  EXPECT_DOUBLE_EQ(y[0], 15.0);
  EXPECT_DOUBLE_EQ(y[1], 31.0);
}

TEST(Dense, BatchedMatchesPerSample) {
  Rng rng(21);
  const Tensor x = random_tensor({4, 6}, rng);
  const Tensor w = random_tensor({6, 3}, rng);
  std::vector<double> b{0.1, -0.2, 0.3};
  const Tensor y = dense_forward(x, w, b);
  for (int n = 0; n < 4; ++n)
    for (int m = 0; m < 3; ++m) {
      double acc = b[m];
      for (int k = 0; k < 6; ++k) acc += x[n * 6 + k] * w[k * 3 + m];
      EXPECT_NEAR(y[n * 3 + m], acc, 1e-12);
    }
}

TEST(Dense, RejectsWidthMismatch) {
  Tensor x({1, 3});
  Tensor w({2, 2});
  EXPECT_THROW(dense_forward(x, w, {0.0, 0.0}), ShapeMismatch);
}

TEST(Activations, ReluAndTanhValues) {
  Tensor x({1, 4});
  x[0] = -2.0;
  x[1] = 0.0;
  x[2] = 0.5;
  x[3] = 3.0;
  const Tensor r = activation_forward(x, Activation::ReLU);
  EXPECT_DOUBLE_EQ(r[0], 0.0);
  EXPECT_DOUBLE_EQ(r[1], 0.0);
  EXPECT_DOUBLE_EQ(r[2], 0.5);
  EXPECT_DOUBLE_EQ(r[3], 3.0);
  const Tensor t = activation_forward(x, Activation::Tanh);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(t[i], std::tanh(x[i]));
  for (int i = 0; i < 4; ++i) {
    EXPECT_GE(t[i], -1.0);
    EXPECT_LE(t[i], 1.0);
  }
}

TEST(Dropout, InferenceIsIdentity) {
  Rng rng(31);
  const Tensor x = random_tensor({2, 10}, rng);
  const auto [y, tape] = dropout_forward(x, 0.5, DropoutMode::Infer, 123);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y[i], x[i]);
  (void)tape;
}

TEST(Dropout, ZeroFractionIsIdentityInTraining) {
  Rng rng(32);
  const Tensor x = random_tensor({2, 10}, rng);
  const auto [y, tape] = dropout_forward(x, 0.0, DropoutMode::Train, 123);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y[i], x[i]);
  (void)tape;
}

TEST(Dropout, SurvivorsScaledKilledZeroed) {
  Tensor x({1, 10000});
  x.fill(1.0);
  const double f = 0.5;
  const auto [y, tape] = dropout_forward(x, f, DropoutMode::Train, 99);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (tape.mask[i]) {
      EXPECT_DOUBLE_EQ(y[i], 2.0);
      ++kept;
    } else {
      EXPECT_DOUBLE_EQ(y[i], 0.0);
    }
  }
  // Keep rate concentrates near 1 - fraction.
  EXPECT_NEAR(static_cast<double>(kept) / x.size(), 0.5, 0.03);
  // Expected value is preserved on average.
  double mean = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) mean += y[i];
  EXPECT_NEAR(mean / y.size(), 1.0, 0.06);
}

TEST(Dropout, DeterministicUnderSeed) {
  Rng rng(33);
  const Tensor x = random_tensor({1, 64}, rng);
  const auto [y1, t1] = dropout_forward(x, 0.3, DropoutMode::Train, 7);
  const auto [y2, t2] = dropout_forward(x, 0.3, DropoutMode::Train, 7);
  EXPECT_EQ(t1.mask, t2.mask);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y1[i], y2[i]);
}

TEST(Dropout, RejectsBadFraction) {
  Tensor x({1, 4});
  EXPECT_THROW(dropout_forward(x, -0.1, DropoutMode::Train, 1), InvalidFraction);
  EXPECT_THROW(dropout_forward(x, 1.0, DropoutMode::Train, 1), InvalidFraction);
  EXPECT_THROW(dropout_forward(x, 1.5, DropoutMode::Train, 1), InvalidFraction);
}
