#pragma once

#include <optional>
#include <vector>

#include "dcpose/tensor.hpp"

namespace dcpose {

// Stride-1 convolution parameters. Padding is always dilation*(k-1)/2 so the
// spatial size is preserved.
struct ConvParams {
  Tensor4 weight;             // (out, in/groups, k, k)
  std::vector<double> bias;   // out
  int dilation = 1;
  int groups = 1;

  static ConvParams zeros(int in_ch, int out_ch, int kernel, int dilation = 1, int groups = 1);
  ConvParams zeros_like() const;

  int out_channels() const { return weight.n(); }
  int in_channels() const { return weight.c() * groups; }
  int kernel() const { return weight.h(); }
  int padding() const { return dilation * (kernel() - 1) / 2; }
  void validate() const;
};

Tensor4 conv2d(const Tensor4& x, const ConvParams& p);

// Returns dL/dx. Parameter gradients are accumulated into *grad when non-null.
Tensor4 conv2d_backward(const Tensor4& x, const ConvParams& p, const Tensor4& dy, ConvParams* grad);

// activation(conv2(activation(conv1(x))) + skip(x)); skip is a 1x1 projection
// when present, identity otherwise.
struct ResidualBlock {
  ConvParams conv1;
  ConvParams conv2;
  std::optional<ConvParams> skip;

  ResidualBlock zeros_like() const;
};

using ResidualStack = std::vector<ResidualBlock>;

// First block maps in->hidden->out (with projection when in != out), the
// remaining depth-1 blocks map out->hidden->out with identity skips. All
// convolutions use the same group count.
ResidualStack make_residual_stack(int in_ch, int hidden_ch, int out_ch, int depth, int groups);
ResidualStack zeros_like(const ResidualStack& s);

struct ResidualCache {
  struct Block {
    Tensor4 input, pre1, hidden, pre_out;
  };
  std::vector<Block> blocks;
};

Tensor4 residual_stack(const Tensor4& x, const ResidualStack& stack, ResidualCache* cache = nullptr);
Tensor4 residual_stack_backward(const ResidualCache& cache, const ResidualStack& stack, const Tensor4& dy,
                                ResidualStack* grad);

Tensor4 relu(Tensor4 x);
Tensor4 relu_backward(const Tensor4& pre, Tensor4 dy);
Tensor4 sigmoid(Tensor4 x);
// dy * s * (1 - s), given the sigmoid output s.
Tensor4 sigmoid_backward(const Tensor4& out, Tensor4 dy);

// Zero-padded bilinear interpolation of channel ch of batch item n.
double bilinear_sample(const Tensor4& x, int n, int ch, double y, double xcoord);

// Offsets: (n, 2*k*k, h, w), tap-major with (dy, dx) pairs. Masks: (n, k*k, h, w).
struct DeformInputs {
  Tensor4 offsets;
  Tensor4 masks;
};

Tensor4 deform_conv_v2(const Tensor4& x, const DeformInputs& in, const ConvParams& p);

struct DeformGrads {
  Tensor4 dx;
  Tensor4 doffsets;
  Tensor4 dmasks;
};

DeformGrads deform_conv_v2_backward(const Tensor4& x, const DeformInputs& in, const ConvParams& p,
                                    const Tensor4& dy, ConvParams* grad);

}  // namespace dcpose
