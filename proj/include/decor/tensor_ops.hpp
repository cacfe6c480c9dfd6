#pragma once

#include <vector>

#include "decor/tensor.hpp"

namespace decor::ad {

struct Conv3dOptions {
  int stride = 1;
  int pad_lo = 0;
  int pad_hi = 0;

  static Conv3dOptions same(int kernel) { return {1, (kernel - 1) / 2, kernel / 2}; }
};

// input [Cin, D, H, W], weight [Cout, Cin, k, k, k], bias [Cout] or undefined.
Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias, const Conv3dOptions& opt = {});

// input [Cin, D, H, W], weight [Cin, Cout, k, k, k], bias [Cout] or undefined.
// Output spatial size (n - 1) * stride + k - pad_lo - pad_hi.
Tensor conv_transpose3d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        const Conv3dOptions& opt = {});

Tensor leaky_relu(const Tensor& x, float slope = 0.02f);
Tensor sigmoid(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float factor);
Tensor sum(const Tensor& x);

// Concatenates [Ci, D, H, W] inputs along channels.
Tensor concat_channels(const std::vector<Tensor>& parts);

// code [C] -> [C, D, H, W], each channel constant.
Tensor broadcast_channels(const Tensor& code, int d, int h, int w);

// Nearest-neighbour x2 on every spatial axis of [C, D, H, W].
Tensor upsample_nearest2(const Tensor& x);

// [C, D, H, W] -> [1, D, H, W]
Tensor select_channel(const Tensor& x, int channel);

// ||(pred - target) o mask||^2 / normalizer, summed in double. Only `pred`
// receives a gradient. Throws ParameterError for normalizer <= 0.
Tensor masked_mse(const Tensor& pred, const Tensor& target, const Tensor& mask, double normalizer);

}  // namespace decor::ad
