#pragma once

#include <array>
#include <cstddef>

namespace decor::ad {

// Geometry of a dense 3-D cross-correlation over channels-first volumes
// [C, D, H, W] with a cubic kernel, uniform stride, and per-side zero padding
// (pad_lo before, pad_hi after, the same on every axis).
struct ConvGeometry {
  int cin = 0;
  int cout = 0;
  int kernel = 1;
  int stride = 1;
  int pad_lo = 0;
  int pad_hi = 0;
  std::array<int, 3> in{};   // D, H, W
  std::array<int, 3> out{};  // derived

  static ConvGeometry make(int cin, int cout, int kernel, int stride, int pad_lo, int pad_hi,
                           std::array<int, 3> in_dims);

  std::size_t patch_len() const { return static_cast<std::size_t>(cin) * kernel * kernel * kernel; }
  std::size_t in_voxels() const { return static_cast<std::size_t>(in[0]) * in[1] * in[2]; }
  std::size_t out_voxels() const { return static_cast<std::size_t>(out[0]) * out[1] * out[2]; }
};

// GEMM-backed kernels. Stride-1 convolutions use an implicit GEMM over a
// zero-padded flat layout (one GEMM per kernel tap, chunked over positions);
// strided ones unroll patches with a blocked im2row. Chunk and tile order is
// fixed, so results do not depend on scheduling.
void conv3d_forward(const ConvGeometry& g, const float* input, const float* weight, const float* bias,
                    float* output);

// The im2row route for any stride; kept callable for cross-checks.
void conv3d_forward_rows(const ConvGeometry& g, const float* input, const float* weight, const float* bias,
                         float* output);

// Accumulates into any non-null gradient buffer.
void conv3d_backward(const ConvGeometry& g, const float* input, const float* weight, const float* grad_output,
                     float* grad_input, float* grad_weight, float* grad_bias);

// Transposed convolution: the adjoint of the conv described by `g`, mapping
// a [g.cout, g.out] volume to [g.cin, g.in]. weight layout [g.cout, g.cin, k, k, k].
void conv_transpose3d_forward(const ConvGeometry& g, const float* input, const float* weight, const float* bias,
                              float* output);
void conv_transpose3d_backward(const ConvGeometry& g, const float* input, const float* weight,
                               const float* grad_output, float* grad_input, float* grad_weight, float* grad_bias);

// Straight six-loop reference, used by tests and benchmarks.
void conv3d_forward_direct(const ConvGeometry& g, const float* input, const float* weight, const float* bias,
                           float* output);

// Pins the BLAS backend to `n` threads (1 gives bitwise-reproducible runs).
void set_kernel_threads(int n);

}  // namespace decor::ad
