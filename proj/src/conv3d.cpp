#include "decor/conv3d.hpp"

#include <cblas.h>

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "decor/errors.hpp"

extern "C" void openblas_set_num_threads(int num_threads);

namespace decor::ad {
namespace {

constexpr std::size_t kTileFloats = std::size_t{1} << 20;

std::size_t tile_positions(const ConvGeometry& g) {
  const std::size_t k = g.patch_len();
  return std::clamp<std::size_t>(kTileFloats / k, 64, std::max<std::size_t>(g.out_voxels(), 1));
}

// Unrolls output positions [p0, p1) into rows of patch_len values.
void im2row(const ConvGeometry& g, const float* input, std::size_t p0, std::size_t p1, float* rows) {
  const int k = g.kernel;
  const int D = g.in[0], H = g.in[1], W = g.in[2];
  const int OH = g.out[1], OW = g.out[2];
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t vol = plane * D;
  const std::size_t klen = g.patch_len();
  for (std::size_t p = p0; p < p1; ++p) {
    const int ox = static_cast<int>(p % OW);
    const int oy = static_cast<int>((p / OW) % OH);
    const int oz = static_cast<int>(p / (static_cast<std::size_t>(OW) * OH));
    const int bx = ox * g.stride - g.pad_lo;
    const int by = oy * g.stride - g.pad_lo;
    const int bz = oz * g.stride - g.pad_lo;
    const bool x_inside = bx >= 0 && bx + k <= W;
    float* row = rows + (p - p0) * klen;
    for (int c = 0; c < g.cin; ++c) {
      const float* src_c = input + c * vol;
      for (int kz = 0; kz < k; ++kz) {
        const int iz = bz + kz;
        for (int ky = 0; ky < k; ++ky, row += k) {
          const int iy = by + ky;
          if (iz < 0 || iz >= D || iy < 0 || iy >= H) {
            std::fill(row, row + k, 0.0f);
            continue;
          }
          const float* src = src_c + iz * plane + static_cast<std::size_t>(iy) * W;
          if (x_inside) {
            std::memcpy(row, src + bx, sizeof(float) * k);
          } else {
            for (int kx = 0; kx < k; ++kx) {
              const int ix = bx + kx;
              row[kx] = (ix >= 0 && ix < W) ? src[ix] : 0.0f;
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2row: scatters row gradients back onto the input.
void row2im_add(const ConvGeometry& g, const float* rows, std::size_t p0, std::size_t p1, float* grad_input) {
  const int k = g.kernel;
  const int D = g.in[0], H = g.in[1], W = g.in[2];
  const int OH = g.out[1], OW = g.out[2];
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t vol = plane * D;
  const std::size_t klen = g.patch_len();
  for (std::size_t p = p0; p < p1; ++p) {
    const int ox = static_cast<int>(p % OW);
    const int oy = static_cast<int>((p / OW) % OH);
    const int oz = static_cast<int>(p / (static_cast<std::size_t>(OW) * OH));
    const int bx = ox * g.stride - g.pad_lo;
    const int by = oy * g.stride - g.pad_lo;
    const int bz = oz * g.stride - g.pad_lo;
    const float* row = rows + (p - p0) * klen;
    for (int c = 0; c < g.cin; ++c) {
      float* dst_c = grad_input + c * vol;
      for (int kz = 0; kz < k; ++kz) {
        const int iz = bz + kz;
        for (int ky = 0; ky < k; ++ky, row += k) {
          const int iy = by + ky;
          if (iz < 0 || iz >= D || iy < 0 || iy >= H) continue;
          float* dst = dst_c + iz * plane + static_cast<std::size_t>(iy) * W;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = bx + kx;
            if (ix >= 0 && ix < W) dst[ix] += row[kx];
          }
        }
      }
    }
  }
}

std::vector<float>& scratch(int slot) {
  thread_local std::vector<float> buffers[3];
  return buffers[slot];
}


// Stride-1 convolutions run as an implicit GEMM over a zero-padded copy of the
// input. With the padded volume flattened, output position q (in padded
// coordinates) reads input q + off(kz, ky, kx), so each kernel offset is one
// GEMM against a shifted view; positions that wrap into the padding columns
// are computed and then dropped.
struct FlatLayout {
  std::array<int, 3> padded{};  // Dp, Hp, Wp
  std::size_t padded_voxels = 0;
  std::size_t span = 0;  // flat output positions covering every valid output
  std::vector<std::size_t> offsets;  // per kernel tap, in (kz, ky, kx) order

  explicit FlatLayout(const ConvGeometry& g) {
    for (int a = 0; a < 3; ++a) padded[a] = g.in[a] + g.pad_lo + g.pad_hi;
    padded_voxels = static_cast<std::size_t>(padded[0]) * padded[1] * padded[2];
    span = (static_cast<std::size_t>(g.out[0] - 1) * padded[1] + (g.out[1] - 1)) * padded[2] + g.out[2];
    const int k = g.kernel;
    for (int kz = 0; kz < k; ++kz)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx)
          offsets.push_back((static_cast<std::size_t>(kz) * padded[1] + ky) * padded[2] + kx);
  }

  std::size_t flat(int z, int y, int x) const {
    return (static_cast<std::size_t>(z) * padded[1] + y) * padded[2] + x;
  }
};

constexpr std::size_t kFlatChunk = 4096;

void pad_into(const ConvGeometry& g, const FlatLayout& L, const float* src, int channels, float* dst) {
  std::fill(dst, dst + static_cast<std::size_t>(channels) * L.padded_voxels, 0.0f);
  const int D = g.in[0], H = g.in[1], W = g.in[2];
  for (int c = 0; c < channels; ++c)
    for (int z = 0; z < D; ++z)
      for (int y = 0; y < H; ++y) {
        const float* s = src + ((static_cast<std::size_t>(c) * D + z) * H + y) * W;
        float* d = dst + c * L.padded_voxels + L.flat(z + g.pad_lo, y + g.pad_lo, g.pad_lo);
        std::memcpy(d, s, sizeof(float) * W);
      }
}

// weight [cout, cin, taps] -> packed [taps][cout][cin]
void pack_taps(const ConvGeometry& g, const float* weight, std::vector<float>& packed) {
  const std::size_t taps = static_cast<std::size_t>(g.kernel) * g.kernel * g.kernel;
  packed.resize(taps * g.cout * g.cin);
  for (int co = 0; co < g.cout; ++co)
    for (int ci = 0; ci < g.cin; ++ci)
      for (std::size_t t = 0; t < taps; ++t)
        packed[(t * g.cout + co) * g.cin + ci] = weight[(static_cast<std::size_t>(co) * g.cin + ci) * taps + t];
}

std::vector<float>& flat_scratch(int slot) {
  thread_local std::vector<float> buffers[4];
  return buffers[slot];
}

void conv3d_forward_flat(const ConvGeometry& g, const float* input, const float* weight, const float* bias,
                         float* output) {
  const FlatLayout L(g);
  auto& padded = flat_scratch(0);
  auto& packed = flat_scratch(1);
  auto& out_flat = flat_scratch(2);
  padded.resize(static_cast<std::size_t>(g.cin) * L.padded_voxels);
  pad_into(g, L, input, g.cin, padded.data());
  pack_taps(g, weight, packed);
  out_flat.resize(static_cast<std::size_t>(g.cout) * L.span);
  const std::size_t wk = static_cast<std::size_t>(g.cout) * g.cin;
  for (std::size_t q0 = 0; q0 < L.span; q0 += kFlatChunk) {
    const int n = static_cast<int>(std::min(kFlatChunk, L.span - q0));
    for (std::size_t t = 0; t < L.offsets.size(); ++t) {
      // out[cout, n] (+)= W_t[cout, cin] * in_pad[cin, q0 + off_t ..]
      cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, g.cout, n, g.cin, 1.0f, packed.data() + t * wk, g.cin,
                  padded.data() + q0 + L.offsets[t], static_cast<int>(L.padded_voxels), t ? 1.0f : 0.0f,
                  out_flat.data() + q0, static_cast<int>(L.span));
    }
  }
  const int OD = g.out[0], OH = g.out[1], OW = g.out[2];
  for (int c = 0; c < g.cout; ++c) {
    const float b = bias ? bias[c] : 0.0f;
    for (int z = 0; z < OD; ++z)
      for (int y = 0; y < OH; ++y) {
        const float* s = out_flat.data() + c * L.span + L.flat(z, y, 0);
        float* d = output + ((static_cast<std::size_t>(c) * OD + z) * OH + y) * OW;
        for (int x = 0; x < OW; ++x) d[x] = s[x] + b;
      }
  }
}

void conv3d_backward_flat(const ConvGeometry& g, const float* input, const float* weight, const float* grad_output,
                          float* grad_input, float* grad_weight) {
  const FlatLayout L(g);
  auto& padded = flat_scratch(0);
  auto& packed = flat_scratch(1);
  auto& dout_flat = flat_scratch(2);
  auto& dpad = flat_scratch(3);
  const int OD = g.out[0], OH = g.out[1], OW = g.out[2];
  dout_flat.assign(static_cast<std::size_t>(g.cout) * L.span, 0.0f);
  for (int c = 0; c < g.cout; ++c)
    for (int z = 0; z < OD; ++z)
      for (int y = 0; y < OH; ++y)
        std::memcpy(dout_flat.data() + c * L.span + L.flat(z, y, 0),
                    grad_output + ((static_cast<std::size_t>(c) * OD + z) * OH + y) * OW, sizeof(float) * OW);
  const std::size_t taps = L.offsets.size();
  const std::size_t wk = static_cast<std::size_t>(g.cout) * g.cin;

  if (grad_weight) {
    padded.resize(static_cast<std::size_t>(g.cin) * L.padded_voxels);
    pad_into(g, L, input, g.cin, padded.data());
    packed.assign(taps * wk, 0.0f);
    for (std::size_t q0 = 0; q0 < L.span; q0 += kFlatChunk) {
      const int n = static_cast<int>(std::min(kFlatChunk, L.span - q0));
      for (std::size_t t = 0; t < taps; ++t) {
        // dW_t[cout, cin] += dout[cout, n] * in_pad[cin, q0 + off_t ..]^T
        cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, g.cout, g.cin, n, 1.0f, dout_flat.data() + q0,
                    static_cast<int>(L.span), padded.data() + q0 + L.offsets[t], static_cast<int>(L.padded_voxels),
                    1.0f, packed.data() + t * wk, g.cin);
      }
    }
    for (int co = 0; co < g.cout; ++co)
      for (int ci = 0; ci < g.cin; ++ci)
        for (std::size_t t = 0; t < taps; ++t)
          grad_weight[(static_cast<std::size_t>(co) * g.cin + ci) * taps + t] += packed[(t * g.cout + co) * g.cin + ci];
  }

  if (grad_input) {
    pack_taps(g, weight, packed);
    dpad.assign(static_cast<std::size_t>(g.cin) * L.padded_voxels, 0.0f);
    for (std::size_t q0 = 0; q0 < L.span; q0 += kFlatChunk) {
      const int n = static_cast<int>(std::min(kFlatChunk, L.span - q0));
      for (std::size_t t = 0; t < taps; ++t) {
        // d_in_pad[cin, q0 + off_t ..] += W_t^T[cin, cout] * dout[cout, n]
        cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, g.cin, n, g.cout, 1.0f, packed.data() + t * wk, g.cin,
                    dout_flat.data() + q0, static_cast<int>(L.span), 1.0f, dpad.data() + q0 + L.offsets[t],
                    static_cast<int>(L.padded_voxels));
      }
    }
    const int D = g.in[0], H = g.in[1], W = g.in[2];
    for (int c = 0; c < g.cin; ++c)
      for (int z = 0; z < D; ++z)
        for (int y = 0; y < H; ++y) {
          const float* s = dpad.data() + c * L.padded_voxels + L.flat(z + g.pad_lo, y + g.pad_lo, g.pad_lo);
          float* d = grad_input + ((static_cast<std::size_t>(c) * D + z) * H + y) * W;
          for (int x = 0; x < W; ++x) d[x] += s[x];
        }
  }
}

}  // namespace

ConvGeometry ConvGeometry::make(int cin, int cout, int kernel, int stride, int pad_lo, int pad_hi,
                                std::array<int, 3> in_dims) {
  if (cin <= 0 || cout <= 0 || kernel <= 0 || stride <= 0 || pad_lo < 0 || pad_hi < 0) {
    throw ShapeError("invalid conv3d parameters");
  }
  ConvGeometry g;
  g.cin = cin;
  g.cout = cout;
  g.kernel = kernel;
  g.stride = stride;
  g.pad_lo = pad_lo;
  g.pad_hi = pad_hi;
  g.in = in_dims;
  for (int a = 0; a < 3; ++a) {
    const int padded = in_dims[a] + pad_lo + pad_hi;
    if (in_dims[a] <= 0 || padded < kernel) {
      throw ShapeError("conv3d: spatial dim " + std::to_string(in_dims[a]) + " with padding " +
                       std::to_string(pad_lo) + "+" + std::to_string(pad_hi) + " is smaller than kernel " +
                       std::to_string(kernel));
    }
    g.out[a] = (padded - kernel) / stride + 1;
  }
  return g;
}

void conv3d_forward(const ConvGeometry& g, const float* input, const float* weight, const float* bias,
                    float* output) {
  if (g.stride == 1) return conv3d_forward_flat(g, input, weight, bias, output);
  conv3d_forward_rows(g, input, weight, bias, output);
}

void conv3d_forward_rows(const ConvGeometry& g, const float* input, const float* weight, const float* bias,
                         float* output) {
  const std::size_t P = g.out_voxels();
  const std::size_t K = g.patch_len();
  const std::size_t tile = tile_positions(g);
  auto& rows = scratch(0);
  auto& out_t = scratch(1);
  rows.resize(tile * K);
  out_t.resize(tile * g.cout);
  for (std::size_t p0 = 0; p0 < P; p0 += tile) {
    const std::size_t p1 = std::min(P, p0 + tile);
    const int n = static_cast<int>(p1 - p0);
    im2row(g, input, p0, p1, rows.data());
    // out_t[n, cout] = rows[n, K] * weight[cout, K]^T
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, n, g.cout, static_cast<int>(K), 1.0f, rows.data(),
                static_cast<int>(K), weight, static_cast<int>(K), 0.0f, out_t.data(), g.cout);
    for (int c = 0; c < g.cout; ++c) {
      float* dst = output + c * P + p0;
      const float b = bias ? bias[c] : 0.0f;
      for (int i = 0; i < n; ++i) dst[i] = out_t[static_cast<std::size_t>(i) * g.cout + c] + b;
    }
  }
}

void conv3d_backward(const ConvGeometry& g, const float* input, const float* weight, const float* grad_output,
                     float* grad_input, float* grad_weight, float* grad_bias) {
  const std::size_t P = g.out_voxels();
  const std::size_t K = g.patch_len();
  if (grad_bias) {
    for (int c = 0; c < g.cout; ++c) {
      double acc = 0.0;
      const float* src = grad_output + c * P;
      for (std::size_t i = 0; i < P; ++i) acc += src[i];
      grad_bias[c] += static_cast<float>(acc);
    }
  }
  if (!grad_input && !grad_weight) return;
  if (g.stride == 1) return conv3d_backward_flat(g, input, weight, grad_output, grad_input, grad_weight);
  const std::size_t tile = tile_positions(g);
  auto& rows = scratch(0);
  auto& dout_t = scratch(1);
  auto& drows = scratch(2);
  rows.resize(tile * K);
  dout_t.resize(tile * g.cout);
  if (grad_input) drows.resize(tile * K);
  for (std::size_t p0 = 0; p0 < P; p0 += tile) {
    const std::size_t p1 = std::min(P, p0 + tile);
    const int n = static_cast<int>(p1 - p0);
    for (int c = 0; c < g.cout; ++c) {
      const float* src = grad_output + c * P + p0;
      for (int i = 0; i < n; ++i) dout_t[static_cast<std::size_t>(i) * g.cout + c] = src[i];
    }
    if (grad_weight) {
      im2row(g, input, p0, p1, rows.data());
      // grad_weight[cout, K] += dout_t[n, cout]^T * rows[n, K]
      cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, g.cout, static_cast<int>(K), n, 1.0f, dout_t.data(),
                  g.cout, rows.data(), static_cast<int>(K), 1.0f, grad_weight, static_cast<int>(K));
    }
    if (grad_input) {
      // drows[n, K] = dout_t[n, cout] * weight[cout, K]
      cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, n, static_cast<int>(K), g.cout, 1.0f, dout_t.data(),
                  g.cout, weight, static_cast<int>(K), 0.0f, drows.data(), static_cast<int>(K));
      row2im_add(g, drows.data(), p0, p1, grad_input);
    }
  }
}

void conv_transpose3d_forward(const ConvGeometry& g, const float* input, const float* weight, const float* bias,
                              float* output) {
  const std::size_t vol = g.in_voxels();
  std::fill(output, output + static_cast<std::size_t>(g.cin) * vol, 0.0f);
  conv3d_backward(g, nullptr, weight, input, output, nullptr, nullptr);
  if (bias) {
    for (int c = 0; c < g.cin; ++c) {
      float* dst = output + c * vol;
      for (std::size_t i = 0; i < vol; ++i) dst[i] += bias[c];
    }
  }
}

void conv_transpose3d_backward(const ConvGeometry& g, const float* input, const float* weight,
                               const float* grad_output, float* grad_input, float* grad_weight, float* grad_bias) {
  const std::size_t vol = g.in_voxels();
  if (grad_bias) {
    for (int c = 0; c < g.cin; ++c) {
      double acc = 0.0;
      const float* src = grad_output + c * vol;
      for (std::size_t i = 0; i < vol; ++i) acc += src[i];
      grad_bias[c] += static_cast<float>(acc);
    }
  }
  if (grad_input) {
    std::vector<float> tmp(static_cast<std::size_t>(g.cout) * g.out_voxels());
    conv3d_forward(g, grad_output, weight, nullptr, tmp.data());
    for (std::size_t i = 0; i < tmp.size(); ++i) grad_input[i] += tmp[i];
  }
  // <g, T_W x> = <C_W g, x>, so the weight gradient is the forward conv's
  // weight gradient with input g and upstream gradient x.
  if (grad_weight) conv3d_backward(g, grad_output, weight, input, nullptr, grad_weight, nullptr);
}

void conv3d_forward_direct(const ConvGeometry& g, const float* input, const float* weight, const float* bias,
                           float* output) {
  const int k = g.kernel;
  const int D = g.in[0], H = g.in[1], W = g.in[2];
  const std::size_t vol = static_cast<std::size_t>(D) * H * W;
  for (int co = 0; co < g.cout; ++co)
    for (int oz = 0; oz < g.out[0]; ++oz)
      for (int oy = 0; oy < g.out[1]; ++oy)
        for (int ox = 0; ox < g.out[2]; ++ox) {
          double acc = bias ? bias[co] : 0.0;
          for (int ci = 0; ci < g.cin; ++ci)
            for (int kz = 0; kz < k; ++kz)
              for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                  const int iz = oz * g.stride - g.pad_lo + kz;
                  const int iy = oy * g.stride - g.pad_lo + ky;
                  const int ix = ox * g.stride - g.pad_lo + kx;
                  if (iz < 0 || iy < 0 || ix < 0 || iz >= D || iy >= H || ix >= W) continue;
                  acc += static_cast<double>(
                             weight[(((static_cast<std::size_t>(co) * g.cin + ci) * k + kz) * k + ky) * k + kx]) *
                         input[ci * vol + (static_cast<std::size_t>(iz) * H + iy) * W + ix];
                }
          output[co * g.out_voxels() + (static_cast<std::size_t>(oz) * g.out[1] + oy) * g.out[2] + ox] =
              static_cast<float>(acc);
        }
}

void set_kernel_threads(int n) { openblas_set_num_threads(std::max(1, n)); }

}  // namespace decor::ad
