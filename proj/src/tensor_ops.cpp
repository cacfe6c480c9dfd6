#include "decor/tensor_ops.hpp"

#include <array>
#include <cmath>
#include <string>

#include "decor/conv3d.hpp"
#include "decor/errors.hpp"

namespace decor::ad {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
}

void require_volume(const Tensor& x, const char* op) {
  if (x.rank() != 4) throw ShapeError(std::string(op) + " expects [C, D, H, W], got " + to_string(x.shape()));
}

bool wants_grad(const Node& n, std::size_t parent) {
  return parent < n.parents.size() && n.parents[parent] && n.parents[parent]->requires_grad;
}

}  // namespace

Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias, const Conv3dOptions& opt) {
  require_volume(input, "conv3d");
  if (weight.rank() != 5 || weight.dim(1) != input.dim(0) || weight.dim(2) != weight.dim(3) ||
      weight.dim(2) != weight.dim(4)) {
    throw ShapeError("conv3d: weight " + to_string(weight.shape()) + " incompatible with input " +
                     to_string(input.shape()));
  }
  const int cout = weight.dim(0);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw ShapeError("conv3d: bias " + to_string(bias.shape()) + " does not match " + std::to_string(cout) +
                     " output channels");
  }
  const ConvGeometry g = ConvGeometry::make(input.dim(0), cout, weight.dim(2), opt.stride, opt.pad_lo, opt.pad_hi,
                                            {input.dim(1), input.dim(2), input.dim(3)});
  std::vector<float> out(static_cast<std::size_t>(cout) * g.out_voxels());
  conv3d_forward(g, input.data().data(), weight.data().data(), bias.defined() ? bias.data().data() : nullptr,
                 out.data());
  std::vector<Tensor> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result({cout, g.out[0], g.out[1], g.out[2]}, std::move(out), "conv3d", std::move(parents),
                     [g](Node& self) {
                       Node& in = *self.parents[0];
                       Node& w = *self.parents[1];
                       float* gi = in.requires_grad ? in.grad_buffer().data() : nullptr;
                       float* gw = w.requires_grad ? w.grad_buffer().data() : nullptr;
                       float* gb = wants_grad(self, 2) ? self.parents[2]->grad_buffer().data() : nullptr;
                       conv3d_backward(g, in.value.data(), w.value.data(), self.grad.data(), gi, gw, gb);
                     });
}

Tensor conv_transpose3d(const Tensor& input, const Tensor& weight, const Tensor& bias, const Conv3dOptions& opt) {
  require_volume(input, "conv_transpose3d");
  if (weight.rank() != 5 || weight.dim(0) != input.dim(0) || weight.dim(2) != weight.dim(3) ||
      weight.dim(2) != weight.dim(4)) {
    throw ShapeError("conv_transpose3d: weight " + to_string(weight.shape()) + " incompatible with input " +
                     to_string(input.shape()));
  }
  const int cout = weight.dim(1);
  const int k = weight.dim(2);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw ShapeError("conv_transpose3d: bias does not match output channels");
  }
  std::array<int, 3> big{};
  for (int a = 0; a < 3; ++a) {
    big[a] = (input.dim(a + 1) - 1) * opt.stride + k - opt.pad_lo - opt.pad_hi;
    if (big[a] <= 0) throw ShapeError("conv_transpose3d: non-positive output size");
  }
  // Geometry of the adjoint forward conv: big [cout] -> small [cin].
  const ConvGeometry g = ConvGeometry::make(cout, input.dim(0), k, opt.stride, opt.pad_lo, opt.pad_hi, big);
  if (g.out[0] != input.dim(1) || g.out[1] != input.dim(2) || g.out[2] != input.dim(3)) {
    throw ShapeError("conv_transpose3d: stride/padding not invertible for input " + to_string(input.shape()));
  }
  std::vector<float> out(static_cast<std::size_t>(cout) * g.in_voxels());
  conv_transpose3d_forward(g, input.data().data(), weight.data().data(),
                           bias.defined() ? bias.data().data() : nullptr, out.data());
  std::vector<Tensor> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result({cout, big[0], big[1], big[2]}, std::move(out), "conv_transpose3d", std::move(parents),
                     [g](Node& self) {
                       Node& in = *self.parents[0];
                       Node& w = *self.parents[1];
                       float* gi = in.requires_grad ? in.grad_buffer().data() : nullptr;
                       float* gw = w.requires_grad ? w.grad_buffer().data() : nullptr;
                       float* gb = wants_grad(self, 2) ? self.parents[2]->grad_buffer().data() : nullptr;
                       conv_transpose3d_backward(g, in.value.data(), w.value.data(), self.grad.data(), gi, gw, gb);
                     });
}

Tensor leaky_relu(const Tensor& x, float slope) {
  std::vector<float> out(x.numel());
  const auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] > 0.0f ? v[i] : slope * v[i];
  return make_result(x.shape(), std::move(out), "leaky_relu", {x}, [slope](Node& self) {
    Node& in = *self.parents[0];
    auto gi = in.grad_buffer();
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += in.value[i] > 0.0f ? self.grad[i] : slope * self.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<float> out(x.numel());
  const auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0f / (1.0f + std::exp(-v[i]));
  return make_result(x.shape(), std::move(out), "sigmoid", {x}, [](Node& self) {
    auto gi = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < gi.size(); ++i) {
      const float s = self.value[i];
      gi[i] += self.grad[i] * s * (1.0f - s);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<float> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(out), "add", {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants_grad(self, p)) continue;
      auto g = self.parents[p]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<float> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(a.shape(), std::move(out), "mul", {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& x, float factor) {
  std::vector<float> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * factor;
  return make_result(x.shape(), std::move(out), "scale", {x}, [factor](Node& self) {
    auto g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  return make_result({1}, {static_cast<float>(acc)}, "sum", {x}, [](Node& self) {
    auto g = self.parents[0]->grad_buffer();
    for (float& v : g) v += self.grad[0];
  });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels needs at least one input");
  int channels = 0;
  for (const auto& p : parts) {
    require_volume(p, "concat_channels");
    if (p.dim(1) != parts[0].dim(1) || p.dim(2) != parts[0].dim(2) || p.dim(3) != parts[0].dim(3)) {
      throw ShapeError("concat_channels: spatial dims differ (" + to_string(p.shape()) + " vs " +
                       to_string(parts[0].shape()) + ")");
    }
    channels += p.dim(0);
  }
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(channels) * parts[0].dim(1) * parts[0].dim(2) * parts[0].dim(3));
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result({channels, parts[0].dim(1), parts[0].dim(2), parts[0].dim(3)}, std::move(out), "concat",
                     parts, [](Node& self) {
                       std::size_t offset = 0;
                       for (auto& parent : self.parents) {
                         const std::size_t n = parent->value.size();
                         if (parent->requires_grad) {
                           auto g = parent->grad_buffer();
                           for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
                         }
                         offset += n;
                       }
                     });
}

Tensor broadcast_channels(const Tensor& code, int d, int h, int w) {
  if (code.rank() != 1) throw ShapeError("broadcast_channels expects a vector, got " + to_string(code.shape()));
  const int c = code.dim(0);
  const std::size_t vol = static_cast<std::size_t>(d) * h * w;
  if (vol == 0 || d < 0 || h < 0 || w < 0) throw ShapeError("broadcast_channels: spatial dims must be positive");
  std::vector<float> out(static_cast<std::size_t>(c) * vol);
  for (int i = 0; i < c; ++i) std::fill_n(out.begin() + i * vol, vol, code.data()[i]);
  return make_result({c, d, h, w}, std::move(out), "broadcast", {code}, [vol](Node& self) {
    auto g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < vol; ++j) acc += self.grad[i * vol + j];
      g[i] += static_cast<float>(acc);
    }
  });
}

Tensor upsample_nearest2(const Tensor& x) {
  require_volume(x, "upsample_nearest2");
  const int C = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int D2 = 2 * D, H2 = 2 * H, W2 = 2 * W;
  std::vector<float> out(static_cast<std::size_t>(C) * D2 * H2 * W2);
  const auto v = x.data();
  for (int c = 0; c < C; ++c)
    for (int z = 0; z < D2; ++z)
      for (int y = 0; y < H2; ++y) {
        const float* src = v.data() + ((static_cast<std::size_t>(c) * D + z / 2) * H + y / 2) * W;
        float* dst = out.data() + ((static_cast<std::size_t>(c) * D2 + z) * H2 + y) * W2;
        for (int xx = 0; xx < W2; ++xx) dst[xx] = src[xx / 2];
      }
  return make_result({C, D2, H2, W2}, std::move(out), "upsample2", {x}, [C, D, H, W](Node& self) {
    auto g = self.parents[0]->grad_buffer();
    const int D2 = 2 * D, H2 = 2 * H, W2 = 2 * W;
    for (int c = 0; c < C; ++c)
      for (int z = 0; z < D2; ++z)
        for (int y = 0; y < H2; ++y) {
          float* dst = g.data() + ((static_cast<std::size_t>(c) * D + z / 2) * H + y / 2) * W;
          const float* src = self.grad.data() + ((static_cast<std::size_t>(c) * D2 + z) * H2 + y) * W2;
          for (int xx = 0; xx < W2; ++xx) dst[xx / 2] += src[xx];
        }
  });
}

Tensor select_channel(const Tensor& x, int channel) {
  require_volume(x, "select_channel");
  if (channel < 0 || channel >= x.dim(0)) {
    throw ShapeError("select_channel: channel " + std::to_string(channel) + " out of range for " +
                     to_string(x.shape()));
  }
  const std::size_t vol = static_cast<std::size_t>(x.dim(1)) * x.dim(2) * x.dim(3);
  std::vector<float> out(x.data().begin() + channel * vol, x.data().begin() + (channel + 1) * vol);
  return make_result({1, x.dim(1), x.dim(2), x.dim(3)}, std::move(out), "select_channel", {x},
                     [channel, vol](Node& self) {
                       auto g = self.parents[0]->grad_buffer();
                       for (std::size_t i = 0; i < vol; ++i) g[channel * vol + i] += self.grad[i];
                     });
}

Tensor masked_mse(const Tensor& pred, const Tensor& target, const Tensor& mask, double normalizer) {
  require_same_shape(pred, target, "masked_mse");
  require_same_shape(pred, mask, "masked_mse");
  if (!(normalizer > 0.0)) throw ParameterError("masked_mse normalizer must be positive");
  const auto p = pred.data();
  const auto t = target.data();
  const auto m = mask.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double r = (static_cast<double>(p[i]) - t[i]) * m[i];
    acc += r * r;
  }
  const float loss = static_cast<float>(acc / normalizer);
  const Tensor target_ref = target;
  const Tensor mask_ref = mask;
  return make_result({1}, {loss}, "masked_mse", {pred}, [target_ref, mask_ref, normalizer](Node& self) {
    Node& in = *self.parents[0];
    auto g = in.grad_buffer();
    const auto t = target_ref.data();
    const auto m = mask_ref.data();
    const double scale = 2.0 * self.grad[0] / normalizer;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double mm = static_cast<double>(m[i]) * m[i];
      g[i] += static_cast<float>(scale * (static_cast<double>(in.value[i]) - t[i]) * mm);
    }
  });
}

}  // namespace decor::ad
