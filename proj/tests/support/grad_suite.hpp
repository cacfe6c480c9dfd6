#pragma once

// Random finite-difference instances for every differentiable op and for the
// full generator and discriminator graphs.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "decor/conv3d.hpp"
#include "decor/models.hpp"
#include "decor/tensor_ops.hpp"
#include "gradcheck.hpp"

namespace decor::reference {

struct GradCase {
  std::string name;
  std::function<GradCheck(std::mt19937_64&, int)> run;  // (rng, instance index)
};

namespace grad_detail {

inline int rand_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// sum(f(x) o R): every output element gets a distinct upstream weight.
inline ad::Tensor weighted(const ad::Tensor& y, const ad::Tensor& r) { return ad::sum(ad::mul(y, r)); }

// Pushes values away from the activation kink so that +-h never crosses it.
inline ad::Tensor away_from_zero(ad::Tensor t) {
  for (auto& v : t.mutable_data())
    if (std::fabs(v) < 0.01f) v = v < 0 ? -0.01f - std::fabs(v) : 0.01f + v;
  return t;
}

// Unary op against its reference under a random upstream weight.
inline GradCheck unary(std::mt19937_64& rng, const ad::Tensor& x, const std::function<ad::Tensor(const ad::Tensor&)>& f,
                       const std::function<RT(const RT&)>& g, const ad::Shape& out_shape) {
  const auto r = random_tensor(out_shape, rng);
  const auto rr = from_tensor(r);
  return grad_check(
      {x}, [&](const std::vector<ad::Tensor>& in) { return weighted(f(in[0]), r); },
      [&](const std::vector<RT>& in) { return dot(g(in[0]), rr); }, rng);
}

inline ad::Shape small_shape(std::mt19937_64& rng) {
  return {rand_int(rng, 1, 3), rand_int(rng, 1, 3), rand_int(rng, 1, 3), rand_int(rng, 1, 3)};
}

// Parameters redrawn at a fan-in scale so that activations stay away from
// saturation and the gradient carries signal through every layer.
inline void randomize(const std::vector<ad::NamedTensor>& params, std::mt19937_64& rng) {
  for (const auto& p : params) {
    auto t = p.tensor;
    const auto& s = t.shape();
    const double fan_in = s.size() > 1 ? double(t.numel()) / s[0] : 4.0;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : t.mutable_data()) v = static_cast<float>(u(rng) * std::sqrt(3.0 / fan_in));
  }
}

inline std::vector<ad::Tensor> tensors_of(const std::vector<ad::NamedTensor>& params) {
  std::vector<ad::Tensor> out;
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

inline Params params_from(const std::vector<ad::NamedTensor>& named, const std::vector<RT>& values) {
  Params p;
  for (std::size_t i = 0; i < named.size(); ++i) p.items.emplace_back(named[i].name, values[i]);
  return p;
}

}  // namespace grad_detail

inline std::vector<GradCase> grad_cases() {
  using namespace grad_detail;
  using ad::Tensor;
  std::vector<GradCase> cases;

  cases.push_back({"conv3d", [](std::mt19937_64& rng, int) {
                     const int cin = rand_int(rng, 1, 3), cout = rand_int(rng, 1, 3), k = rand_int(rng, 1, 4);
                     const int stride = rand_int(rng, 1, 2), pl = rand_int(rng, 0, 1), ph = rand_int(rng, 0, 2);
                     const int n = std::max(rand_int(rng, 2, 5), k);
                     const int m = (n + pl + ph - k) / stride + 1;
                     const auto r = random_tensor({cout, m, m, m}, rng);
                     const auto rr = from_tensor(r);
                     return grad_check(
                         {random_tensor({cin, n, n, n}, rng), random_tensor({cout, cin, k, k, k}, rng),
                          random_tensor({cout}, rng)},
                         [&](const std::vector<Tensor>& in) {
                           return weighted(ad::conv3d(in[0], in[1], in[2], {stride, pl, ph}), r);
                         },
                         [&](const std::vector<RT>& in) { return dot(conv3d(in[0], in[1], &in[2], stride, pl, ph), rr); },
                         rng);
                   }});

  cases.push_back({"conv_transpose3d", [](std::mt19937_64& rng, int) {
                     const int cin = rand_int(rng, 1, 3), cout = rand_int(rng, 1, 3), n = rand_int(rng, 1, 3);
                     const auto r = random_tensor({cout, 2 * n, 2 * n, 2 * n}, rng);
                     const auto rr = from_tensor(r);
                     return grad_check(
                         {random_tensor({cin, n, n, n}, rng), random_tensor({cin, cout, 4, 4, 4}, rng),
                          random_tensor({cout}, rng)},
                         [&](const std::vector<Tensor>& in) {
                           return weighted(ad::conv_transpose3d(in[0], in[1], in[2], {2, 1, 1}), r);
                         },
                         [&](const std::vector<RT>& in) { return dot(conv_transpose3d(in[0], in[1], &in[2], 2, 1, 1), rr); },
                         rng);
                   }});

  cases.push_back({"leaky_relu", [](std::mt19937_64& rng, int) {
                     const auto s = small_shape(rng);
                     return unary(rng, away_from_zero(random_tensor(s, rng)), [](const Tensor& x) { return ad::leaky_relu(x); },
                                  [](const RT& x) { return leaky_relu(x); }, s);
                   }});
  cases.push_back({"sigmoid", [](std::mt19937_64& rng, int) {
                     const auto s = small_shape(rng);
                     return unary(rng, random_tensor(s, rng), [](const Tensor& x) { return ad::sigmoid(x); },
                                  [](const RT& x) { return sigmoid(x); }, s);
                   }});
  cases.push_back({"scale", [](std::mt19937_64& rng, int) {
                     const auto s = small_shape(rng);
                     const float f = static_cast<float>(std::uniform_real_distribution<double>(-3, 3)(rng));
                     return unary(rng, random_tensor(s, rng), [f](const Tensor& x) { return ad::scale(x, f); },
                                  [f](const RT& x) { return map(x, [f](double v) { return v * f; }); }, s);
                   }});
  cases.push_back({"upsample_nearest2", [](std::mt19937_64& rng, int) {
                     const auto s = small_shape(rng);
                     return unary(rng, random_tensor(s, rng), [](const Tensor& x) { return ad::upsample_nearest2(x); },
                                  [](const RT& x) { return upsample2(x); }, {s[0], 2 * s[1], 2 * s[2], 2 * s[3]});
                   }});
  cases.push_back({"select_channel", [](std::mt19937_64& rng, int) {
                     const auto s = small_shape(rng);
                     const int ch = rand_int(rng, 0, s[0] - 1);
                     return unary(rng, random_tensor(s, rng), [ch](const Tensor& x) { return ad::select_channel(x, ch); },
                                  [ch](const RT& x) { return select_channel(x, ch); }, {1, s[1], s[2], s[3]});
                   }});
  cases.push_back({"sum", [](std::mt19937_64& rng, int) {
                     return grad_check(
                         {random_tensor(small_shape(rng), rng)}, [](const std::vector<Tensor>& in) { return ad::sum(in[0]); },
                         [](const std::vector<RT>& in) { return sum(in[0]); }, rng);
                   }});

  const auto binary = [](const char* name, Tensor (*f)(const Tensor&, const Tensor&), RT (*g)(const RT&, const RT&)) {
    return GradCase{name, [f, g](std::mt19937_64& rng, int) {
                      const auto s = small_shape(rng);
                      const auto r = random_tensor(s, rng);
                      const auto rr = from_tensor(r);
                      return grad_check(
                          {random_tensor(s, rng), random_tensor(s, rng)},
                          [&](const std::vector<Tensor>& in) { return weighted(f(in[0], in[1]), r); },
                          [&](const std::vector<RT>& in) { return dot(g(in[0], in[1]), rr); }, rng);
                    }};
  };
  cases.push_back(binary("add", ad::add, add));
  cases.push_back(binary("mul", ad::mul, mul));

  cases.push_back({"concat_channels", [](std::mt19937_64& rng, int) {
                     const auto s = small_shape(rng);
                     const ad::Shape s2{rand_int(rng, 1, 3), s[1], s[2], s[3]};
                     const auto r = random_tensor({s[0] + s2[0], s[1], s[2], s[3]}, rng);
                     const auto rr = from_tensor(r);
                     return grad_check(
                         {random_tensor(s, rng), random_tensor(s2, rng)},
                         [&](const std::vector<Tensor>& in) { return weighted(ad::concat_channels({in[0], in[1]}), r); },
                         [&](const std::vector<RT>& in) { return dot(concat({in[0], in[1]}), rr); }, rng);
                   }});
  cases.push_back({"broadcast_channels", [](std::mt19937_64& rng, int) {
                     const auto s = small_shape(rng);
                     const auto r = random_tensor({kStyleDim, s[1], s[2], s[3]}, rng);
                     const auto rr = from_tensor(r);
                     return grad_check(
                         {random_tensor({kStyleDim}, rng)},
                         [&](const std::vector<Tensor>& in) {
                           return weighted(ad::broadcast_channels(in[0], s[1], s[2], s[3]), r);
                         },
                         [&](const std::vector<RT>& in) { return dot(broadcast(in[0], s[1], s[2], s[3]), rr); }, rng);
                   }});
  cases.push_back({"masked_mse", [](std::mt19937_64& rng, int i) {
                     const auto s = small_shape(rng);
                     const auto target = random_tensor(s, rng);
                     auto mask = random_tensor(s, rng, 0, 1);
                     for (auto& v : mask.mutable_data()) v = v > 0.3f ? 1.0f : 0.0f;
                     const auto mr = from_tensor(mask), tr = from_tensor(target);
                     const double norm = 0.5 + i;
                     return grad_check(
                         {random_tensor(s, rng)},
                         [&](const std::vector<Tensor>& in) { return ad::masked_mse(in[0], target, mask, norm); },
                         [&](const std::vector<RT>& in) { return masked_mse(in[0], tr, mr, norm); }, rng);
                   }});

  cases.push_back({"conv + activation graph", [](std::mt19937_64& rng, int) {
                     const int n = rand_int(rng, 3, 5);
                     const auto r = random_tensor({2, n, n, n}, rng);
                     const auto rr = from_tensor(r);
                     return grad_check(
                         {random_tensor({1, n, n, n}, rng), random_tensor({3, 1, 3, 3, 3}, rng),
                          random_tensor({2, 3, 3, 3, 3}, rng, -0.3, 0.3)},
                         [&](const std::vector<Tensor>& in) {
                           auto h = ad::leaky_relu(ad::conv3d(in[0], in[1], Tensor{}, ad::Conv3dOptions::same(3)));
                           return weighted(ad::sigmoid(ad::conv3d(h, in[2], Tensor{}, ad::Conv3dOptions::same(3))), r);
                         },
                         [&](const std::vector<RT>& in) {
                           auto h = leaky_relu(conv3d(in[0], in[1], nullptr, 1, 1, 1));
                           return dot(sigmoid(conv3d(h, in[2], nullptr, 1, 1, 1)), rr);
                         },
                         rng);
                   }});

  // Every parameter, the style code and the content of a narrow generator.
  cases.push_back({"generator", [](std::mt19937_64& rng, int) {
                     const GeneratorArch arch{3, {3, 3, 2, 2}};
                     const Generator gen(arch, rng);
                     const auto named = gen.parameters();
                     randomize(named, rng);
                     const int n = rand_int(rng, 2, 3);
                     auto inputs = tensors_of(named);
                     inputs.push_back(random_tensor({kStyleDim}, rng));
                     inputs.push_back(random_tensor({1, n, n, n}, rng, 0.0, 1.0));
                     const auto r = random_tensor({1, 4 * n, 4 * n, 4 * n}, rng);
                     const auto rr = from_tensor(r);
                     const std::size_t np = named.size();
                     return grad_check(
                         inputs,
                         [&](const std::vector<Tensor>& in) { return weighted(gen.forward(in[np + 1], in[np]), r); },
                         [&](const std::vector<RT>& in) {
                           return dot(generator(params_from(named, in), in[np + 1], in[np], arch.kernel), rr);
                         },
                         rng, 4);
                   }});

  cases.push_back({"discriminator", [](std::mt19937_64& rng, int) {
                     const int styles = rand_int(rng, 1, 3);
                     const Discriminator dis(DiscriminatorArch{{2, 3, 2}}, styles, rng);
                     const auto named = dis.parameters();
                     randomize(named, rng);
                     const int n = kReceptiveField;
                     auto inputs = tensors_of(named);
                     inputs.push_back(random_tensor({1, n, n, n}, rng, 0.0, 1.0));
                     const auto r = random_tensor({styles + 1, n / 2, n / 2, n / 2}, rng);
                     const auto rr = from_tensor(r);
                     const std::size_t np = named.size();
                     return grad_check(
                         inputs, [&](const std::vector<Tensor>& in) { return weighted(dis.forward(in[np]), r); },
                         [&](const std::vector<RT>& in) { return dot(discriminator(params_from(named, in), in[np]), rr); },
                         rng, 4);
                   }});
  return cases;
}

}  // namespace decor::reference
