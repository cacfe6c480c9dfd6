#include "decor/models.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "decor/checkpoint.hpp"
#include "decor/errors.hpp"

namespace decor {
namespace {

constexpr float kWeightStd = 0.02f;
constexpr float kCodeStd = 0.1f;

ad::Tensor normal_tensor(ad::Shape shape, float stddev, std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0f, stddev);
  std::vector<float> values(ad::numel(shape));
  for (auto& v : values) v = dist(rng);
  return ad::Tensor::from(std::move(shape), std::move(values), true);
}

ConvLayer make_conv(int cin, int cout, int k, ad::Conv3dOptions opt, std::mt19937_64& rng) {
  return {normal_tensor({cout, cin, k, k, k}, kWeightStd, rng), ad::Tensor::zeros({cout}, true), opt, false};
}

// Stride-2 transposed conv that exactly doubles each spatial dim.
ConvLayer make_up(int cin, int cout, std::mt19937_64& rng) {
  return {normal_tensor({cin, cout, 4, 4, 4}, kWeightStd, rng), ad::Tensor::zeros({cout}, true), {2, 1, 1}, true};
}

void append_layers(std::vector<ad::NamedTensor>& out, const std::string& prefix,
                   const std::vector<ConvLayer>& layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string base = prefix + "/conv" + std::to_string(i) + "/";
    out.push_back({base + "weight", layers[i].weight});
    out.push_back({base + "bias", layers[i].bias});
  }
}

ad::Tensor with_code(const ad::Tensor& x, const ad::Tensor& code) {
  return ad::concat_channels({x, ad::broadcast_channels(code, x.dim(1), x.dim(2), x.dim(3))});
}

int meta_int(const std::vector<ad::NamedTensor>& stored, const std::string& name, std::size_t i) {
  const auto* t = ad::find_tensor(stored, name);
  if (!t || t->tensor.numel() <= i) throw FormatError("checkpoint lacks " + name);
  const float v = t->tensor.data()[i];
  if (v < 1.0f || v > 4096.0f) throw FormatError("checkpoint " + name + " holds an invalid value");
  return static_cast<int>(v);
}

}  // namespace

ad::Tensor ConvLayer::operator()(const ad::Tensor& x) const {
  return transposed ? ad::conv_transpose3d(x, weight, bias, options) : ad::conv3d(x, weight, bias, options);
}

Generator::Generator(const GeneratorArch& arch, std::mt19937_64& rng) : arch_(arch) {
  const int k = arch.kernel;
  if (k <= 0 || std::ranges::any_of(arch.widths, [](int w) { return w <= 0; })) {
    throw ConfigError("generator widths and kernel must be positive");
  }
  const auto same = ad::Conv3dOptions::same(k);
  const auto& w = arch.widths;
  layers_.push_back(make_conv(1 + kStyleDim, w[0], k, same, rng));
  layers_.push_back(make_conv(w[0], w[1], k, same, rng));
  layers_.push_back(make_up(w[1], w[2], rng));
  layers_.push_back(make_conv(w[2] + kStyleDim, w[2], k, same, rng));
  layers_.push_back(make_up(w[2], w[3], rng));
  layers_.push_back(make_conv(w[3] + kStyleDim, w[3], k, same, rng));
  layers_.push_back(make_conv(w[3], 1, 1, {}, rng));
}

ad::Tensor Generator::forward(const ad::Tensor& content, const ad::Tensor& code) const {
  if (layers_.empty()) throw ConfigError("generator is not initialised");
  if (code.rank() != 1 || code.dim(0) != kStyleDim) {
    throw ShapeError("style code must have shape [8], got " + ad::to_string(code.shape()));
  }
  if (content.rank() != 4 || content.dim(0) != 1) {
    throw ShapeError("generator content must have shape [1, D, H, W], got " + ad::to_string(content.shape()));
  }
  auto x = ad::leaky_relu(layers_[0](with_code(content, code)));
  x = ad::leaky_relu(layers_[1](x));
  for (std::size_t level = 0; level < 2; ++level) {
    x = ad::leaky_relu(layers_[2 + 2 * level](x));
    x = ad::leaky_relu(layers_[3 + 2 * level](with_code(x, code)));
  }
  return ad::sigmoid(layers_[6](x));
}

VoxelGrid Generator::raw(const VoxelGrid& content, std::span<const float> code) const {
  ad::NoGradGuard no_grad;
  const auto code_t = ad::Tensor::from({static_cast<int>(code.size())}, {code.begin(), code.end()});
  return to_grid(forward(to_tensor(content), code_t));
}

std::vector<ad::NamedTensor> Generator::parameters() const {
  std::vector<ad::NamedTensor> out;
  append_layers(out, "generator", layers_);
  return out;
}

Discriminator::Discriminator(const DiscriminatorArch& arch, int n_styles, std::mt19937_64& rng)
    : arch_(arch), n_styles_(n_styles) {
  if (n_styles <= 0) throw ConfigError("discriminator needs at least one style branch");
  if (std::ranges::any_of(arch.widths, [](int w) { return w <= 0; })) {
    throw ConfigError("discriminator widths must be positive");
  }
  const auto& w = arch.widths;
  layers_.push_back(make_conv(1, w[0], 4, {2, 1, 1}, rng));
  layers_.push_back(make_conv(w[0], w[1], 3, {1, 1, 1}, rng));
  layers_.push_back(make_conv(w[1], w[2], 3, {1, 1, 1}, rng));
  layers_.push_back(make_conv(w[2], n_styles + 1, 4, {1, 1, 2}, rng));
}

ad::Tensor Discriminator::forward(const ad::Tensor& grid) const {
  if (layers_.empty()) throw ConfigError("discriminator is not initialised");
  if (grid.rank() != 4 || grid.dim(0) != 1) {
    throw ShapeError("discriminator input must have shape [1, D, H, W], got " + ad::to_string(grid.shape()));
  }
  for (int a = 1; a <= 3; ++a) {
    if (grid.dim(a) < kReceptiveField || grid.dim(a) % 2 != 0) {
      throw DimensionError("discriminator input dims must be even and >= 18, got " + ad::to_string(grid.shape()));
    }
  }
  auto x = ad::leaky_relu(layers_[0](grid));
  x = ad::leaky_relu(layers_[1](x));
  x = ad::leaky_relu(layers_[2](x));
  return ad::sigmoid(layers_[3](x));
}

std::vector<ad::NamedTensor> Discriminator::parameters() const {
  std::vector<ad::NamedTensor> out;
  append_layers(out, "discriminator", layers_);
  return out;
}

StyleCodebook::StyleCodebook(std::vector<std::string> ids, std::mt19937_64& rng) : ids_(std::move(ids)) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i].empty()) throw ConfigError("style ids must be non-empty");
    if (std::find(ids_.begin(), ids_.begin() + static_cast<std::ptrdiff_t>(i), ids_[i]) !=
        ids_.begin() + static_cast<std::ptrdiff_t>(i)) {
      throw ConfigError("duplicate style id '" + ids_[i] + "'");
    }
    codes_.push_back(normal_tensor({kStyleDim}, kCodeStd, rng));
  }
}

std::size_t StyleCodebook::index_of(const std::string& id) const {
  const auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) throw NotFoundError("unknown style id '" + id + "'");
  return static_cast<std::size_t>(it - ids_.begin());
}

std::vector<float> StyleCodebook::code_values(std::size_t i) const {
  const auto d = codes_.at(i).data();
  return {d.begin(), d.end()};
}

std::vector<ad::NamedTensor> StyleCodebook::parameters() const {
  std::vector<ad::NamedTensor> out;
  for (std::size_t i = 0; i < ids_.size(); ++i) out.push_back({"style_code/" + ids_[i], codes_[i]});
  return out;
}

DecorModel DecorModel::init(std::uint64_t seed, const std::vector<std::string>& style_ids,
                            const GeneratorArch& g_arch, const DiscriminatorArch& d_arch) {
  if (style_ids.empty()) throw ConfigError("model needs at least one style");
  std::mt19937_64 rng(seed);
  DecorModel m;
  m.generator = Generator(g_arch, rng);
  m.discriminator = Discriminator(d_arch, static_cast<int>(style_ids.size()), rng);
  m.codebook = StyleCodebook(style_ids, rng);
  return m;
}

std::vector<ad::NamedTensor> DecorModel::generator_side() const {
  auto out = generator.parameters();
  for (auto& p : codebook.parameters()) out.push_back(std::move(p));
  return out;
}

std::vector<ad::NamedTensor> DecorModel::tensors() const {
  const auto& ga = generator.arch();
  const auto& da = discriminator.arch();
  std::vector<ad::NamedTensor> out;
  out.push_back({"meta/generator_arch",
                 ad::Tensor::from({5}, {static_cast<float>(ga.kernel), static_cast<float>(ga.widths[0]),
                                        static_cast<float>(ga.widths[1]), static_cast<float>(ga.widths[2]),
                                        static_cast<float>(ga.widths[3])})});
  out.push_back({"meta/discriminator_arch",
                 ad::Tensor::from({3}, {static_cast<float>(da.widths[0]), static_cast<float>(da.widths[1]),
                                        static_cast<float>(da.widths[2])})});
  for (auto& p : generator.parameters()) out.push_back(std::move(p));
  for (auto& p : discriminator.parameters()) out.push_back(std::move(p));
  for (auto& p : codebook.parameters()) out.push_back(std::move(p));
  return out;
}

void DecorModel::save(const std::filesystem::path& path, const std::vector<ad::NamedTensor>& extra) const {
  auto all = tensors();
  all.insert(all.end(), extra.begin(), extra.end());
  ad::save_checkpoint(path, all);
}

DecorModel DecorModel::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  return from_tensors(ad::load_checkpoint(path));
}

DecorModel DecorModel::from_tensors(const std::vector<ad::NamedTensor>& stored) {
  GeneratorArch ga;
  ga.kernel = meta_int(stored, "meta/generator_arch", 0);
  for (std::size_t i = 0; i < 4; ++i) ga.widths[i] = meta_int(stored, "meta/generator_arch", i + 1);
  DiscriminatorArch da;
  for (std::size_t i = 0; i < 3; ++i) da.widths[i] = meta_int(stored, "meta/discriminator_arch", i);

  const std::string code_prefix = "style_code/";
  std::vector<std::string> ids;
  for (const auto& t : stored) {
    if (t.name.starts_with(code_prefix)) ids.push_back(t.name.substr(code_prefix.size()));
  }
  if (ids.empty()) throw FormatError("checkpoint holds no style codes");

  // Values are overwritten below, so the init seed is irrelevant.
  DecorModel m = init(0, ids, ga, da);
  auto targets = m.tensors();
  targets.erase(targets.begin(), targets.begin() + 2);
  ad::assign_parameters(stored, targets, {"meta/", "adam"});
  return m;
}

ad::Tensor to_tensor(const VoxelGrid& grid) {
  const auto& d = grid.dims();
  const auto v = grid.values();
  return ad::Tensor::from({1, d.z, d.y, d.x}, {v.begin(), v.end()});
}

VoxelGrid to_grid(const ad::Tensor& t, VoxelKind kind) {
  if (t.rank() != 4 || t.dim(0) != 1) throw ShapeError("expected a [1, D, H, W] tensor, got " + ad::to_string(t.shape()));
  const auto v = t.data();
  return VoxelGrid({t.dim(3), t.dim(2), t.dim(1)}, kind, {v.begin(), v.end()});
}

}  // namespace decor
