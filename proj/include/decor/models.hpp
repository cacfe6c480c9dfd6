#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "decor/adam.hpp"
#include "decor/tensor.hpp"
#include "decor/tensor_ops.hpp"
#include "decor/voxel_grid.hpp"

namespace decor {

inline constexpr int kStyleDim = 8;
inline constexpr int kUpsampleFactor = 4;
inline constexpr int kReceptiveField = 18;

// Generator channel widths: two coarse convs, then one width per x2 level.
struct GeneratorArch {
  int kernel = 3;
  std::array<int, 4> widths{24, 24, 16, 12};
  bool operator==(const GeneratorArch&) const = default;
};

struct DiscriminatorArch {
  std::array<int, 3> widths{16, 32, 32};
  bool operator==(const DiscriminatorArch&) const = default;
};

struct ConvLayer {
  ad::Tensor weight;
  ad::Tensor bias;
  ad::Conv3dOptions options;
  bool transposed = false;

  ad::Tensor operator()(const ad::Tensor& x) const;
};

// Style-conditioned 4x upsampler:
//   [content | code] -> conv, LReLU -> conv, LReLU
//   -> (convT x2, LReLU, [.. | code], conv, LReLU) twice
//   -> conv 1x1 -> sigmoid
class Generator {
 public:
  Generator() = default;
  Generator(const GeneratorArch& arch, std::mt19937_64& rng);

  // content [1, D, H, W], code [8] -> raw occupancy [1, 4D, 4H, 4W] in (0, 1).
  ad::Tensor forward(const ad::Tensor& content, const ad::Tensor& code) const;
  // Inference helper; no graph is recorded.
  VoxelGrid raw(const VoxelGrid& content, std::span<const float> code) const;

  const GeneratorArch& arch() const { return arch_; }
  std::vector<ad::NamedTensor> parameters() const;

 private:
  GeneratorArch arch_;
  std::vector<ConvLayer> layers_;
};

// PatchGAN with an 18^3 receptive field and N+1 output branches
// (channel 0 global, channel s+1 for style s).
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const DiscriminatorArch& arch, int n_styles, std::mt19937_64& rng);

  // grid [1, D, H, W] with even dims >= 18 -> scores [N+1, D/2, H/2, W/2].
  ad::Tensor forward(const ad::Tensor& grid) const;

  int n_styles() const { return n_styles_; }
  const DiscriminatorArch& arch() const { return arch_; }
  std::vector<ad::NamedTensor> parameters() const;

 private:
  DiscriminatorArch arch_;
  int n_styles_ = 0;
  std::vector<ConvLayer> layers_;
};

// One learnable 8-D code per training exemplar.
class StyleCodebook {
 public:
  StyleCodebook() = default;
  StyleCodebook(std::vector<std::string> ids, std::mt19937_64& rng);

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const ad::Tensor& code(std::size_t i) const { return codes_.at(i); }
  // Throws NotFoundError.
  std::size_t index_of(const std::string& id) const;
  std::vector<float> code_values(std::size_t i) const;
  std::vector<ad::NamedTensor> parameters() const;  // "style_code/<id>"

 private:
  std::vector<std::string> ids_;
  std::vector<ad::Tensor> codes_;
};

struct DecorModel {
  Generator generator;
  Discriminator discriminator;
  StyleCodebook codebook;

  // Weights ~ N(0, 0.02), biases 0, codes ~ N(0, 0.1^2); same seed, same model.
  static DecorModel init(std::uint64_t seed, const std::vector<std::string>& style_ids,
                         const GeneratorArch& g_arch = {}, const DiscriminatorArch& d_arch = {});

  // Generator + codebook (the parameters the G step updates).
  std::vector<ad::NamedTensor> generator_side() const;
  // Every parameter plus architecture metadata under "meta/".
  std::vector<ad::NamedTensor> tensors() const;

  void save(const std::filesystem::path& path, const std::vector<ad::NamedTensor>& extra = {}) const;
  // Rebuilds architecture from metadata, then assigns weights. Optimizer state
  // ("adam/...") is ignored here.
  static DecorModel load(const std::filesystem::path& path);
  static DecorModel from_tensors(const std::vector<ad::NamedTensor>& stored);
};

// Grid <-> tensor bridges ([1, D, H, W] with D = z, W = x).
ad::Tensor to_tensor(const VoxelGrid& grid);
VoxelGrid to_grid(const ad::Tensor& t, VoxelKind kind = VoxelKind::Continuous);

}  // namespace decor
