#pragma once

#include <filesystem>
#include <string>

#include "decor/voxel_grid.hpp"

namespace decor {

enum class GenMaskMode { Strict, Loose };

const char* to_string(GenMaskMode mode);
GenMaskMode parse_gen_mask_mode(const std::string& s);

// High-resolution region outside which generated voxels are zeroed.
struct GeneratorMask {
  VoxelGrid grid;
  GenMaskMode mode = GenMaskMode::Loose;
};

// Half-resolution selector of discriminator score cells.
struct DiscriminatorMask {
  VoxelGrid grid;
};

// strict: upsample_nearest(content, factor)
// loose:  upsample_nearest(dilate(content, 1), factor)
GeneratorMask generator_mask(const VoxelGrid& content, int factor, GenMaskMode mode);

// Cell (i,j,k) is set iff the detailed shape has an occupied voxel inside the
// window [2i-1, 2i+2] x [2j-1, 2j+2] x [2k-1, 2k+2], clamped to the grid.
DiscriminatorMask discriminator_mask_real(const VoxelGrid& detailed);

// Nearest-neighbour upsampling of the content by 2.
DiscriminatorMask discriminator_mask_fake(const VoxelGrid& content);

// Mask caching keyed by a content hash of the inputs plus a tag naming the
// mask kind and mode, e.g. "gen-loose-4".
std::string mask_cache_name(const VoxelGrid& input, const std::string& tag);

template <typename Build>
VoxelGrid cached_mask(const std::filesystem::path& cache_dir, const VoxelGrid& input, const std::string& tag,
                      Build&& build);

}  // namespace decor

#include "decor/voxel_io.hpp"

namespace decor {

template <typename Build>
VoxelGrid cached_mask(const std::filesystem::path& cache_dir, const VoxelGrid& input, const std::string& tag,
                      Build&& build) {
  if (cache_dir.empty()) return build(input);
  const auto path = cache_dir / mask_cache_name(input, tag);
  if (std::filesystem::exists(path)) return load_voxels(path);
  VoxelGrid mask = build(input);
  std::filesystem::create_directories(cache_dir);
  save_voxels(mask, path);
  return mask;
}

}  // namespace decor
