#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "decor/voxel_grid.hpp"

namespace decor {

// VXB1 layout (little endian):
//   "VXB1" | u32 dx | u32 dy | u32 dz | u8 encoding | 3 reserved zero bytes | payload
// encoding 0: bit-packed occupancy, x fastest, LSB first, zero-padded to a byte.
// encoding 1: f32 per cell, same order.
inline constexpr std::size_t kVxb1HeaderSize = 20;

std::vector<std::uint8_t> encode_vxb1(const VoxelGrid& grid);
VoxelGrid decode_vxb1(std::span<const std::uint8_t> bytes);

// Reads VXB1 or binvox (detected from the leading bytes).
VoxelGrid load_voxels(const std::filesystem::path& path);
void save_voxels(const VoxelGrid& grid, const std::filesystem::path& path);

VoxelGrid decode_binvox(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace decor
