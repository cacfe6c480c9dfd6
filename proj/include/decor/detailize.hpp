#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "decor/masks.hpp"
#include "decor/models.hpp"
#include "decor/voxel_grid.hpp"

namespace decor {

enum class Postprocess { None, Components };

const char* to_string(Postprocess p);
Postprocess parse_postprocess(const std::string& s);

struct DetailizeOptions {
  GenMaskMode mask = GenMaskMode::Loose;
  Postprocess postprocess = Postprocess::None;
  bool symmetric = false;  // generate the x >= dx/2 half and mirror it
};

struct Detailized {
  VoxelGrid voxels;  // binary, 4x the content dims
  VoxelGrid field;   // masked generator output, continuous
};

// Masks a raw generator field of `content` (both full size), thresholds at
// 0.5 and applies the post-process.
Detailized finalize_output(const VoxelGrid& raw, const VoxelGrid& content, const DetailizeOptions& options);

// The generator runs on the content's dilated bounding box; everything
// outside the crop is zero.
Detailized detailize(const Generator& generator, const VoxelGrid& content, std::span<const float> code,
                     const DetailizeOptions& options = {});

// Field for surface extraction at 0.5: the masked output, held at or below
// 0.5 wherever the post-process removed a voxel.
VoxelGrid mesh_field(const Detailized& d);
// Loads the checkpoint (IoError if missing) and uses the code of `style_id`.
Detailized detailize(const std::filesystem::path& checkpoint, const VoxelGrid& content, const std::string& style_id,
                     const DetailizeOptions& options = {});

}  // namespace decor
