#include "decor/detailize.hpp"

#include <algorithm>

#include "decor/errors.hpp"
#include "decor/voxel_ops.hpp"

namespace decor {

const char* to_string(Postprocess p) { return p == Postprocess::Components ? "components" : "none"; }

Postprocess parse_postprocess(const std::string& s) {
  if (s == "none") return Postprocess::None;
  if (s == "components") return Postprocess::Components;
  throw ParameterError("unknown postprocess '" + s + "'");
}

Detailized finalize_output(const VoxelGrid& raw, const VoxelGrid& content, const DetailizeOptions& options) {
  const VoxelGrid c = content.threshold();
  if (raw.dims() != c.dims().scaled(kUpsampleFactor)) {
    throw DimensionError("raw field " + to_string(raw.dims()) + " is not 4x the content " + to_string(c.dims()));
  }
  const auto mask = generator_mask(c, kUpsampleFactor, options.mask).grid;
  Detailized out;
  out.field = multiply(raw.as_continuous(), mask.as_continuous());
  out.voxels = out.field.threshold(0.5f);
  if (options.postprocess == Postprocess::Components) {
    const auto strict = options.mask == GenMaskMode::Strict
                            ? mask
                            : generator_mask(c, kUpsampleFactor, GenMaskMode::Strict).grid;
    out.voxels = keep_components_touching(out.voxels, strict);
  }
  return out;
}

Detailized detailize(const Generator& generator, const VoxelGrid& content, std::span<const float> code,
                     const DetailizeOptions& options) {
  const VoxelGrid full = content.threshold();
  if (options.symmetric) {
    const VoxelGrid half = halve_symmetric(full);
    DetailizeOptions inner = options;
    inner.symmetric = false;
    auto h = detailize(generator, half, code, inner);
    return {mirror_symmetric(h.voxels), mirror_symmetric(h.field)};
  }
  Detailized out{VoxelGrid::binary(full.dims().scaled(kUpsampleFactor)),
                 VoxelGrid::continuous(full.dims().scaled(kUpsampleFactor))};
  if (!full.any_occupied()) return out;
  const auto [low, high] = crop_to_dilated_bbox(full, kUpsampleFactor);
  const VoxelGrid c = crop(full, low);
  auto part = finalize_output(generator.raw(c, code), c, options);
  paste(out.voxels, high, part.voxels);
  paste(out.field, high, part.field);
  return out;
}

VoxelGrid mesh_field(const Detailized& d) {
  VoxelGrid out = d.field;
  const auto v = out.mutable_values();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (d.voxels.values()[i] <= 0.5f) v[i] = std::min(v[i], 0.5f);
  return out;
}

Detailized detailize(const std::filesystem::path& checkpoint, const VoxelGrid& content, const std::string& style_id,
                     const DetailizeOptions& options) {
  const auto model = DecorModel::load(checkpoint);
  const auto code = model.codebook.code_values(model.codebook.index_of(style_id));
  return detailize(model.generator, content, code, options);
}

}  // namespace decor
