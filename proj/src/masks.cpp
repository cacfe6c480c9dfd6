#include "decor/masks.hpp"

#include <algorithm>
#include <cstdio>
#include <vector>

#include "decor/errors.hpp"
#include "decor/voxel_ops.hpp"

namespace decor {

const char* to_string(GenMaskMode mode) { return mode == GenMaskMode::Strict ? "strict" : "loose"; }

GenMaskMode parse_gen_mask_mode(const std::string& s) {
  if (s == "strict") return GenMaskMode::Strict;
  if (s == "loose") return GenMaskMode::Loose;
  throw ConfigError("unknown generator mask mode '" + s + "'");
}

GeneratorMask generator_mask(const VoxelGrid& content, int factor, GenMaskMode mode) {
  if (!content.is_binary()) throw KindError("generator mask needs a binary content shape");
  if (mode == GenMaskMode::Strict) return {upsample_nearest(content, factor), mode};
  return {upsample_nearest(dilate(content, 1), factor), mode};
}

DiscriminatorMask discriminator_mask_real(const VoxelGrid& detailed) {
  if (!detailed.is_binary()) throw KindError("discriminator mask needs a binary detailed shape");
  const Dims& d = detailed.dims();
  if (d.x % 2 || d.y % 2 || d.z % 2) throw DimensionError("discriminator mask needs even dims, got " + to_string(d));
  const Dims h{d.x / 2, d.y / 2, d.z / 2};

  // The window is a box, so "any occupied" separates per axis: reduce x,
  // then y, then z, each time mapping fine index ranges onto half-res cells.
  auto window = [](int i, int n) { return std::pair{std::max(0, 2 * i - 1), std::min(n - 1, 2 * i + 2)}; };

  std::vector<std::uint8_t> sx(static_cast<std::size_t>(h.x) * d.y * d.z, 0);
  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int i = 0; i < h.x; ++i) {
        auto [lo, hi] = window(i, d.x);
        bool any = false;
        for (int x = lo; x <= hi && !any; ++x) any = detailed.occupied(x, y, z);
        sx[(static_cast<std::size_t>(z) * d.y + y) * h.x + i] = any;
      }
  std::vector<std::uint8_t> sy(static_cast<std::size_t>(h.x) * h.y * d.z, 0);
  for (int z = 0; z < d.z; ++z)
    for (int j = 0; j < h.y; ++j)
      for (int i = 0; i < h.x; ++i) {
        auto [lo, hi] = window(j, d.y);
        bool any = false;
        for (int y = lo; y <= hi && !any; ++y) any = sx[(static_cast<std::size_t>(z) * d.y + y) * h.x + i];
        sy[(static_cast<std::size_t>(z) * h.y + j) * h.x + i] = any;
      }
  VoxelGrid out = VoxelGrid::binary(h);
  for (int k = 0; k < h.z; ++k)
    for (int j = 0; j < h.y; ++j)
      for (int i = 0; i < h.x; ++i) {
        auto [lo, hi] = window(k, d.z);
        bool any = false;
        for (int z = lo; z <= hi && !any; ++z) any = sy[(static_cast<std::size_t>(z) * h.y + j) * h.x + i];
        if (any) out.set(i, j, k, 1.0f);
      }
  return {std::move(out)};
}

DiscriminatorMask discriminator_mask_fake(const VoxelGrid& content) {
  if (!content.is_binary()) throw KindError("discriminator mask needs a binary content shape");
  return {upsample_nearest(content, 2)};
}

std::string mask_cache_name(const VoxelGrid& input, const std::string& tag) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(content_hash(input)));
  return tag + "-" + buf + ".vxb";
}

}  // namespace decor
