#include "decor/voxel_grid.hpp"

#include <algorithm>

#include "decor/errors.hpp"

namespace decor {

std::string to_string(const Dims& d) {
  return std::to_string(d.x) + "x" + std::to_string(d.y) + "x" + std::to_string(d.z);
}

VoxelGrid::VoxelGrid(Dims dims, VoxelKind kind) : dims_(dims), kind_(kind) {
  if (!dims.valid()) throw DimensionError("voxel grid dims must be positive, got " + to_string(dims));
  values_.assign(dims.count(), 0.0f);
}

VoxelGrid::VoxelGrid(Dims dims, VoxelKind kind, std::vector<float> values)
    : dims_(dims), kind_(kind), values_(std::move(values)) {
  if (!dims.valid()) throw DimensionError("voxel grid dims must be positive, got " + to_string(dims));
  if (values_.size() != dims.count()) {
    throw DimensionError("voxel payload has " + std::to_string(values_.size()) + " values, dims " +
                         to_string(dims) + " need " + std::to_string(dims.count()));
  }
  if (kind == VoxelKind::Binary) {
    for (float v : values_) {
      if (v != 0.0f && v != 1.0f) throw KindError("binary grid holds a value other than 0 or 1");
    }
  } else {
    for (float v : values_) {
      if (!(v >= 0.0f && v <= 1.0f)) throw KindError("continuous grid value outside [0, 1]");
    }
  }
}

std::size_t VoxelGrid::occupied_count() const {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](float v) { return v > 0.5f; }));
}

bool VoxelGrid::any_occupied() const {
  return std::any_of(values_.begin(), values_.end(), [](float v) { return v > 0.5f; });
}

VoxelGrid VoxelGrid::as_continuous() const {
  VoxelGrid out = *this;
  out.kind_ = VoxelKind::Continuous;
  return out;
}

VoxelGrid VoxelGrid::threshold(float level) const {
  VoxelGrid out(dims_, VoxelKind::Binary);
  for (std::size_t i = 0; i < values_.size(); ++i) out.values_[i] = values_[i] > level ? 1.0f : 0.0f;
  return out;
}

std::uint64_t content_hash(const VoxelGrid& g) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  const int d[3] = {g.dims().x, g.dims().y, g.dims().z};
  mix(d, sizeof(d));
  const auto kind = static_cast<std::uint8_t>(g.kind());
  mix(&kind, 1);
  mix(g.values().data(), g.values().size_bytes());
  return h;
}

}  // namespace decor
