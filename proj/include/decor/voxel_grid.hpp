#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace decor {

struct Dims {
  int x = 0;
  int y = 0;
  int z = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  bool valid() const { return x > 0 && y > 0 && z > 0; }
  Dims scaled(int f) const { return {x * f, y * f, z * f}; }
  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);

enum class VoxelKind : std::uint8_t { Binary = 0, Continuous = 1 };

// Dense scalar lattice, x fastest then y then z. Binary grids hold exactly
// 0 or 1; continuous grids hold values in [0, 1].
class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(Dims dims, VoxelKind kind);
  // Validates the kind invariant; throws DimensionError / KindError.
  VoxelGrid(Dims dims, VoxelKind kind, std::vector<float> values);

  static VoxelGrid binary(Dims dims) { return {dims, VoxelKind::Binary}; }
  static VoxelGrid continuous(Dims dims) { return {dims, VoxelKind::Continuous}; }

  const Dims& dims() const { return dims_; }
  VoxelKind kind() const { return kind_; }
  bool is_binary() const { return kind_ == VoxelKind::Binary; }
  std::size_t size() const { return values_.size(); }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims_.y + y) * dims_.x + x;
  }
  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims_.x && y < dims_.y && z < dims_.z;
  }
  float at(int x, int y, int z) const { return values_[index(x, y, z)]; }
  bool occupied(int x, int y, int z) const { return at(x, y, z) > 0.5f; }

  // Unchecked write; callers building binary grids must store 0 or 1.
  void set(int x, int y, int z, float v) { values_[index(x, y, z)] = v; }

  std::span<const float> values() const { return values_; }
  std::span<float> mutable_values() { return values_; }

  std::size_t occupied_count() const;
  bool any_occupied() const;

  VoxelGrid as_continuous() const;
  // Binary grid of cells whose value is strictly above `level`.
  VoxelGrid threshold(float level = 0.5f) const;

  bool operator==(const VoxelGrid& o) const {
    return dims_ == o.dims_ && kind_ == o.kind_ && values_ == o.values_;
  }

 private:
  Dims dims_{};
  VoxelKind kind_ = VoxelKind::Binary;
  std::vector<float> values_;
};

// 64-bit FNV-1a over dims, kind and payload; used for cache keys.
std::uint64_t content_hash(const VoxelGrid& g);

}  // namespace decor
