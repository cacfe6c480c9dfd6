#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "decor/voxel_grid.hpp"

namespace decor {

// Vertices are in voxel coordinates: voxel (x, y, z) has its centre at
// (x, y, z). Triangles wind counter-clockwise seen from outside.
struct TriangleMesh {
  std::vector<std::array<float, 3>> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  bool empty() const { return triangles.empty(); }
  bool operator==(const TriangleMesh&) const = default;
};

// Surface between values > iso (inside) and <= iso. The field is treated as
// zero outside its bounds, so shapes touching the border still close.
// Vertices are shared between the cells of an edge; triangles that collapse
// after that sharing are dropped. Throws ParameterError unless 0 < iso < 1,
// DimensionError when an axis is shorter than 2.
TriangleMesh marching_cubes(const VoxelGrid& field, double iso = 0.5);

// OBJ text: "v x y z" lines then "f a b c" lines (1-based), %.9g floats.
void write_obj(const TriangleMesh& mesh, std::ostream& out);
void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);
// Reads the v/f subset written above; other records are ignored. Faces with
// more than three corners are fanned. Throws FormatError.
TriangleMesh read_obj(std::istream& in);
TriangleMesh load_obj(const std::filesystem::path& path);

// Little-endian: u32 vertex count | u32 triangle count | f32 xyz per vertex |
// u32 abc per triangle.
std::vector<std::uint8_t> encode_mesh_blob(const TriangleMesh& mesh);
TriangleMesh decode_mesh_blob(std::span<const std::uint8_t> bytes);

}  // namespace decor
