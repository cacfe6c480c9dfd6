#pragma once

#include <array>
#include <utility>

#include "decor/voxel_grid.hpp"

namespace decor {

// Axis-aligned box inside a grid. `scale_factor` records the resolution
// ratio relative to the low-res region it was derived from (1 for low-res).
struct CropRegion {
  std::array<int, 3> origin{0, 0, 0};
  std::array<int, 3> extent{0, 0, 0};
  int scale_factor = 1;

  Dims dims() const { return {extent[0], extent[1], extent[2]}; }
  CropRegion scaled(int f) const;
  bool fits(const Dims& d) const;
  bool operator==(const CropRegion&) const = default;
};

// Max over each factor^3 block. Kind is preserved.
VoxelGrid downsample_max(const VoxelGrid& grid, int factor);

// output[v] = input[v / factor] per axis.
VoxelGrid upsample_nearest(const VoxelGrid& grid, int factor);

// Cube (26-connected) structuring element of the given Chebyshev radius.
VoxelGrid dilate(const VoxelGrid& grid, int radius);

// Separable normalised Gaussian, radius ceil(3 sigma), zero padding.
VoxelGrid gaussian_blur(const VoxelGrid& grid, double sigma);

// Normalised 1-D kernel used by gaussian_blur (length 2*ceil(3 sigma)+1).
std::vector<double> gaussian_kernel_1d(double sigma);

// Tight bbox of occupied cells, dilated by one and clipped; the second region
// is the first scaled by `factor`.
std::pair<CropRegion, CropRegion> crop_to_dilated_bbox(const VoxelGrid& content, int factor);

// Grows a region to at least `min_extent` per axis, staying inside `bounds`
// (or the whole axis when the grid itself is smaller).
CropRegion expand_region(const CropRegion& region, int min_extent, const Dims& bounds);

VoxelGrid crop(const VoxelGrid& grid, const CropRegion& region);
// Writes `patch` into `target` at region.origin.
void paste(VoxelGrid& target, const CropRegion& region, const VoxelGrid& patch);

// Bilateral symmetry about the x mid-plane. halve keeps x in [dx/2, dx);
// mirror reflects it back so that mirror(halve(g)) == g for symmetric g.
VoxelGrid halve_symmetric(const VoxelGrid& grid);
VoxelGrid mirror_symmetric(const VoxelGrid& half);

// 6-connected components of `raw` that share at least one cell with `reference`.
VoxelGrid keep_components_touching(const VoxelGrid& raw, const VoxelGrid& reference);

// Elementwise product; dims must match.
VoxelGrid multiply(const VoxelGrid& a, const VoxelGrid& b);

}  // namespace decor
