#pragma once

// Synthetic coarse primitives (16^3) and detailed exemplars (64^3) in two
// styles: "smooth" is the nearest upsampling of the primitive, "corrugated"
// carves period-4 grooves into the outer two fine layers. Grooves keep two of
// every four fine voxels, so both styles downsample back to the primitive.

#include <cmath>
#include <string>
#include <vector>

#include "decor/voxel_grid.hpp"
#include "decor/voxel_ops.hpp"

namespace decor::fixtures {

inline constexpr int kCoarse = 16;

inline VoxelGrid coarse_from(bool (*inside)(int, int, int)) {
  auto g = VoxelGrid::binary({kCoarse, kCoarse, kCoarse});
  for (int z = 0; z < kCoarse; ++z)
    for (int y = 0; y < kCoarse; ++y)
      for (int x = 0; x < kCoarse; ++x)
        if (inside(x, y, z)) g.set(x, y, z, 1.0f);
  return g;
}

inline bool in_box(int x, int y, int z) { return x >= 4 && x < 12 && y >= 4 && y < 12 && z >= 5 && z < 11; }
inline bool in_ell(int x, int y, int z) {
  return x >= 4 && x < 12 && z >= 4 && z < 12 && ((y >= 4 && y < 7) || (x >= 4 && x < 7 && y >= 4 && y < 12));
}
inline bool in_cylinder(int x, int y, int z) {
  const double dx = x - 7.5, dz = z - 7.5;
  return dx * dx + dz * dz <= 12.5 && y >= 4 && y < 12;
}
inline bool in_tee(int x, int y, int z) {
  return z >= 5 && z < 10 && ((y >= 9 && y < 12 && x >= 3 && x < 13) || (x >= 6 && x < 10 && y >= 3 && y < 12));
}
inline bool in_slab(int x, int y, int z) { return x >= 3 && x < 13 && y >= 6 && y < 9 && z >= 3 && z < 13; }
inline bool in_cross(int x, int y, int z) {
  const bool cx = x >= 6 && x < 10, cy = y >= 6 && y < 10, cz = z >= 6 && z < 10;
  return (cx && cy && z >= 3 && z < 13) || (cx && cz && y >= 3 && y < 13) || (cy && cz && x >= 3 && x < 13);
}
inline bool in_step(int x, int y, int z) {
  return x >= 3 && x < 13 && z >= 4 && z < 12 && y >= 4 && y < (x < 8 ? 12 : 8);
}
inline bool in_ring(int x, int y, int z) {
  const double dx = x - 7.5, dy = y - 7.5;
  const double r2 = dx * dx + dy * dy;
  return r2 <= 25.0 && r2 >= 6.0 && z >= 5 && z < 10;
}

struct Named {
  std::string id;
  VoxelGrid grid;
};

inline std::vector<Named> training_primitives() {
  return {{"box", coarse_from(in_box)},
          {"ell", coarse_from(in_ell)},
          {"cylinder", coarse_from(in_cylinder)},
          {"tee", coarse_from(in_tee)}};
}

inline std::vector<Named> heldout_primitives() {
  return {{"slab", coarse_from(in_slab)},
          {"cross", coarse_from(in_cross)},
          {"step", coarse_from(in_step)},
          {"ring", coarse_from(in_ring)}};
}

inline VoxelGrid smooth(const VoxelGrid& coarse) { return upsample_nearest(coarse, 4); }

// A surface voxel within two layers of empty space along axis a is kept
// only when its coordinate along the next axis (a+1 mod 3) is 0 or 1 mod 4.
inline VoxelGrid corrugated(const VoxelGrid& coarse) {
  const VoxelGrid fine = smooth(coarse);
  VoxelGrid out = fine;
  const auto& d = fine.dims();
  const auto occ = [&](int x, int y, int z) { return fine.in_bounds(x, y, z) && fine.occupied(x, y, z); };
  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x) {
        if (!fine.occupied(x, y, z)) continue;
        const int p[3] = {x, y, z};
        bool carve = false;
        for (int a = 0; a < 3 && !carve; ++a) {
          bool near = false;
          for (int sgn : {-1, 1})
            for (int k = 1; k <= 2; ++k) {
              int q[3] = {x, y, z};
              q[a] += sgn * k;
              if (!occ(q[0], q[1], q[2])) near = true;
            }
          if (near && p[(a + 1) % 3] % 4 >= 2) carve = true;
        }
        if (carve) out.set(x, y, z, 0.0f);
      }
  return out;
}

}  // namespace decor::fixtures
