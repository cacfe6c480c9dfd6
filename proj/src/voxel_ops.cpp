#include "decor/voxel_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "decor/errors.hpp"

namespace decor {
namespace {

void require_binary(const VoxelGrid& g, const char* op) {
  if (!g.is_binary()) throw KindError(std::string(op) + " requires a binary grid");
}

void require_same_dims(const VoxelGrid& a, const VoxelGrid& b, const char* op) {
  if (a.dims() != b.dims()) {
    throw DimensionError(std::string(op) + ": dims " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  }
}

int axis_len(const Dims& d, int axis) { return axis == 0 ? d.x : axis == 1 ? d.y : d.z; }

// Applies `line_op(src_line, dst_line, n)` along one axis for every line.
template <typename LineOp>
void for_each_line(const std::vector<float>& src, std::vector<float>& dst, const Dims& d, int axis,
                   LineOp&& line_op) {
  const int n = axis_len(d, axis);
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(d.x)
                                                       : static_cast<std::size_t>(d.x) * d.y;
  std::vector<double> in(n), out(n);
  const int a = axis == 0 ? d.y : d.x;
  const int b = axis == 2 ? d.y : d.z;
  for (int j = 0; j < b; ++j) {
    for (int i = 0; i < a; ++i) {
      std::size_t base;
      if (axis == 0) base = (static_cast<std::size_t>(j) * d.y + i) * d.x;
      else if (axis == 1) base = static_cast<std::size_t>(j) * d.x * d.y + i;
      else base = static_cast<std::size_t>(j) * d.x + i;
      for (int t = 0; t < n; ++t) in[t] = src[base + t * stride];
      line_op(in, out, n);
      for (int t = 0; t < n; ++t) dst[base + t * stride] = static_cast<float>(out[t]);
    }
  }
}

}  // namespace

CropRegion CropRegion::scaled(int f) const {
  CropRegion r;
  for (int a = 0; a < 3; ++a) {
    r.origin[a] = origin[a] * f;
    r.extent[a] = extent[a] * f;
  }
  r.scale_factor = scale_factor * f;
  return r;
}

bool CropRegion::fits(const Dims& d) const {
  const int lim[3] = {d.x, d.y, d.z};
  for (int a = 0; a < 3; ++a) {
    if (origin[a] < 0 || extent[a] <= 0 || origin[a] + extent[a] > lim[a]) return false;
  }
  return true;
}

VoxelGrid downsample_max(const VoxelGrid& grid, int factor) {
  if (factor <= 0) throw ParameterError("downsample factor must be positive");
  const Dims& d = grid.dims();
  if (d.x % factor || d.y % factor || d.z % factor) {
    throw DimensionError("dims " + to_string(d) + " not divisible by " + std::to_string(factor));
  }
  const Dims od{d.x / factor, d.y / factor, d.z / factor};
  VoxelGrid out(od, grid.kind());
  auto dst = out.mutable_values();
  std::fill(dst.begin(), dst.end(), -std::numeric_limits<float>::infinity());
  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x) {
        float& o = dst[out.index(x / factor, y / factor, z / factor)];
        o = std::max(o, grid.at(x, y, z));
      }
  return out;
}

VoxelGrid upsample_nearest(const VoxelGrid& grid, int factor) {
  if (factor <= 0) throw ParameterError("upsample factor must be positive");
  const Dims od = grid.dims().scaled(factor);
  VoxelGrid out(od, grid.kind());
  for (int z = 0; z < od.z; ++z)
    for (int y = 0; y < od.y; ++y)
      for (int x = 0; x < od.x; ++x) out.set(x, y, z, grid.at(x / factor, y / factor, z / factor));
  return out;
}

VoxelGrid dilate(const VoxelGrid& grid, int radius) {
  require_binary(grid, "dilate");
  if (radius <= 0) throw ParameterError("dilation radius must be positive");
  // A cube structuring element separates into three 1-D max filters.
  std::vector<float> a(grid.values().begin(), grid.values().end());
  std::vector<float> b(a.size());
  for (int axis = 0; axis < 3; ++axis) {
    for_each_line(a, b, grid.dims(), axis, [radius](const std::vector<double>& in, std::vector<double>& out, int n) {
      for (int t = 0; t < n; ++t) {
        double m = 0.0;
        for (int s = std::max(0, t - radius); s <= std::min(n - 1, t + radius); ++s) m = std::max(m, in[s]);
        out[t] = m;
      }
    });
    std::swap(a, b);
  }
  return VoxelGrid(grid.dims(), VoxelKind::Binary, std::move(a));
}

std::vector<double> gaussian_kernel_1d(double sigma) {
  if (!(sigma >= 0.0)) throw ParameterError("gaussian sigma must be non-negative");
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

VoxelGrid gaussian_blur(const VoxelGrid& grid, double sigma) {
  const std::vector<double> kernel = gaussian_kernel_1d(sigma);
  if (sigma == 0.0) return grid.as_continuous();
  const int radius = static_cast<int>(kernel.size() / 2);
  std::vector<float> a(grid.values().begin(), grid.values().end());
  std::vector<float> b(a.size());
  for (int axis = 0; axis < 3; ++axis) {
    for_each_line(a, b, grid.dims(), axis, [&](const std::vector<double>& in, std::vector<double>& out, int n) {
      for (int t = 0; t < n; ++t) {
        double acc = 0.0;
        for (int s = std::max(0, t - radius); s <= std::min(n - 1, t + radius); ++s) {
          acc += kernel[s - t + radius] * in[s];
        }
        out[t] = acc;
      }
    });
    std::swap(a, b);
  }
  for (float& v : a) v = std::clamp(v, 0.0f, 1.0f);
  return VoxelGrid(grid.dims(), VoxelKind::Continuous, std::move(a));
}

std::pair<CropRegion, CropRegion> crop_to_dilated_bbox(const VoxelGrid& content, int factor) {
  if (factor <= 0) throw ParameterError("crop scale factor must be positive");
  const Dims& d = content.dims();
  int lo[3] = {d.x, d.y, d.z};
  int hi[3] = {-1, -1, -1};
  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x) {
        if (!content.occupied(x, y, z)) continue;
        const int p[3] = {x, y, z};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], p[a]);
          hi[a] = std::max(hi[a], p[a]);
        }
      }
  if (hi[0] < 0) throw EmptyShapeError("cannot crop an empty shape");
  const int lim[3] = {d.x, d.y, d.z};
  CropRegion low;
  for (int a = 0; a < 3; ++a) {
    const int from = std::max(0, lo[a] - 1);
    const int to = std::min(lim[a] - 1, hi[a] + 1);
    low.origin[a] = from;
    low.extent[a] = to - from + 1;
  }
  return {low, low.scaled(factor)};
}

CropRegion expand_region(const CropRegion& region, int min_extent, const Dims& bounds) {
  CropRegion r = region;
  const int lim[3] = {bounds.x, bounds.y, bounds.z};
  for (int a = 0; a < 3; ++a) {
    const int want = std::min(min_extent, lim[a]);
    if (r.extent[a] >= want) continue;
    const int grow = want - r.extent[a];
    int from = r.origin[a] - grow / 2;
    from = std::clamp(from, 0, lim[a] - want);
    // Keep the original region inside the expanded one.
    from = std::min(from, r.origin[a]);
    from = std::max(from, r.origin[a] + r.extent[a] - want);
    r.origin[a] = from;
    r.extent[a] = want;
  }
  return r;
}

VoxelGrid crop(const VoxelGrid& grid, const CropRegion& region) {
  if (!region.fits(grid.dims())) throw DimensionError("crop region outside grid " + to_string(grid.dims()));
  VoxelGrid out(region.dims(), grid.kind());
  const auto& o = region.origin;
  for (int z = 0; z < region.extent[2]; ++z)
    for (int y = 0; y < region.extent[1]; ++y)
      for (int x = 0; x < region.extent[0]; ++x) out.set(x, y, z, grid.at(x + o[0], y + o[1], z + o[2]));
  return out;
}

void paste(VoxelGrid& target, const CropRegion& region, const VoxelGrid& patch) {
  if (!region.fits(target.dims()) || patch.dims() != region.dims()) {
    throw DimensionError("paste region does not match target/patch dims");
  }
  if (target.is_binary() && !patch.is_binary()) throw KindError("cannot paste a continuous patch into a binary grid");
  const auto& o = region.origin;
  for (int z = 0; z < region.extent[2]; ++z)
    for (int y = 0; y < region.extent[1]; ++y)
      for (int x = 0; x < region.extent[0]; ++x) target.set(x + o[0], y + o[1], z + o[2], patch.at(x, y, z));
}

VoxelGrid halve_symmetric(const VoxelGrid& grid) {
  const Dims& d = grid.dims();
  if (d.x % 2) throw DimensionError("halving needs an even x dim, got " + to_string(d));
  const int h = d.x / 2;
  VoxelGrid out({h, d.y, d.z}, grid.kind());
  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < h; ++x) out.set(x, y, z, grid.at(x + h, y, z));
  return out;
}

VoxelGrid mirror_symmetric(const VoxelGrid& half) {
  const Dims& d = half.dims();
  const int h = d.x;
  VoxelGrid out({2 * h, d.y, d.z}, half.kind());
  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < h; ++x) {
        const float v = half.at(x, y, z);
        out.set(h + x, y, z, v);
        out.set(h - 1 - x, y, z, v);
      }
  return out;
}

VoxelGrid keep_components_touching(const VoxelGrid& raw, const VoxelGrid& reference) {
  require_same_dims(raw, reference, "keep_components_touching");
  require_binary(raw, "keep_components_touching");
  const Dims& d = raw.dims();
  VoxelGrid out = VoxelGrid::binary(d);
  std::vector<std::size_t> stack;
  const auto raw_v = raw.values();
  const auto ref_v = reference.values();
  auto dst = out.mutable_values();
  for (std::size_t i = 0; i < raw_v.size(); ++i) {
    if (raw_v[i] > 0.5f && ref_v[i] > 0.5f && dst[i] == 0.0f) {
      dst[i] = 1.0f;
      stack.push_back(i);
    }
  }
  const std::size_t sx = 1, sy = static_cast<std::size_t>(d.x), sz = static_cast<std::size_t>(d.x) * d.y;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(i % d.x);
    const int y = static_cast<int>((i / sy) % d.y);
    const int z = static_cast<int>(i / sz);
    auto visit = [&](bool ok, std::size_t j) {
      if (ok && raw_v[j] > 0.5f && dst[j] == 0.0f) {
        dst[j] = 1.0f;
        stack.push_back(j);
      }
    };
    visit(x > 0, i - sx);
    visit(x + 1 < d.x, i + sx);
    visit(y > 0, i - sy);
    visit(y + 1 < d.y, i + sy);
    visit(z > 0, i - sz);
    visit(z + 1 < d.z, i + sz);
  }
  return out;
}

VoxelGrid multiply(const VoxelGrid& a, const VoxelGrid& b) {
  require_same_dims(a, b, "multiply");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<float> v(av.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * bv[i];
  const VoxelKind kind = a.is_binary() && b.is_binary() ? VoxelKind::Binary : VoxelKind::Continuous;
  return VoxelGrid(a.dims(), kind, std::move(v));
}

}  // namespace decor
