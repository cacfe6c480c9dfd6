#include "decor/metrics.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "decor/errors.hpp"
#include "decor/voxel_io.hpp"
#include "decor/voxel_ops.hpp"

namespace decor {
namespace {

constexpr int P = kPatchSize;
constexpr std::uint16_t kRowMask = (1u << P) - 1;

void require_same_dims(const VoxelGrid& a, const VoxelGrid& b, const char* what) {
  if (a.dims() != b.dims()) {
    throw DimensionError(std::string(what) + ": " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  }
}

VoxelGrid downsampled_output(const VoxelGrid& output, const VoxelGrid& input) {
  if (output.dims() != input.dims().scaled(4)) {
    throw DimensionError("output " + to_string(output.dims()) + " is not 4x the input " + to_string(input.dims()));
  }
  return downsample_max(output.threshold(), 4);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

void fill_dilation(Patch& p) {
  std::array<std::uint16_t, P * P> h{};
  for (int i = 0; i < P * P; ++i) {
    const std::uint16_t r = p.rows[i];
    h[i] = static_cast<std::uint16_t>((r | (r << 1) | (r >> 1)) & kRowMask);
  }
  p.dilated_count = 0;
  for (int z = 0; z < P; ++z)
    for (int y = 0; y < P; ++y) {
      std::uint16_t acc = 0;
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy) {
          const int zz = z + dz, yy = y + dy;
          if (zz >= 0 && zz < P && yy >= 0 && yy < P) acc |= h[yy + P * zz];
        }
      p.dilated[y + P * z] = acc;
      p.dilated_count += std::popcount(acc);
    }
}

void finish_patch(Patch& p) {
  p.count = 0;
  for (int z = 0; z < P; ++z) {
    int s = 0;
    for (int y = 0; y < P; ++y) s += std::popcount(p.rows[y + P * z]);
    p.slice_count[z] = s;
    p.count += s;
  }
  fill_dilation(p);
}

double fscore_from(int a, int b, int a_in_b, int b_in_a) {
  if (a == 0 && b == 0) return 1.0;
  if (a == 0 || b == 0) return 0.0;
  const double precision = static_cast<double>(a_in_b) / a;
  const double recall = static_cast<double>(b_in_a) / b;
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

// 3-D summed-area table over (d+1)^3 with a zero border.
std::vector<int> summed_volume(const VoxelGrid& g) {
  const auto& d = g.dims();
  const std::size_t sx = d.x + 1, sy = d.y + 1;
  std::vector<int> s(sx * sy * (d.z + 1), 0);
  auto at = [&](int x, int y, int z) -> int& { return s[(static_cast<std::size_t>(z) * sy + y) * sx + x]; };
  for (int z = 1; z <= d.z; ++z)
    for (int y = 1; y <= d.y; ++y)
      for (int x = 1; x <= d.x; ++x) {
        at(x, y, z) = (g.occupied(x - 1, y - 1, z - 1) ? 1 : 0) + at(x - 1, y, z) + at(x, y - 1, z) +
                      at(x, y, z - 1) - at(x - 1, y - 1, z) - at(x - 1, y, z - 1) - at(x, y - 1, z - 1) +
                      at(x - 1, y - 1, z - 1);
      }
  return s;
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t t = std::min<std::size_t>(std::max(threads, 1), n);
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += t) fn(i);
    });
  }
}

}  // namespace

double strict_iou(const VoxelGrid& output, const VoxelGrid& input) {
  const auto out = downsampled_output(output, input);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool a = out.values()[i] > 0.5f, b = input.values()[i] > 0.5f;
    inter += a && b;
    uni += a || b;
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

double loose_iou(const VoxelGrid& output, const VoxelGrid& input) {
  const auto out = downsampled_output(output, input);
  std::size_t inter = 0, in = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool a = out.values()[i] > 0.5f, b = input.values()[i] > 0.5f;
    inter += a && b;
    in += b;
  }
  if (in == 0) throw UndefinedMetricError("loose IOU of an empty input");
  return static_cast<double>(inter) / static_cast<double>(in);
}

const char* to_string(Similarity s) { return s == Similarity::Iou ? "iou" : "fscore"; }

double patch_iou(const VoxelGrid& a, const VoxelGrid& b) {
  require_same_dims(a, b, "patch_iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.values()[i] > 0.5f, y = b.values()[i] > 0.5f;
    inter += x && y;
    uni += x || y;
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

double patch_fscore(const VoxelGrid& a, const VoxelGrid& b) {
  require_same_dims(a, b, "patch_fscore");
  const auto& d = a.dims();
  const auto near = [&](const VoxelGrid& g, int x, int y, int z) {
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (g.in_bounds(x + dx, y + dy, z + dz) && g.occupied(x + dx, y + dy, z + dz)) return true;
    return false;
  };
  int ca = 0, cb = 0, a_in_b = 0, b_in_a = 0;
  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x) {
        if (a.occupied(x, y, z)) {
          ++ca;
          a_in_b += near(b, x, y, z);
        }
        if (b.occupied(x, y, z)) {
          ++cb;
          b_in_a += near(a, x, y, z);
        }
      }
  return fscore_from(ca, cb, a_in_b, b_in_a);
}

bool is_surface_patch(const VoxelGrid& grid, const PatchPos& p) {
  const int c = P / 2 - 1;
  bool full = false, empty = false;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        if (grid.occupied(p[0] + c + dx, p[1] + c + dy, p[2] + c + dz)) full = true;
        else empty = true;
      }
  return full && empty;
}

std::vector<PatchPos> surface_patch_positions(const VoxelGrid& grid) {
  const auto& d = grid.dims();
  if (d.x < P || d.y < P || d.z < P) {
    throw DimensionError("grid " + to_string(d) + " is smaller than a " + std::to_string(P) + "^3 patch");
  }
  std::vector<PatchPos> out;
  for (int z = 0; z + P <= d.z; ++z)
    for (int y = 0; y + P <= d.y; ++y)
      for (int x = 0; x + P <= d.x; ++x)
        if (is_surface_patch(grid, {x, y, z})) out.push_back({x, y, z});
  return out;
}

PatchSampleSet sample_surface_patches(const VoxelGrid& grid, std::size_t n, std::uint64_t seed, std::string source) {
  PatchSampleSet set;
  set.source = std::move(source);
  auto all = surface_patch_positions(grid);
  if (all.size() > n) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = std::uniform_int_distribution<std::size_t>(i, all.size() - 1)(rng);
      std::swap(all[i], all[j]);
    }
    all.resize(n);
  }
  set.positions = std::move(all);
  return set;
}

Patch extract_patch(const VoxelGrid& grid, const PatchPos& p) {
  if (p[0] < 0 || p[1] < 0 || p[2] < 0 || !grid.in_bounds(p[0] + P - 1, p[1] + P - 1, p[2] + P - 1)) {
    throw DimensionError("patch does not fit in grid " + to_string(grid.dims()));
  }
  Patch out;
  for (int z = 0; z < P; ++z)
    for (int y = 0; y < P; ++y) {
      std::uint16_t r = 0;
      for (int x = 0; x < P; ++x)
        if (grid.occupied(p[0] + x, p[1] + y, p[2] + z)) r |= static_cast<std::uint16_t>(1u << x);
      out.rows[y + P * z] = r;
    }
  finish_patch(out);
  return out;
}

double similarity(const Patch& a, const Patch& b, Similarity sim) {
  if (sim == Similarity::Iou) {
    int inter = 0;
    for (int i = 0; i < P * P; ++i) inter += std::popcount(static_cast<std::uint16_t>(a.rows[i] & b.rows[i]));
    const int uni = a.count + b.count - inter;
    return uni ? static_cast<double>(inter) / uni : 1.0;
  }
  int a_in_b = 0, b_in_a = 0;
  for (int i = 0; i < P * P; ++i) {
    a_in_b += std::popcount(static_cast<std::uint16_t>(a.rows[i] & b.dilated[i]));
    b_in_a += std::popcount(static_cast<std::uint16_t>(b.rows[i] & a.dilated[i]));
  }
  return fscore_from(a.count, b.count, a_in_b, b_in_a);
}

PatchBank::PatchBank(const VoxelGrid& exemplar) : dims_(exemplar.dims()) {
  const VoxelGrid g = exemplar.threshold();
  const VoxelGrid dil = dilate(g, 1);
  words_ = (dims_.x + 63) / 64 + 1;  // one spare word so 12-bit reads never run past a row
  const auto pack = [&](const VoxelGrid& v) {
    std::vector<std::uint64_t> bits(static_cast<std::size_t>(dims_.z) * dims_.y * words_, 0);
    for (int z = 0; z < dims_.z; ++z)
      for (int y = 0; y < dims_.y; ++y)
        for (int x = 0; x < dims_.x; ++x)
          if (v.occupied(x, y, z)) bits[(static_cast<std::size_t>(z) * dims_.y + y) * words_ + x / 64] |= 1ull << (x % 64);
    return bits;
  };
  const std::size_t sx = dims_.x + 1, sy = dims_.y + 1;
  const auto slices = [&](const VoxelGrid& v) {
    std::vector<int> out(sx * sy * dims_.z, 0);
    for (int z = 0; z < dims_.z; ++z) {
      int* s = out.data() + sx * sy * z;
      for (int y = 1; y <= dims_.y; ++y)
        for (int x = 1; x <= dims_.x; ++x)
          s[y * sx + x] = (v.occupied(x - 1, y - 1, z) ? 1 : 0) + s[y * sx + x - 1] + s[(y - 1) * sx + x] -
                          s[(y - 1) * sx + x - 1];
    }
    return out;
  };
  bits_ = pack(g);
  dilated_bits_ = pack(dil);
  sat_ = summed_volume(g);
  sat_dilated_ = summed_volume(dil);
  slice_sat_ = slices(g);
  slice_sat_dilated_ = slices(dil);
}

std::size_t PatchBank::candidate_count() const {
  if (dims_.x < P || dims_.y < P || dims_.z < P) return 0;
  return static_cast<std::size_t>(dims_.x - P + 1) * (dims_.y - P + 1) * (dims_.z - P + 1);
}

int PatchBank::window_count(const std::vector<int>& s, int x, int y, int z) const {
  const std::size_t sx = dims_.x + 1, sy = dims_.y + 1;
  auto at = [&](int xx, int yy, int zz) { return s[(static_cast<std::size_t>(zz) * sy + yy) * sx + xx]; };
  const int x1 = x + P, y1 = y + P, z1 = z + P;
  return at(x1, y1, z1) - at(x, y1, z1) - at(x1, y, z1) - at(x1, y1, z) + at(x, y, z1) + at(x, y1, z) +
         at(x1, y, z) - at(x, y, z);
}

int PatchBank::slice_window(const std::vector<int>& sats, int z, int x, int y) const {
  const std::size_t sx = dims_.x + 1, sy = dims_.y + 1;
  const int* s = sats.data() + sx * sy * z;
  return s[(y + P) * sx + x + P] - s[y * sx + x + P] - s[(y + P) * sx + x] + s[y * sx + x];
}

std::uint16_t PatchBank::row_at(const std::vector<std::uint64_t>& bits, int x, int y, int z) const {
  const int w = x / 64, shift = x % 64;
  const std::uint64_t* row = bits.data() + (static_cast<std::size_t>(z) * dims_.y + y) * words_;
  std::uint64_t v = row[w] >> shift;
  if (shift) v |= row[w + 1] << (64 - shift);
  return static_cast<std::uint16_t>(v & kRowMask);
}

Patch PatchBank::patch_at(int x, int y, int z) const {
  Patch p;
  for (int zz = 0; zz < P; ++zz)
    for (int yy = 0; yy < P; ++yy) p.rows[yy + P * zz] = row_at(bits_, x, y + yy, z + zz);
  finish_patch(p);
  return p;
}

bool PatchBank::has_similar(const Patch& q, Similarity sim, double threshold, SearchMode mode) const {
  if (candidate_count() == 0) return false;
  const bool pruned = mode == SearchMode::Pruned && q.count > 0;
  for (int z = 0; z + P <= dims_.z; ++z)
    for (int y = 0; y + P <= dims_.y; ++y)
      for (int x = 0; x + P <= dims_.x; ++x) {
        if (pruned) {
          const int cb = window_count(sat_, x, y, z);
          if (cb == 0) {
            if (sim == Similarity::FScore) continue;  // empty candidate vs non-empty query scores 0
          }
          if (sim == Similarity::Iou) {
            // IOU <= min/max of the counts, and <= sum of per-slice minima over
            // the sum of per-slice maxima.
            const int lo = std::min(q.count, cb), hi = std::max(q.count, cb);
            if (static_cast<double>(lo) / hi <= threshold) continue;
            int smin = 0, smax = 0;
            for (int k = 0; k < P; ++k) {
              const int s = slice_window(slice_sat_, z + k, x, y);
              smin += std::min(q.slice_count[k], s);
              smax += std::max(q.slice_count[k], s);
            }
            if (static_cast<double>(smin) / smax <= threshold) continue;
            int inter = 0;
            for (int zz = 0; zz < P; ++zz)
              for (int yy = 0; yy < P; ++yy)
                inter += std::popcount(static_cast<std::uint16_t>(q.rows[yy + P * zz] & row_at(bits_, x, y + yy, z + zz)));
            if (static_cast<double>(inter) / (q.count + cb - inter) > threshold) return true;
            continue;
          } else {
            // A matched query voxel lies in the candidate's in-patch dilation,
            // which is inside the exemplar's dilation over the window.
            const auto bound = [&](int a_in_b, int b_in_a) {
              return fscore_from(q.count, cb, std::min(q.count, a_in_b), std::min(cb, b_in_a)) < threshold - 1e-9;
            };
            if (bound(window_count(sat_dilated_, x, y, z), q.dilated_count)) continue;
            int sa = 0;
            for (int k = 0; k < P; ++k) sa += std::min(q.slice_count[k], slice_window(slice_sat_dilated_, z + k, x, y));
            if (bound(sa, q.dilated_count)) continue;
            // Row-exact against the global dilation; the recall side is exact.
            int a_in_b = 0, b_in_a = 0;
            for (int zz = 0; zz < P; ++zz)
              for (int yy = 0; yy < P; ++yy) {
                const int i = yy + P * zz;
                a_in_b += std::popcount(static_cast<std::uint16_t>(q.rows[i] & row_at(dilated_bits_, x, y + yy, z + zz)));
                b_in_a += std::popcount(static_cast<std::uint16_t>(q.dilated[i] & row_at(bits_, x, y + yy, z + zz)));
              }
            if (bound(a_in_b, b_in_a)) continue;
          }
        }
        if (similarity(q, patch_at(x, y, z), sim) > threshold) return true;
      }
  return false;
}

MetricTally::MetricTally(int contents, int styles, int exemplars)
    : n_contents(contents),
      n_styles(styles),
      n_exemplars(exemplars),
      hits(static_cast<std::size_t>(contents) * styles * exemplars, 0),
      sampled(static_cast<std::size_t>(contents) * styles, 0),
      present(static_cast<std::size_t>(contents) * styles, false) {}

double MetricTally::mean_over_styles(int i, int k) const {
  long long s = 0;
  for (int j = 0; j < n_styles; ++j) s += at(i, j, k);
  return static_cast<double>(s) / n_styles;
}

LpResult lp_and_tally(const std::vector<std::vector<const VoxelGrid*>>& outputs, const std::vector<PatchBank>& banks,
                      const LpOptions& options) {
  if (banks.empty()) throw ConfigError("LP needs at least one exemplar");
  const int n_i = static_cast<int>(outputs.size());
  int n_j = 0;
  for (const auto& row : outputs) n_j = std::max(n_j, static_cast<int>(row.size()));
  const int n_k = static_cast<int>(banks.size());
  LpResult res;
  res.tally = MetricTally(n_i, n_j, n_k);
  for (int i = 0; i < n_i; ++i)
    for (int j = 0; j < static_cast<int>(outputs[i].size()); ++j) {
      const VoxelGrid* out = outputs[i][j];
      if (!out) continue;
      const std::uint64_t seed = splitmix64(options.seed ^ splitmix64((static_cast<std::uint64_t>(i) << 32) | j));
      const auto set = sample_surface_patches(*out, options.patches, seed);
      const VoxelGrid grid = out->threshold();
      const std::size_t n = set.positions.size();
      std::vector<std::uint8_t> hit(n * n_k, 0);
      parallel_for(n, options.threads, [&](std::size_t p) {
        const Patch q = extract_patch(grid, set.positions[p]);
        for (int k = 0; k < n_k; ++k) hit[p * n_k + k] = banks[k].has_similar(q, options.sim, options.threshold, options.mode);
      });
      res.tally.present[static_cast<std::size_t>(i) * n_j + j] = true;
      res.tally.sampled[static_cast<std::size_t>(i) * n_j + j] = static_cast<long long>(n);
      res.sampled += static_cast<long long>(n);
      for (std::size_t p = 0; p < n; ++p) {
        bool any = false;
        for (int k = 0; k < n_k; ++k) {
          res.tally.at(i, j, k) += hit[p * n_k + k];
          any = any || hit[p * n_k + k];
        }
        res.similar += any;
      }
    }
  res.lp = res.sampled ? static_cast<double>(res.similar) / static_cast<double>(res.sampled) : 0.0;
  return res;
}

double diversity(const MetricTally& t) {
  const int s = t.n_styles;
  if (s == 0 || t.n_exemplars < s) throw UndefinedMetricError("diversity needs an exemplar per style");
  long long trials = 0, consistent = 0;
  for (int i = 0; i < t.n_contents; ++i) {
    bool complete = true;
    for (int j = 0; j < s; ++j) complete = complete && t.present[static_cast<std::size_t>(i) * s + j];
    if (!complete) continue;
    // s * (N_ijk - N_ik) in integers.
    std::vector<long long> col(s, 0);
    for (int k = 0; k < s; ++k)
      for (int j = 0; j < s; ++j) col[k] += t.at(i, j, k);
    for (int j = 0; j < s; ++j) {
      long long best = 0;
      int arg = -1, ties = 0;
      for (int k = 0; k < s; ++k) {
        const long long v = static_cast<long long>(s) * t.at(i, j, k) - col[k];
        if (arg < 0 || v > best) {
          best = v;
          arg = k;
          ties = 1;
        } else if (v == best) {
          ++ties;
        }
      }
      ++trials;
      consistent += (ties == 1 && arg == j);
    }
  }
  if (trials == 0) throw UndefinedMetricError("no content has outputs for every style");
  return static_cast<double>(consistent) / static_cast<double>(trials);
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string c, s, o, extra;
    if (!(ss >> c)) continue;
    if (!(ss >> s >> o) || (ss >> extra)) {
      throw FormatError("manifest line " + std::to_string(lineno) + ": expected <content> <style> <output>");
    }
    out.push_back({resolve(c), s, resolve(o)});
  }
  return out;
}

namespace {

MetricTally first_styles(const MetricTally& t, int s) {
  MetricTally r(t.n_contents, s, s);
  for (int i = 0; i < t.n_contents; ++i)
    for (int j = 0; j < s; ++j) {
      r.present[static_cast<std::size_t>(i) * s + j] = t.present[static_cast<std::size_t>(i) * t.n_styles + j];
      r.sampled[static_cast<std::size_t>(i) * s + j] = t.sampled[static_cast<std::size_t>(i) * t.n_styles + j];
      for (int k = 0; k < s; ++k) r.at(i, j, k) = t.at(i, j, k);
    }
  return r;
}

double div_or_undefined(const MetricTally& t) {
  try {
    return diversity(t);
  } catch (const UndefinedMetricError&) {
    return -1.0;
  }
}

}  // namespace

EvalReport evaluate(const std::vector<ManifestEntry>& manifest, const std::vector<NamedExemplar>& exemplars,
                    const EvalOptions& options) {
  if (exemplars.empty()) throw ConfigError("evaluation needs at least one exemplar");
  std::map<std::string, int> style_index;
  for (std::size_t k = 0; k < exemplars.size(); ++k) style_index[exemplars[k].id] = static_cast<int>(k);

  std::vector<std::string> missing;
  for (const auto& e : manifest) {
    if (!std::filesystem::exists(e.content)) missing.push_back(e.content.string());
    if (!std::filesystem::exists(e.output)) missing.push_back(e.output.string());
    if (!style_index.contains(e.style)) throw ConfigError("manifest names unknown style '" + e.style + "'");
  }
  if (!missing.empty()) {
    std::string msg = "missing evaluation inputs:";
    for (const auto& m : missing) msg += " " + m;
    throw IoError(msg);
  }

  std::map<std::filesystem::path, int> content_index;
  std::vector<VoxelGrid> contents;
  std::vector<VoxelGrid> outputs;
  std::vector<std::pair<int, int>> slot;
  for (const auto& e : manifest) {
    auto [it, fresh] = content_index.try_emplace(e.content, static_cast<int>(contents.size()));
    if (fresh) contents.push_back(load_voxels(e.content).threshold());
    outputs.push_back(load_voxels(e.output).threshold());
    slot.emplace_back(it->second, style_index.at(e.style));
  }

  EvalReport r;
  r.seed = options.seed;
  r.threshold = options.threshold;
  r.patches_per_shape = options.patches;
  r.n_outputs = static_cast<int>(outputs.size());
  r.n_contents = static_cast<int>(contents.size());
  r.n_styles = static_cast<int>(exemplars.size());
  r.div_styles = std::min<int>(options.div_styles, r.n_styles);
  if (outputs.empty()) return r;

  double strict = 0.0, loose = 0.0;
  for (std::size_t n = 0; n < outputs.size(); ++n) {
    strict += strict_iou(outputs[n], contents[slot[n].first]);
    loose += loose_iou(outputs[n], contents[slot[n].first]);
  }
  r.strict_iou = strict / static_cast<double>(outputs.size());
  r.loose_iou = loose / static_cast<double>(outputs.size());

  std::vector<std::vector<const VoxelGrid*>> grid(contents.size(),
                                                  std::vector<const VoxelGrid*>(exemplars.size(), nullptr));
  for (std::size_t n = 0; n < outputs.size(); ++n) grid[slot[n].first][slot[n].second] = &outputs[n];
  std::vector<PatchBank> banks;
  for (const auto& e : exemplars) banks.emplace_back(e.grid);

  LpOptions lp{Similarity::Iou, options.threshold, options.patches, options.seed, options.mode, options.threads};
  const auto iou = lp_and_tally(grid, banks, lp);
  lp.sim = Similarity::FScore;
  const auto fs = lp_and_tally(grid, banks, lp);
  r.lp_iou = iou.lp;
  r.lp_fscore = fs.lp;
  r.patches_sampled = iou.sampled;
  r.div_iou = div_or_undefined(first_styles(iou.tally, r.div_styles));
  r.div_fscore = div_or_undefined(first_styles(fs.tally, r.div_styles));
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["strict_iou"] = strict_iou;
  j["loose_iou"] = loose_iou;
  j["lp_iou"] = lp_iou;
  j["lp_fscore"] = lp_fscore;
  j["div_iou"] = div_iou < 0.0 ? nlohmann::ordered_json() : nlohmann::ordered_json(div_iou);
  j["div_fscore"] = div_fscore < 0.0 ? nlohmann::ordered_json() : nlohmann::ordered_json(div_fscore);
  j["seed"] = seed;
  j["threshold"] = threshold;
  j["patch_size"] = patch_size;
  j["patches_per_shape"] = patches_per_shape;
  j["patches_sampled"] = patches_sampled;
  j["n_outputs"] = n_outputs;
  j["n_contents"] = n_contents;
  j["n_styles"] = n_styles;
  j["div_styles"] = div_styles;
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.strict_iou = j.at("strict_iou").get<double>();
    r.loose_iou = j.at("loose_iou").get<double>();
    r.lp_iou = j.at("lp_iou").get<double>();
    r.lp_fscore = j.at("lp_fscore").get<double>();
    r.div_iou = j.at("div_iou").is_null() ? -1.0 : j.at("div_iou").get<double>();
    r.div_fscore = j.at("div_fscore").is_null() ? -1.0 : j.at("div_fscore").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.threshold = j.at("threshold").get<double>();
    r.patch_size = j.at("patch_size").get<int>();
    r.patches_per_shape = j.at("patches_per_shape").get<std::size_t>();
    r.patches_sampled = j.at("patches_sampled").get<long long>();
    r.n_outputs = j.at("n_outputs").get<int>();
    r.n_contents = j.at("n_contents").get<int>();
    r.n_styles = j.at("n_styles").get<int>();
    r.div_styles = j.at("div_styles").get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad metrics report: ") + e.what());
  }
}

}  // namespace decor
