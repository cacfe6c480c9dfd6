#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "decor/voxel_grid.hpp"

namespace decor {

// IOU(downsample_max(output, 4), input). Both empty counts as 1.
double strict_iou(const VoxelGrid& output, const VoxelGrid& input);
// |V_in & V_out| / |V_in| with V_out = downsample_max(output, 4).
// Throws UndefinedMetricError for an empty input.
double loose_iou(const VoxelGrid& output, const VoxelGrid& input);

inline constexpr int kPatchSize = 12;

enum class Similarity { Iou, FScore };
const char* to_string(Similarity s);

// Equal-dims binary grids. Both empty gives 1. The F-score matches a voxel
// when the other grid has an occupied voxel within Chebyshev distance 1.
double patch_iou(const VoxelGrid& a, const VoxelGrid& b);
double patch_fscore(const VoxelGrid& a, const VoxelGrid& b);

using PatchPos = std::array<int, 3>;  // x, y, z of the patch corner

struct PatchSampleSet {
  std::string source;
  std::vector<PatchPos> positions;
};

// A 12^3 patch at p qualifies when its centre 2^3 block holds both an
// occupied and an empty voxel.
bool is_surface_patch(const VoxelGrid& grid, const PatchPos& p);
std::vector<PatchPos> surface_patch_positions(const VoxelGrid& grid);
// Up to n distinct qualifying positions drawn uniformly (partial
// Fisher-Yates over the raster-ordered candidates). DimensionError when the
// grid is smaller than a patch.
PatchSampleSet sample_surface_patches(const VoxelGrid& grid, std::size_t n, std::uint64_t seed,
                                      std::string source = {});

// 12^3 patch as 144 rows of 12 bits (row index y + 12 z, bit x).
struct Patch {
  std::array<std::uint16_t, kPatchSize * kPatchSize> rows{};
  std::array<std::uint16_t, kPatchSize * kPatchSize> dilated{};  // Chebyshev-1 dilation inside the patch
  std::array<int, kPatchSize> slice_count{};                     // occupied voxels per z slice
  int count = 0;
  int dilated_count = 0;
};

Patch extract_patch(const VoxelGrid& grid, const PatchPos& p);
double similarity(const Patch& a, const Patch& b, Similarity sim);

enum class SearchMode { Pruned, Naive };

// An exemplar prepared for "is there a patch similar to q anywhere" queries.
// Naive mode evaluates the similarity at every corner position in raster
// order. Pruned mode visits the same positions but skips those whose
// occupancy counts bound the similarity at or below the threshold; both stop
// at the first hit and return identical answers.
class PatchBank {
 public:
  explicit PatchBank(const VoxelGrid& exemplar);

  bool has_similar(const Patch& q, Similarity sim, double threshold, SearchMode mode) const;
  const Dims& dims() const { return dims_; }
  std::size_t candidate_count() const;

 private:
  std::uint16_t row_at(const std::vector<std::uint64_t>& bits, int x, int y, int z) const;
  Patch patch_at(int x, int y, int z) const;
  int window_count(const std::vector<int>& sat, int x, int y, int z) const;
  int slice_window(const std::vector<int>& sats, int z, int x, int y) const;

  Dims dims_;
  int words_ = 0;                              // 64-bit words per x row
  std::vector<std::uint64_t> bits_;            // [z][y][word]
  std::vector<std::uint64_t> dilated_bits_;    // Chebyshev-1 dilation of the whole exemplar
  std::vector<int> sat_;                       // 3-D summed-area table, (d+1)^3
  std::vector<int> sat_dilated_;
  std::vector<int> slice_sat_;                 // per-z 2-D summed-area tables
  std::vector<int> slice_sat_dilated_;
};

// N_ijk over contents i, styles j and exemplars k, plus sampled patch counts.
struct MetricTally {
  int n_contents = 0;
  int n_styles = 0;
  int n_exemplars = 0;
  std::vector<long long> hits;     // [i][j][k]
  std::vector<long long> sampled;  // [i][j]
  std::vector<bool> present;       // [i][j] output was evaluated

  MetricTally() = default;
  MetricTally(int contents, int styles, int exemplars);
  long long& at(int i, int j, int k) { return hits[(static_cast<std::size_t>(i) * n_styles + j) * n_exemplars + k]; }
  long long at(int i, int j, int k) const {
    return hits[(static_cast<std::size_t>(i) * n_styles + j) * n_exemplars + k];
  }
  // N_ik: mean of N_ijk over j.
  double mean_over_styles(int i, int k) const;
};

struct LpOptions {
  Similarity sim = Similarity::Iou;
  double threshold = 0.95;  // similar iff similarity > threshold
  std::size_t patches = 1000;
  std::uint64_t seed = 0;
  SearchMode mode = SearchMode::Pruned;
  int threads = 1;
};

struct LpResult {
  double lp = 0.0;  // hits / sampled over every output
  long long sampled = 0;
  long long similar = 0;
  MetricTally tally;
};

// outputs[i][j] may be null for a missing output. Patch samples of output
// (i, j) use seed ^ hash(i, j), so both similarity kinds see the same patches.
LpResult lp_and_tally(const std::vector<std::vector<const VoxelGrid*>>& outputs, const std::vector<PatchBank>& banks,
                      const LpOptions& options);

// E_{i,j}[ j == argmax_k (N_ijk - N_ik) ] over j, k < tally.n_styles and the
// contents with every style present. A tie for the maximum is a miss.
// Throws UndefinedMetricError when no content is complete.
double diversity(const MetricTally& tally);

struct ManifestEntry {
  std::filesystem::path content;
  std::string style;
  std::filesystem::path output;
};

// One entry per non-blank, non-comment line: "<content> <style> <output>".
// Relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

struct EvalOptions {
  std::size_t patches = 1000;
  std::uint64_t seed = 0;
  double threshold = 0.95;
  int div_styles = 16;  // Div uses the first styles in exemplar order
  SearchMode mode = SearchMode::Pruned;
  int threads = 1;
};

struct EvalReport {
  double strict_iou = 0.0;
  double loose_iou = 0.0;
  double lp_iou = 0.0;
  double lp_fscore = 0.0;
  double div_iou = -1.0;  // -1 when undefined
  double div_fscore = -1.0;
  std::uint64_t seed = 0;
  double threshold = 0.95;
  int patch_size = kPatchSize;
  std::size_t patches_per_shape = 0;
  int n_outputs = 0;
  int n_contents = 0;
  int n_styles = 0;
  int div_styles = 0;
  long long patches_sampled = 0;

  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
  bool operator==(const EvalReport&) const = default;
};

struct NamedExemplar {
  std::string id;
  VoxelGrid grid;
};

// Contents are numbered in first-appearance order, styles follow
// `exemplars`. Outputs and contents are read from disk; absent files throw
// IoError naming every missing path.
EvalReport evaluate(const std::vector<ManifestEntry>& manifest, const std::vector<NamedExemplar>& exemplars,
                    const EvalOptions& options);

}  // namespace decor
