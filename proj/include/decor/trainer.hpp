#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "decor/adam.hpp"
#include "decor/masks.hpp"
#include "decor/models.hpp"
#include "decor/voxel_grid.hpp"

namespace decor {

enum class TrainMaskMode { Loose, Strict, NoneWithPenalty };

const char* to_string(TrainMaskMode mode);
TrainMaskMode parse_train_mask_mode(const std::string& s);

struct TrainConfig {
  double alpha = 0.5;
  double beta = 10.0;
  double sigma = 1.0;
  int epochs = 20;
  int batch = 1;
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  int n_styles = 0;  // 0 = every exemplar found
  TrainMaskMode gen_mask_mode = TrainMaskMode::Loose;
  bool dis_mask = true;
  bool recon_only = false;
  std::uint64_t seed = 0;

  // Run-level settings.
  long long iterations = 0;  // overrides epochs when > 0
  std::filesystem::path content_dir;
  std::filesystem::path style_dir;
  std::filesystem::path output_dir;
  std::filesystem::path cache_dir;
  long long checkpoint_every = 0;
  bool symmetric = false;
  int threads = 1;
  double penalty_lambda = 10.0;
  GeneratorArch generator;
  DiscriminatorArch discriminator;

  // Throws ConfigError.
  void validate() const;
};

// key=value lines, '#' starts a comment. Unknown keys and bad values throw
// ConfigError naming the line.
TrainConfig parse_train_config(std::istream& in, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});
// Applies one "key=value" override.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);

// Precomputed tensors for one coarse content shape, cropped to its dilated
// bounding box. Masks are [1, d, h, w] float tensors.
struct ContentSample {
  std::string id;
  VoxelGrid coarse;
  ad::Tensor input;
  ad::Tensor gen_mask;    // mode-dependent (all ones under NoneWithPenalty)
  ad::Tensor loose_mask;  // penalty region complement
  ad::Tensor dis_mask;    // fake discriminator mask (or all ones)
};

struct StyleSample {
  std::string id;
  VoxelGrid detailed;  // binary crop
  ad::Tensor target;   // blurred crop; also the discriminator's real input
  ContentSample coarse;  // s downsampled, with its own masks
  ad::Tensor dis_mask;   // real discriminator mask (or all ones)
};

struct Dataset {
  std::vector<ContentSample> contents;
  std::vector<StyleSample> styles;
};

struct NamedGrid {
  std::string id;
  VoxelGrid grid;
};

// Halves (when symmetric), crops, blurs and builds masks. Empty shapes are
// dropped. Detailed dims must be 4x a whole coarse grid.
Dataset prepare_dataset(const std::vector<NamedGrid>& contents, const std::vector<NamedGrid>& styles,
                        const TrainConfig& config);
// Reads every .vxb/.binvox file of config.content_dir and config.style_dir,
// sorted by file name; ids are the file stems. Throws ConfigError if a
// directory yields no usable shape.
Dataset load_dataset(const TrainConfig& config);
std::vector<NamedGrid> read_grid_dir(const std::filesystem::path& dir);

struct LossRecord {
  long long iter = 0;
  double loss_d = 0.0;
  double loss_g_gan = 0.0;
  double loss_recon = 0.0;
  double loss_total = 0.0;
  std::size_t content = 0;
  std::size_t style = 0;
  bool degenerate = false;  // a discriminator term was skipped
};

void write_loss_header(std::ostream& out);
void write_loss_row(std::ostream& out, const LossRecord& r);

class Trainer {
 public:
  Trainer(TrainConfig config, Dataset data);

  // One sampled (content, style) pair: a discriminator update (skipped in
  // recon-only mode) then a generator update.
  LossRecord step();
  // The two halves of step() for a fixed pair. The discriminator update
  // sees a detached fake; the generator update freezes the discriminator.
  void discriminator_update(std::size_t content, std::size_t style, LossRecord& rec);
  void generator_update(std::size_t content, std::size_t style, LossRecord& rec);

  long long iteration() const { return iter_; }
  long long planned_iterations() const;

  const DecorModel& model() const { return model_; }
  DecorModel& model() { return model_; }
  const TrainConfig& config() const { return config_; }
  const Dataset& data() const { return data_; }
  // Model tensors plus optimizer state.
  std::vector<ad::NamedTensor> checkpoint_tensors() const;
  void save_checkpoint(const std::filesystem::path& path) const;

 private:
  void check_pair(std::size_t content, std::size_t style) const;

  TrainConfig config_;
  Dataset data_;
  DecorModel model_;
  ad::Adam adam_g_;
  ad::Adam adam_d_;
  std::mt19937_64 rng_;
  long long iter_ = 0;
};

using ProgressFn = std::function<void(const LossRecord&)>;

// Runs planned_iterations() steps, writing loss.csv, periodic
// ckpt_<iter>.dgck files and checkpoint.dgck under config.output_dir.
DecorModel train(const TrainConfig& config, Dataset data, const ProgressFn& progress = {});

}  // namespace decor
