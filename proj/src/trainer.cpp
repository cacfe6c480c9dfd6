#include "decor/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "decor/checkpoint.hpp"
#include "decor/conv3d.hpp"
#include "decor/errors.hpp"
#include "decor/losses.hpp"
#include "decor/voxel_io.hpp"
#include "decor/voxel_ops.hpp"

namespace decor {
namespace {

// Coarse crops are grown to this many voxels per axis so the fine crop
// (4x) is at least one discriminator receptive field wide.
constexpr int kMinCoarseExtent = 5;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) throw ConfigError("bad value for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

template <std::size_t N>
std::array<int, N> parse_ints(const std::string& key, const std::string& v) {
  std::array<int, N> out{};
  std::stringstream ss(v);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i == N) throw ConfigError(key + " takes " + std::to_string(N) + " comma-separated integers");
    out[i++] = parse_number<int>(key, trim(item));
  }
  if (i != N) throw ConfigError(key + " takes " + std::to_string(N) + " comma-separated integers");
  return out;
}

ad::Tensor ones_like_grid(const Dims& d) { return ad::Tensor::full({1, d.z, d.y, d.x}, 1.0f); }

VoxelGrid mask_or_cached(const TrainConfig& cfg, const VoxelGrid& input, const std::string& tag,
                         const std::function<VoxelGrid(const VoxelGrid&)>& build) {
  return cached_mask(cfg.cache_dir, input, tag, build);
}

// Crop region of a coarse grid: dilated bbox, grown to the minimum extent.
CropRegion coarse_region(const VoxelGrid& coarse) {
  const auto& d = coarse.dims();
  if (d.x < kMinCoarseExtent || d.y < kMinCoarseExtent || d.z < kMinCoarseExtent) {
    throw ConfigError("coarse grids need at least " + std::to_string(kMinCoarseExtent) + " voxels per axis, got " +
                      to_string(d));
  }
  return expand_region(crop_to_dilated_bbox(coarse, kUpsampleFactor).first, kMinCoarseExtent, d);
}

ContentSample make_content(const std::string& id, const VoxelGrid& coarse_crop, const TrainConfig& cfg) {
  ContentSample c;
  c.id = id;
  c.coarse = coarse_crop;
  c.input = to_tensor(coarse_crop.as_continuous());
  const auto fine = coarse_crop.dims().scaled(kUpsampleFactor);
  const auto loose = mask_or_cached(cfg, coarse_crop, "gen-loose-4", [](const VoxelGrid& g) {
    return generator_mask(g, kUpsampleFactor, GenMaskMode::Loose).grid;
  });
  c.loose_mask = to_tensor(loose.as_continuous());
  switch (cfg.gen_mask_mode) {
    case TrainMaskMode::Loose:
      c.gen_mask = c.loose_mask;
      break;
    case TrainMaskMode::Strict:
      c.gen_mask = to_tensor(mask_or_cached(cfg, coarse_crop, "gen-strict-4", [](const VoxelGrid& g) {
                               return generator_mask(g, kUpsampleFactor, GenMaskMode::Strict).grid;
                             }).as_continuous());
      break;
    case TrainMaskMode::NoneWithPenalty:
      c.gen_mask = ones_like_grid(fine);
      break;
  }
  c.dis_mask = cfg.dis_mask ? to_tensor(mask_or_cached(cfg, coarse_crop, "dis-fake", [](const VoxelGrid& g) {
                                          return discriminator_mask_fake(g).grid;
                                        }).as_continuous())
                            : ones_like_grid(coarse_crop.dims().scaled(2));
  return c;
}

ad::Tensor apply_mask(const ad::Tensor& raw, const ContentSample& c, TrainMaskMode mode) {
  return mode == TrainMaskMode::NoneWithPenalty ? raw : ad::mul(raw, c.gen_mask);
}

// Turns parameter gradients off for the lifetime of the guard.
class FreezeGuard {
 public:
  explicit FreezeGuard(std::vector<ad::NamedTensor> params) : params_(std::move(params)) {
    for (auto& p : params_) p.tensor.set_requires_grad(false);
  }
  ~FreezeGuard() {
    for (auto& p : params_) p.tensor.set_requires_grad(true);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<ad::NamedTensor> params_;
};

std::vector<std::string> style_ids(const Dataset& data) {
  std::vector<std::string> ids;
  for (const auto& s : data.styles) ids.push_back(s.id);
  return ids;
}

ad::AdamOptions adam_options(const TrainConfig& c) { return {c.lr, c.beta1, c.beta2, 1e-8f}; }

Dataset checked(Dataset data, const TrainConfig& config) {
  config.validate();
  if (data.styles.empty() || (data.contents.empty() && !config.recon_only)) {
    throw ConfigError("training needs at least one content and one style");
  }
  return data;
}

}  // namespace

const char* to_string(TrainMaskMode mode) {
  switch (mode) {
    case TrainMaskMode::Loose: return "loose";
    case TrainMaskMode::Strict: return "strict";
    case TrainMaskMode::NoneWithPenalty: return "none-with-penalty";
  }
  return "?";
}

TrainMaskMode parse_train_mask_mode(const std::string& s) {
  if (s == "loose") return TrainMaskMode::Loose;
  if (s == "strict") return TrainMaskMode::Strict;
  if (s == "none-with-penalty" || s == "none") return TrainMaskMode::NoneWithPenalty;
  throw ConfigError("unknown gen_mask_mode '" + s + "'");
}

void TrainConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0 || sigma < 0.0) throw ConfigError("alpha, beta and sigma must be non-negative");
  if (epochs < 0 || iterations < 0) throw ConfigError("epochs and iterations must be non-negative");
  if (batch != 1) throw ConfigError("only batch=1 is supported");
  if (!(lr > 0.0f)) throw ConfigError("lr must be positive");
  if (beta1 < 0.0f || beta1 >= 1.0f || beta2 < 0.0f || beta2 >= 1.0f) throw ConfigError("adam betas must be in [0,1)");
  if (n_styles < 0) throw ConfigError("n_styles must be non-negative");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  if (penalty_lambda < 0.0) throw ConfigError("penalty_lambda must be non-negative");
}

void set_config_value(TrainConfig& c, const std::string& key, const std::string& v) {
  if (key == "alpha") c.alpha = parse_number<double>(key, v);
  else if (key == "beta") c.beta = parse_number<double>(key, v);
  else if (key == "sigma") c.sigma = parse_number<double>(key, v);
  else if (key == "epochs") c.epochs = parse_number<int>(key, v);
  else if (key == "batch") c.batch = parse_number<int>(key, v);
  else if (key == "lr") c.lr = parse_number<float>(key, v);
  else if (key == "beta1") c.beta1 = parse_number<float>(key, v);
  else if (key == "beta2") c.beta2 = parse_number<float>(key, v);
  else if (key == "n_styles") c.n_styles = parse_number<int>(key, v);
  else if (key == "gen_mask_mode") c.gen_mask_mode = parse_train_mask_mode(v);
  else if (key == "dis_mask") c.dis_mask = parse_bool(key, v);
  else if (key == "recon_only") c.recon_only = parse_bool(key, v);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "iterations") c.iterations = parse_number<long long>(key, v);
  else if (key == "content_dir") c.content_dir = v;
  else if (key == "style_dir") c.style_dir = v;
  else if (key == "output_dir") c.output_dir = v;
  else if (key == "cache_dir") c.cache_dir = v;
  else if (key == "checkpoint_every") c.checkpoint_every = parse_number<long long>(key, v);
  else if (key == "symmetric") c.symmetric = parse_bool(key, v);
  else if (key == "threads") c.threads = parse_number<int>(key, v);
  else if (key == "penalty_lambda") c.penalty_lambda = parse_number<double>(key, v);
  else if (key == "gen_kernel") c.generator.kernel = parse_number<int>(key, v);
  else if (key == "gen_widths") c.generator.widths = parse_ints<4>(key, v);
  else if (key == "dis_widths") c.discriminator.widths = parse_ints<3>(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig parse_train_config(std::istream& in, TrainConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    try {
      set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_train_config(in, std::move(base));
}

Dataset prepare_dataset(const std::vector<NamedGrid>& contents, const std::vector<NamedGrid>& styles,
                        const TrainConfig& cfg) {
  cfg.validate();
  Dataset data;
  for (const auto& [id, raw] : contents) {
    if (!raw.any_occupied()) continue;
    const VoxelGrid g = cfg.symmetric ? halve_symmetric(raw.threshold()) : raw.threshold();
    if (!g.any_occupied()) continue;
    data.contents.push_back(make_content(id, crop(g, coarse_region(g)), cfg));
  }
  for (const auto& [id, raw] : styles) {
    if (!raw.any_occupied()) continue;
    const VoxelGrid s = cfg.symmetric ? halve_symmetric(raw.threshold()) : raw.threshold();
    const auto& d = s.dims();
    if (d.x % kUpsampleFactor || d.y % kUpsampleFactor || d.z % kUpsampleFactor) {
      throw ConfigError("detailed shape " + id + " has dims " + to_string(d) + " not divisible by 4");
    }
    const VoxelGrid coarse = downsample_max(s, kUpsampleFactor);
    const CropRegion low = coarse_region(coarse);
    const CropRegion high = low.scaled(kUpsampleFactor);
    StyleSample st;
    st.id = id;
    st.detailed = crop(s, high);
    st.target = to_tensor(crop(gaussian_blur(s, cfg.sigma), high));
    st.coarse = make_content(id, crop(coarse, low), cfg);
    st.dis_mask = cfg.dis_mask ? to_tensor(mask_or_cached(cfg, st.detailed, "dis-real", [](const VoxelGrid& g) {
                                             return discriminator_mask_real(g).grid;
                                           }).as_continuous())
                               : ones_like_grid({high.extent[0] / 2, high.extent[1] / 2, high.extent[2] / 2});
    data.styles.push_back(std::move(st));
  }
  if (cfg.n_styles > 0) {
    if (static_cast<std::size_t>(cfg.n_styles) > data.styles.size()) {
      throw ConfigError("n_styles=" + std::to_string(cfg.n_styles) + " but only " +
                        std::to_string(data.styles.size()) + " usable exemplars");
    }
    data.styles.resize(static_cast<std::size_t>(cfg.n_styles));
  }
  if (data.styles.empty()) throw ConfigError("dataset has no usable detailed exemplar");
  if (data.contents.empty() && !cfg.recon_only) throw ConfigError("dataset has no usable content shape");
  return data;
}

std::vector<NamedGrid> read_grid_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".vxb" || ext == ".binvox")) files.push_back(e.path());
  }
  std::ranges::sort(files);
  std::vector<NamedGrid> out;
  for (const auto& f : files) out.push_back({f.stem().string(), load_voxels(f)});
  return out;
}

Dataset load_dataset(const TrainConfig& cfg) {
  std::vector<NamedGrid> contents;
  if (!cfg.content_dir.empty()) contents = read_grid_dir(cfg.content_dir);
  return prepare_dataset(contents, read_grid_dir(cfg.style_dir), cfg);
}

void write_loss_header(std::ostream& out) { out << "iter,loss_d,loss_g_gan,loss_recon,loss_total\n"; }

void write_loss_row(std::ostream& out, const LossRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g\n", r.iter, r.loss_d, r.loss_g_gan, r.loss_recon,
                r.loss_total);
  out << buf;
}

Trainer::Trainer(TrainConfig config, Dataset data)
    : config_(std::move(config)),
      data_(checked(std::move(data), config_)),
      model_(DecorModel::init(config_.seed, style_ids(data_), config_.generator, config_.discriminator)),
      adam_g_(model_.generator_side(), adam_options(config_)),
      adam_d_(model_.discriminator.parameters(), adam_options(config_)),
      rng_(config_.seed ^ 0x9e3779b97f4a7c15ull) {}

long long Trainer::planned_iterations() const {
  if (config_.iterations > 0) return config_.iterations;
  const auto per_epoch = std::max(data_.contents.size(), data_.styles.size());
  return static_cast<long long>(config_.epochs) * static_cast<long long>(per_epoch);
}

void Trainer::check_pair(std::size_t content, std::size_t style) const {
  if (style >= data_.styles.size()) throw ParameterError("style index out of range");
  if (!config_.recon_only && content >= data_.contents.size()) throw ParameterError("content index out of range");
}

void Trainer::discriminator_update(std::size_t content, std::size_t style, LossRecord& rec) {
  check_pair(content, style);
  const auto& c = data_.contents[content];
  const auto& s = data_.styles[style];
  ad::Tensor fake;
  {
    ad::NoGradGuard ng;
    fake = apply_mask(model_.generator.forward(c.input, model_.codebook.code(style)), c, config_.gen_mask_mode);
  }
  adam_d_.zero_grad();
  const auto real_scores = model_.discriminator.forward(s.target);
  const auto fake_scores = model_.discriminator.forward(fake);
  try {
    const auto l = loss_discriminator(real_scores, fake_scores, static_cast<int>(style), s.dis_mask, c.dis_mask);
    ad::backward(l.total);
    adam_d_.step();
    rec.loss_d = l.total.item();
  } catch (const DegenerateSampleError&) {
    rec.degenerate = true;
  }
}

void Trainer::generator_update(std::size_t content, std::size_t style, LossRecord& rec) {
  check_pair(content, style);
  const auto& s = data_.styles[style];
  const auto& code = model_.codebook.code(style);
  const bool penalty = config_.gen_mask_mode == TrainMaskMode::NoneWithPenalty;
  adam_g_.zero_grad();
  adam_d_.zero_grad();
  ad::Tensor total;
  {
    FreezeGuard freeze(model_.discriminator.parameters());
    std::vector<ad::Tensor> terms;
    if (!config_.recon_only) {
      const auto& c = data_.contents[content];
      const auto raw = model_.generator.forward(c.input, code);
      const auto scores = model_.discriminator.forward(apply_mask(raw, c, config_.gen_mask_mode));
      try {
        const auto gan = loss_generator_gan(scores, static_cast<int>(style), c.dis_mask, config_.alpha);
        rec.loss_g_gan = gan.total.item();
        terms.push_back(gan.total);
      } catch (const DegenerateSampleError&) {
        rec.degenerate = true;
      }
      if (penalty) terms.push_back(loss_outside_mask(raw, c.loose_mask, config_.penalty_lambda));
    }
    const auto raw_s = model_.generator.forward(s.coarse.input, code);
    const auto recon = loss_reconstruction(apply_mask(raw_s, s.coarse, config_.gen_mask_mode), s.target);
    rec.loss_recon = recon.item();
    terms.push_back(ad::scale(recon, static_cast<float>(config_.beta)));
    if (penalty) terms.push_back(loss_outside_mask(raw_s, s.coarse.loose_mask, config_.penalty_lambda));
    total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
    ad::backward(total);
  }
  rec.loss_total = total.item();
  adam_g_.step();
}

LossRecord Trainer::step() {
  LossRecord rec;
  rec.iter = ++iter_;
  // Content then style, both uniform; recon-only runs never draw a content.
  if (!config_.recon_only) {
    rec.content = std::uniform_int_distribution<std::size_t>(0, data_.contents.size() - 1)(rng_);
  }
  rec.style = std::uniform_int_distribution<std::size_t>(0, data_.styles.size() - 1)(rng_);
  if (!config_.recon_only) discriminator_update(rec.content, rec.style, rec);
  generator_update(rec.content, rec.style, rec);
  return rec;
}

std::vector<ad::NamedTensor> Trainer::checkpoint_tensors() const {
  auto t = model_.tensors();
  for (auto& n : adam_g_.state_tensors("adam_g/")) t.push_back(std::move(n));
  for (auto& n : adam_d_.state_tensors("adam_d/")) t.push_back(std::move(n));
  return t;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  ad::save_checkpoint(path, checkpoint_tensors());
}

DecorModel train(const TrainConfig& config, Dataset data, const ProgressFn& progress) {
  ad::set_kernel_threads(config.threads);
  Trainer trainer(config, std::move(data));
  const auto& out_dir = config.output_dir;
  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir / "loss.csv");
    if (!log) throw IoError("cannot write " + (out_dir / "loss.csv").string());
    write_loss_header(log);
  }
  const long long n = trainer.planned_iterations();
  for (long long i = 0; i < n; ++i) {
    const auto rec = trainer.step();
    if (log.is_open()) write_loss_row(log, rec);
    if (progress) progress(rec);
    if (!out_dir.empty() && config.checkpoint_every > 0 && rec.iter % config.checkpoint_every == 0) {
      trainer.save_checkpoint(out_dir / ("ckpt_" + std::to_string(rec.iter) + ".dgck"));
    }
  }
  if (!out_dir.empty()) trainer.save_checkpoint(out_dir / "checkpoint.dgck");
  return trainer.model();
}

}  // namespace decor
