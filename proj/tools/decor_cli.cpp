#include <CLI11.hpp>

#include <pthread.h>

#include <atomic>
#include <charconv>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "decor/conv3d.hpp"
#include "decor/detailize.hpp"
#include "decor/errors.hpp"
#include "decor/mesh.hpp"
#include "decor/metrics.hpp"
#include "decor/service.hpp"
#include "decor/style_space.hpp"
#include "decor/trainer.hpp"
#include "decor/voxel_io.hpp"

namespace fs = std::filesystem;
using namespace decor;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

// "x,y" parses as a style-space point; anything else is a style id.
std::optional<Vec2> parse_point(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) return std::nullopt;
  Vec2 p{};
  const auto parse = [](std::string_view t, double& v) {
    while (!t.empty() && t.front() == ' ') t.remove_prefix(1);
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    return ec == std::errc() && end == t.data() + t.size();
  };
  const std::string_view sv(s);
  if (!parse(sv.substr(0, comma), p[0]) || !parse(sv.substr(comma + 1), p[1])) return std::nullopt;
  return p;
}

StyleEmbedding load_embedding(const fs::path& json_path, const DecorModel& model) {
  return json_path.empty() ? embedding_from_model(model) : StyleEmbedding::from_json(read_text(json_path));
}

struct PreprocessArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
};

TrainConfig config_with_overrides(const std::string& file, const std::vector<std::string>& overrides) {
  auto cfg = load_train_config(file);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

int run_preprocess(const PreprocessArgs& a) {
  auto cfg = config_with_overrides(a.config, a.overrides);
  const fs::path out = a.out;
  if (cfg.cache_dir.empty()) cfg.cache_dir = out / "mask_cache";
  fs::create_directories(cfg.cache_dir);
  const auto data = load_dataset(cfg);
  fs::create_directories(out / "contents");
  fs::create_directories(out / "styles");
  for (const auto& c : data.contents) save_voxels(c.coarse, out / "contents" / (c.id + ".vxb"));
  for (const auto& s : data.styles) {
    save_voxels(s.detailed, out / "styles" / (s.id + ".vxb"));
    save_voxels(to_grid(s.target), out / "styles" / (s.id + "_target.vxb"));
    save_voxels(s.coarse.coarse, out / "styles" / (s.id + "_coarse.vxb"));
  }
  std::cout << "preprocessed " << data.contents.size() << " contents and " << data.styles.size()
            << " styles into " << out.string() << "\n";
  return 0;
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  long long log_every = 100;
};

int run_train(const TrainArgs& a) {
  const auto cfg = config_with_overrides(a.config, a.overrides);
  if (cfg.output_dir.empty()) throw ConfigError("output_dir is not set");
  auto data = load_dataset(cfg);
  std::cerr << "training on " << data.contents.size() << " contents and " << data.styles.size() << " styles\n";
  const long long every = std::max(1LL, a.log_every);
  train(cfg, std::move(data), [&](const LossRecord& r) {
    if (r.iter % every == 0) {
      std::cerr << "iter " << r.iter << " loss_d " << r.loss_d << " loss_g " << r.loss_g_gan << " recon "
                << r.loss_recon << "\n";
    }
  });
  std::cout << (cfg.output_dir / "checkpoint.dgck").string() << "\n";
  return 0;
}

struct DetailizeArgs {
  std::string checkpoint;
  std::string content;
  std::string style;
  std::string out;
  std::string embedding;
  std::string postprocess = "none";
  std::string mask = "loose";
  bool symmetric = false;
  int threads = 1;
};

int run_detailize(const DetailizeArgs& a) {
  ad::set_kernel_threads(a.threads);
  const auto model = DecorModel::load(a.checkpoint);
  const auto content = load_voxels(a.content).threshold();
  DetailizeOptions opt;
  opt.postprocess = parse_postprocess(a.postprocess);
  opt.mask = parse_gen_mask_mode(a.mask);
  opt.symmetric = a.symmetric;

  std::vector<float> code;
  if (const auto p = parse_point(a.style)) {
    code = interpolate_code(load_embedding(a.embedding, model), *p);
  } else {
    code = model.codebook.code_values(model.codebook.index_of(a.style));
  }
  const auto result = detailize(model.generator, content, code, opt);

  const fs::path out = a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  if (out.extension() == ".obj") {
    save_obj(marching_cubes(mesh_field(result), 0.5), out);
  } else if (out.extension() == ".vxb") {
    save_voxels(result.voxels, out);
  } else {
    throw ParameterError("--out must end in .obj or .vxb");
  }
  return 0;
}

struct EvaluateArgs {
  std::string manifest;
  std::string styles;
  std::string out;
  EvalOptions opt;
  bool naive = false;
};

int run_evaluate(EvaluateArgs a) {
  const auto manifest = read_manifest(a.manifest);
  std::vector<NamedExemplar> exemplars;
  for (auto& g : read_grid_dir(a.styles)) exemplars.push_back({g.id, std::move(g.grid)});
  if (a.naive) a.opt.mode = SearchMode::Naive;
  const auto report = evaluate(manifest, exemplars, a.opt);
  const auto text = report.to_json();
  if (a.out.empty()) {
    std::cout << text << "\n";
  } else {
    write_text(a.out, text + "\n");
  }
  return 0;
}

struct EmbedArgs {
  std::string checkpoint;
  std::string out;
};

int run_embed(const EmbedArgs& a) {
  write_text(a.out, embedding_from_model(DecorModel::load(a.checkpoint)).to_json() + "\n");
  return 0;
}

struct ServeArgs {
  std::string checkpoint;
  std::string contents;
  std::string embedding;
  std::string host = "127.0.0.1";
  int port = 8080;
  ServiceOptions opt;
  int threads = 1;
};

int run_serve(const ServeArgs& a) {
  if (a.checkpoint.empty()) throw ConfigError("no checkpoint: pass --checkpoint or set DECOR_CHECKPOINT");
  // Block termination signals before any thread starts so only the waiter sees them.
  sigset_t sigs;
  sigemptyset(&sigs);
  sigaddset(&sigs, SIGINT);
  sigaddset(&sigs, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

  ad::set_kernel_threads(a.threads);
  const auto service = StyleService::from_files(a.checkpoint, a.contents, a.embedding, a.opt);
  HttpServer server(service);
  const int port = server.bind(a.host, a.port);
  std::cout << "listening on " << a.host << ":" << port << std::endl;

  std::atomic<bool> done{false};
  std::jthread waiter([&] {
    int sig = 0;
    sigwait(&sigs, &sig);
    // A signal can land before listen() is running; keep asking until it returns.
    while (!done) {
      server.stop();
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  });
  server.listen();
  done = true;
  // listen() also returns on its own errors; wake the waiter so it can exit.
  pthread_kill(waiter.native_handle(), SIGTERM);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voxel shape detailization: train, detailize, evaluate and serve."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Crop, blur and build masks for a dataset; writes the crops and the mask cache");
  c_pre->add_option("--config", pre.config, "training config file")->required()->check(CLI::ExistingFile);
  c_pre->add_option("--set", pre.overrides, "config override key=value");
  c_pre->add_option("--out", pre.out, "output directory")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model from a config file");
  c_train->add_option("--config", tr.config, "training config file")->required()->check(CLI::ExistingFile);
  c_train->add_option("--set", tr.overrides, "config override key=value");
  c_train->add_option("--log-every", tr.log_every, "iterations between progress lines");

  DetailizeArgs de;
  auto* c_det = app.add_subcommand("detailize", "Detailize one content shape with a style id or style-space point");
  c_det->add_option("--checkpoint", de.checkpoint, "model checkpoint")->envname("DECOR_CHECKPOINT")->required();
  c_det->add_option("--content", de.content, "coarse content grid (.vxb or .binvox)")->required()->check(CLI::ExistingFile);
  c_det->add_option("--style", de.style, "style id, or x,y in the style space")->required();
  c_det->add_option("--out", de.out, "output .vxb voxels or .obj mesh")->required();
  c_det->add_option("--embedding", de.embedding, "style-space JSON for x,y styles");
  c_det->add_option("--postprocess", de.postprocess, "none | components");
  c_det->add_option("--mask", de.mask, "generator mask mode");
  c_det->add_flag("--symmetric", de.symmetric, "generate one half and mirror it");
  c_det->add_option("--threads", de.threads, "kernel threads")->check(CLI::PositiveNumber);

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Score detailized outputs listed in a manifest");
  c_eval->add_option("--manifest", ev.manifest, "lines of <content> <style> <output>")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--styles", ev.styles, "directory of detailed exemplars")->required()->check(CLI::ExistingDirectory);
  c_eval->add_option("--out", ev.out, "report JSON (stdout when omitted)");
  c_eval->add_option("--patches", ev.opt.patches, "surface patches sampled per output");
  c_eval->add_option("--seed", ev.opt.seed, "sampling seed");
  c_eval->add_option("--threshold", ev.opt.threshold, "patch similarity threshold");
  c_eval->add_option("--div-styles", ev.opt.div_styles, "styles used by the diversity metrics");
  c_eval->add_option("--threads", ev.opt.threads, "worker threads")->check(CLI::PositiveNumber);
  c_eval->add_flag("--naive", ev.naive, "exhaustive patch search");

  EmbedArgs em;
  auto* c_embed = app.add_subcommand("embed", "Write the 2-D style-space embedding of a checkpoint");
  c_embed->add_option("--checkpoint", em.checkpoint, "model checkpoint")->envname("DECOR_CHECKPOINT")->required();
  c_embed->add_option("--out", em.out, "embedding JSON")->required();

  ServeArgs sv;
  auto* c_serve = app.add_subcommand("serve", "Serve the style explorer HTTP API");
  c_serve->add_option("--checkpoint", sv.checkpoint, "model checkpoint")->envname("DECOR_CHECKPOINT");
  c_serve->add_option("--contents", sv.contents, "directory of content grids")->required()->check(CLI::ExistingDirectory);
  c_serve->add_option("--embedding", sv.embedding, "style-space JSON (built from the checkpoint when omitted)");
  c_serve->add_option("--host", sv.host, "bind address");
  c_serve->add_option("--port", sv.port, "port, 0 picks a free one")->envname("DECOR_PORT")->check(CLI::Range(0, 65535));
  c_serve->add_option("--max-dim", sv.opt.max_dim, "largest content extent")->check(CLI::PositiveNumber);
  c_serve->add_option("--max-body", sv.opt.max_body, "largest request body in bytes");
  c_serve->add_flag("--symmetric", sv.opt.symmetric, "generate one half and mirror it");
  c_serve->add_option("--threads", sv.threads, "kernel threads per request")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_pre) return run_preprocess(pre);
    if (*c_train) return run_train(tr);
    if (*c_det) return run_detailize(de);
    if (*c_eval) return run_evaluate(ev);
    if (*c_embed) return run_embed(em);
    if (*c_serve) return run_serve(sv);
  } catch (const std::exception& e) {
    std::cerr << "decor: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
