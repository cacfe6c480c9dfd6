#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "../support/fixtures.hpp"
#include "decor/mesh.hpp"
#include "decor/metrics.hpp"
#include "decor/style_space.hpp"
#include "decor/voxel_io.hpp"

extern char** environ;

using namespace decor;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string output;  // stdout and stderr
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Run run(const std::string& args, const std::string& env = {}) {
  const std::string cmd = env + (env.empty() ? "" : " ") + quote(DECOR_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (const auto n = fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
  const int st = pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// Two 16^3 contents, three 64^3 exemplars and a short training config.
struct Workspace {
  fs::path root;

  Workspace() : root(fs::temp_directory_path() / ("decor_cli_" + std::to_string(getpid()))) {
    fs::remove_all(root);
    fs::create_directories(root / "contents");
    fs::create_directories(root / "styles");
    const auto box = fixtures::coarse_from(fixtures::in_box);
    const auto ell = fixtures::coarse_from(fixtures::in_ell);
    const auto tee = fixtures::coarse_from(fixtures::in_tee);
    save_voxels(box, root / "contents" / "box.vxb");
    save_voxels(ell, root / "contents" / "ell.vxb");
    save_voxels(fixtures::smooth(box), root / "styles" / "a_smooth.vxb");
    save_voxels(fixtures::corrugated(ell), root / "styles" / "b_corrugated.vxb");
    save_voxels(fixtures::corrugated(tee), root / "styles" / "c_tee.vxb");
  }
  ~Workspace() { fs::remove_all(root); }

  fs::path config(const std::string& name, const std::string& out_dir, std::uint64_t seed) const {
    const auto path = root / name;
    spit(path, "content_dir=" + (root / "contents").string() + "\nstyle_dir=" + (root / "styles").string() +
                   "\noutput_dir=" + (root / out_dir).string() + "\nseed=" + std::to_string(seed) +
                   "\niterations=3\ngen_widths=6,6,4,4\ndis_widths=4,4,4\nlr=0.001\n");
    return path;
  }

  // Trained once and shared by the inference tests.
  const fs::path& checkpoint() {
    if (ckpt_.empty()) {
      const auto r = run("train --config " + quote(config("shared.cfg", "shared", 11).string()));
      REQUIRE_MESSAGE(r.status == 0, r.output);
      ckpt_ = root / "shared" / "checkpoint.dgck";
    }
    return ckpt_;
  }

 private:
  fs::path ckpt_;
};

Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("usage errors exit 2, runtime errors exit 1 with a message") {
  CHECK(run("").status == 2);
  CHECK(run("frobnicate").status == 2);
  CHECK(run("embed --checkpoint x.dgck --out y.json --bogus").status == 2);
  CHECK(run("embed --out y.json").status == 2);
  CHECK(run("serve --contents " + quote(ws().root.string()) + " --port 70000").status == 2);
  CHECK(run("--help").status == 0);

  const auto missing = run("embed --checkpoint " + quote((ws().root / "none.dgck").string()) + " --out " +
                           quote((ws().root / "e.json").string()));
  CHECK(missing.status == 1);
  CHECK(missing.output.find("none.dgck") != std::string::npos);

  const auto bad_key = run("train --config " + quote(ws().config("k.cfg", "k", 1).string()) + " --set nonsense=1");
  CHECK(bad_key.status == 1);
  CHECK(bad_key.output.find("nonsense") != std::string::npos);
}

TEST_CASE("preprocess writes crops, targets and the mask cache") {
  auto& w = ws();
  const auto out = w.root / "pre";
  const auto r = run("preprocess --config " + quote(w.config("pre.cfg", "unused", 1).string()) + " --out " +
                     quote(out.string()));
  REQUIRE_MESSAGE(r.status == 0, r.output);
  for (const char* id : {"box", "ell"}) {
    const auto c = load_voxels(out / "contents" / (std::string(id) + ".vxb"));
    CHECK(c.any_occupied());
    CHECK(c.dims().x <= fixtures::kCoarse);
  }
  for (const char* id : {"a_smooth", "b_corrugated", "c_tee"}) {
    const auto detailed = load_voxels(out / "styles" / (std::string(id) + ".vxb"));
    const auto target = load_voxels(out / "styles" / (std::string(id) + "_target.vxb"));
    CHECK(detailed.dims() == target.dims());
    for (float v : target.values()) CHECK((v >= 0.0f && v <= 1.0f));
  }
  CHECK(!fs::is_empty(out / "mask_cache"));

  // A second run reuses the cache and writes the same crops.
  const auto before = slurp(out / "styles" / "b_corrugated_target.vxb");
  REQUIRE(run("preprocess --config " + quote((w.root / "pre.cfg").string()) + " --out " + quote(out.string())).status == 0);
  CHECK(slurp(out / "styles" / "b_corrugated_target.vxb") == before);
}

TEST_CASE("train with seed 7 twice yields identical checkpoints") {
  auto& w = ws();
  for (const char* name : {"s7a", "s7b"}) {
    const auto r = run("train --config " + quote(w.config(std::string(name) + ".cfg", name, 7).string()));
    REQUIRE_MESSAGE(r.status == 0, r.output);
  }
  const auto a = slurp(w.root / "s7a" / "checkpoint.dgck");
  CHECK(!a.empty());
  CHECK(a == slurp(w.root / "s7b" / "checkpoint.dgck"));
  CHECK(slurp(w.root / "s7a" / "loss.csv") == slurp(w.root / "s7b" / "loss.csv"));

  // --set overrides the file.
  REQUIRE(run("train --config " + quote((w.root / "s7a.cfg").string()) + " --set seed=8 --set output_dir=" +
              quote((w.root / "s8").string()))
              .status == 0);
  CHECK(slurp(w.root / "s8" / "checkpoint.dgck") != a);
}

TEST_CASE("detailize writes a readable OBJ and voxels; a vertex point matches its id") {
  auto& w = ws();
  const auto ckpt = quote(w.checkpoint().string());
  const auto content = quote((w.root / "contents" / "ell.vxb").string());
  const auto obj = w.root / "out" / "ell.obj";
  auto r = run("detailize --checkpoint " + ckpt + " --content " + content + " --style b_corrugated --out " +
               quote(obj.string()));
  REQUIRE_MESSAGE(r.status == 0, r.output);
  const auto mesh = load_obj(obj);
  for (const auto& t : mesh.triangles)
    for (auto i : t) CHECK(i < mesh.vertices.size());

  const auto vxb = w.root / "out" / "ell.vxb";
  REQUIRE(run("detailize --checkpoint " + ckpt + " --content " + content + " --style b_corrugated --out " +
              quote(vxb.string()))
              .status == 0);
  CHECK(load_voxels(vxb).dims() == Dims{64, 64, 64});

  const auto emb_path = w.root / "emb.json";
  REQUIRE(run("embed --checkpoint " + ckpt + " --out " + quote(emb_path.string())).status == 0);
  const auto emb = StyleEmbedding::from_json(slurp(emb_path));
  const auto it = std::find(emb.ids.begin(), emb.ids.end(), "b_corrugated");
  REQUIRE(it != emb.ids.end());
  const auto& p = emb.points[it - emb.ids.begin()];
  char point[128];
  std::snprintf(point, sizeof point, "%.17g,%.17g", p[0], p[1]);
  const auto by_point = w.root / "out" / "ell_point.obj";
  r = run("detailize --checkpoint " + ckpt + " --content " + content + " --style " + quote(point) +
          " --embedding " + quote(emb_path.string()) + " --out " + quote(by_point.string()));
  REQUIRE_MESSAGE(r.status == 0, r.output);
  CHECK(slurp(by_point) == slurp(obj));

  CHECK(run("detailize --checkpoint " + ckpt + " --content " + content + " --style nope --out " +
            quote((w.root / "out" / "x.obj").string()))
            .status == 1);
  CHECK(run("detailize --checkpoint " + ckpt + " --content " + content + " --style b_corrugated --out " +
            quote((w.root / "out" / "x.ply").string()))
            .status == 1);
}

TEST_CASE("evaluate on the ground-truth manifest reports strict IOU 1") {
  auto& w = ws();
  const auto gt = w.root / "gt";
  fs::create_directories(gt);
  const auto box = fixtures::coarse_from(fixtures::in_box);
  const auto ell = fixtures::coarse_from(fixtures::in_ell);
  save_voxels(fixtures::smooth(box), gt / "box_a.vxb");
  save_voxels(fixtures::corrugated(box), gt / "box_b.vxb");
  save_voxels(fixtures::smooth(ell), gt / "ell_a.vxb");
  save_voxels(fixtures::corrugated(ell), gt / "ell_b.vxb");
  spit(gt / "manifest.txt",
       "# content style output\n"
       "../contents/box.vxb a_smooth box_a.vxb\n../contents/box.vxb b_corrugated box_b.vxb\n"
       "../contents/ell.vxb a_smooth ell_a.vxb\n../contents/ell.vxb b_corrugated ell_b.vxb\n");
  const auto report_path = w.root / "report.json";
  const auto r = run("evaluate --manifest " + quote((gt / "manifest.txt").string()) + " --styles " +
                     quote((w.root / "styles").string()) + " --out " + quote(report_path.string()) +
                     " --patches 50 --seed 3 --div-styles 2");
  REQUIRE_MESSAGE(r.status == 0, r.output);
  const auto report = EvalReport::from_json(slurp(report_path));
  CHECK(report.strict_iou == 1.0);
  CHECK(report.n_outputs == 4);
  CHECK(report.n_contents == 2);
  CHECK(report.seed == 3);
  CHECK(report.patches_per_shape == 50);

  // Without --out the report goes to stdout; --naive changes speed, not scores.
  const auto eval_stdout = [&](const std::string& extra) {
    const auto e = run("evaluate --manifest " + quote((gt / "manifest.txt").string()) + " --styles " +
                       quote((w.root / "styles").string()) + " --patches 2 --seed 3 --div-styles 2" + extra);
    REQUIRE_MESSAGE(e.status == 0, e.output);
    return EvalReport::from_json(e.output);
  };
  CHECK(eval_stdout(" --naive") == eval_stdout(""));

  spit(gt / "broken.txt", "../contents/box.vxb a_smooth missing.vxb\n");
  const auto missing = run("evaluate --manifest " + quote((gt / "broken.txt").string()) + " --styles " +
                           quote((w.root / "styles").string()));
  CHECK(missing.status == 1);
  CHECK(missing.output.find("missing.vxb") != std::string::npos);
}

TEST_CASE("embed writes the style space of a checkpoint") {
  auto& w = ws();
  const auto path = w.root / "embed.json";
  REQUIRE(run("embed --out " + quote(path.string()), "DECOR_CHECKPOINT=" + quote(w.checkpoint().string())).status == 0);
  const auto emb = StyleEmbedding::from_json(slurp(path));
  CHECK(emb.ids == std::vector<std::string>{"a_smooth", "b_corrugated", "c_tee"});
  CHECK(emb.triangles.size() == 1);
}

namespace {

// Starts `decor serve`, returns its pid and the port from its first line.
std::pair<pid_t, int> start_server(const std::vector<std::string>& args, const std::vector<std::string>& env) {
  int fds[2];
  REQUIRE(pipe(fds) == 0);
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, fds[0]);

  std::vector<std::string> argv_s{DECOR_CLI, "serve"};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_s) argv.push_back(s.data());
  argv.push_back(nullptr);
  std::vector<std::string> env_s;
  for (char** e = environ; *e; ++e)
    if (std::string_view(*e).substr(0, 6) != "DECOR_") env_s.emplace_back(*e);
  env_s.insert(env_s.end(), env.begin(), env.end());
  std::vector<char*> envp;
  for (auto& s : env_s) envp.push_back(s.data());
  envp.push_back(nullptr);

  pid_t pid = 0;
  REQUIRE(posix_spawn(&pid, DECOR_CLI, &actions, nullptr, argv.data(), envp.data()) == 0);
  posix_spawn_file_actions_destroy(&actions);
  close(fds[1]);
  std::string line;
  char c = 0;
  while (read(fds[0], &c, 1) == 1 && c != '\n') line += c;
  close(fds[0]);
  const auto colon = line.rfind(':');
  REQUIRE_MESSAGE(colon != std::string::npos, line);
  return {pid, std::stoi(line.substr(colon + 1))};
}

int stop_server(pid_t pid) {
  kill(pid, SIGTERM);
  int st = 0;
  waitpid(pid, &st, 0);
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_CASE("serve answers the API; flags win over the environment") {
  auto& w = ws();
  const auto ckpt = w.checkpoint().string();
  const auto contents = (w.root / "contents").string();

  // Port from DECOR_PORT, checkpoint from the flag despite a bogus DECOR_CHECKPOINT.
  auto [pid, port] = start_server({"--checkpoint", ckpt, "--contents", contents},
                                  {"DECOR_PORT=0", "DECOR_CHECKPOINT=/nonexistent.dgck"});
  REQUIRE(port > 0);
  {
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(60, 0);
    auto res = cli.Get("/api/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    res = cli.Get("/api/contents");
    REQUIRE(res);
    CHECK(json::parse(res->body).size() == 2);
    res = cli.Post("/api/detailize", R"({"content_id": "box", "style": {"id": "a_smooth"}})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "application/octet-stream");
    const auto mesh = decode_mesh_blob(std::span(reinterpret_cast<const std::uint8_t*>(res->body.data()), res->body.size()));
    for (const auto& t : mesh.triangles)
      for (auto i : t) CHECK(i < mesh.vertices.size());
    res = cli.Post("/api/detailize", R"({"content_id": "nope", "style": {"id": "a_smooth"}})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 404);
  }
  CHECK(stop_server(pid) == 0);

  // --port beats DECOR_PORT; the checkpoint comes from the environment.
  std::tie(pid, port) = start_server({"--contents", contents, "--port", "0"},
                                     {"DECOR_PORT=notaport", "DECOR_CHECKPOINT=" + ckpt});
  {
    httplib::Client cli("127.0.0.1", port);
    auto res = cli.Get("/api/styles");
    REQUIRE(res);
    CHECK(json::parse(res->body).size() == 3);
  }
  CHECK(stop_server(pid) == 0);

  CHECK(run("serve --contents " + quote(contents) + " --port 0", "env -u DECOR_CHECKPOINT").status == 1);
}
