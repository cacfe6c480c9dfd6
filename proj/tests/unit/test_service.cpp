#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include <future>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "../support/fixtures.hpp"
#include "decor/conv3d.hpp"
#include "decor/errors.hpp"
#include "decor/mesh.hpp"
#include "decor/service.hpp"

using namespace decor;
using nlohmann::json;

namespace {

StyleService make_service(ServiceOptions opt = {}) {
  auto model = DecorModel::init(5, {"smooth", "corrugated", "third", "fourth"});
  // Lift the output bias so the untrained generator fills part of the mask.
  auto params = model.generator.parameters();
  for (auto it = params.rbegin(); it != params.rend(); ++it)
    if (it->name.find("bias") != std::string::npos) {
      for (auto& v : it->tensor.mutable_data()) v = 0.05f;
      break;
    }
  auto emb = embedding_from_model(model);
  std::vector<NamedGrid> contents{{"box", fixtures::coarse_from(fixtures::in_box)},
                                  {"ell", fixtures::coarse_from(fixtures::in_ell)}};
  return StyleService(std::move(model), std::move(emb), std::move(contents), opt);
}

std::string detailize_body(const std::string& content, const json& style, const std::string& post = "none") {
  return json{{"content_id", content}, {"style", style}, {"postprocess", post}}.dump();
}

}  // namespace

TEST_CASE("catalog endpoints") {
  const auto svc = make_service();
  auto r = svc.handle("GET", "/api/health", "");
  CHECK(r.status == 200);
  CHECK(json::parse(r.body) == json{{"status", "ok"}});

  r = svc.handle("GET", "/api/styles", "");
  const auto styles = json::parse(r.body);
  REQUIRE(styles.size() == 4);
  CHECK(styles[1]["id"] == "corrugated");
  CHECK(styles[1]["point"][0].get<double>() == svc.embedding().points[1][0]);

  r = svc.handle("GET", "/api/contents", "");
  const auto contents = json::parse(r.body);
  REQUIRE(contents.size() == 2);
  CHECK(contents[0] == json{{"id", "box"}, {"dims", {16, 16, 16}}});

  r = svc.handle("GET", "/api/embedding", "");
  CHECK(StyleEmbedding::from_json(r.body) == svc.embedding());

  CHECK(svc.handle("GET", "/api/nothing", "").status == 404);
  CHECK(svc.handle("GET", "/api/detailize", "").status == 405);
}

TEST_CASE("detailize by vertex point equals detailize by id, byte for byte") {
  const auto svc = make_service();
  for (std::size_t i = 0; i < svc.embedding().ids.size(); ++i) {
    const auto& p = svc.embedding().points[i];
    for (const char* post : {"none", "components"}) {
      const auto by_id = svc.handle("POST", "/api/detailize", detailize_body("ell", {{"id", svc.embedding().ids[i]}}, post));
      const auto by_point = svc.handle("POST", "/api/detailize", detailize_body("ell", {{"point", {p[0], p[1]}}}, post));
      REQUIRE(by_id.status == 200);
      REQUIRE(by_point.status == 200);
      CHECK(by_id.content_type == "application/octet-stream");
      CHECK(by_id.body == by_point.body);
      CHECK(by_id.body.size() > 8);  // a non-empty mesh
    }
  }
  // A blend point gives a valid, different request echo.
  const auto mid = svc.handle("POST", "/api/detailize", detailize_body("box", {{"point", {0.0, 0.0}}}));
  CHECK(mid.status == 200);
  REQUIRE(mid.headers.size() == 1);
  CHECK(json::parse(mid.headers[0].second)["style"]["point"] == json{0.0, 0.0});
  const auto mesh = decode_mesh_blob(std::span(reinterpret_cast<const std::uint8_t*>(mid.body.data()), mid.body.size()));
  for (const auto& t : mesh.triangles)
    for (auto i : t) CHECK(i < mesh.vertices.size());
}

TEST_CASE("OBJ fallback carries the same mesh") {
  const auto svc = make_service();
  const auto body = detailize_body("box", {{"id", "smooth"}});
  const auto blob = svc.handle("POST", "/api/detailize", body);
  const auto obj = svc.handle("POST", "/api/detailize", body, "model/obj");
  CHECK(obj.content_type == "text/plain");
  std::istringstream in(obj.body);
  const auto a = read_obj(in);
  const auto b = decode_mesh_blob(std::span(reinterpret_cast<const std::uint8_t*>(blob.body.data()), blob.body.size()));
  CHECK(a == b);
}

TEST_CASE("error codes") {
  ServiceOptions small;
  small.max_dim = 12;
  small.max_body = 256;
  const auto svc = make_service(small);
  const auto status = [&](const std::string& body) { return svc.handle("POST", "/api/detailize", body).status; };
  CHECK(status(detailize_body("nope", {{"id", "smooth"}})) == 404);
  CHECK(status(detailize_body("box", {{"id", "nope"}})) == 404);
  CHECK(status("{not json") == 400);
  CHECK(status("[1, 2]") == 400);
  CHECK(status(json{{"style", {{"id", "smooth"}}}}.dump()) == 400);
  CHECK(status(json{{"content_id", 3}, {"style", {{"id", "smooth"}}}}.dump()) == 400);
  CHECK(status(detailize_body("box", {{"point", {1.0}}})) == 400);
  CHECK(status(detailize_body("box", {{"point", {1.0, "a"}}})) == 400);
  CHECK(status(detailize_body("box", {{"id", "smooth"}, {"point", {0, 0}}})) == 400);
  CHECK(status(detailize_body("box", {{"id", "smooth"}}, "blur")) == 400);
  CHECK(status(detailize_body("box", {{"id", "smooth"}})) == 413);  // 16^3 content over a 12 limit
  CHECK(status(std::string(300, ' ')) == 413);
  const auto err = json::parse(svc.handle("POST", "/api/detailize", "{not json").body);
  CHECK(err.contains("error"));
}

TEST_CASE("HTTP server: concurrent requests equal serial results") {
  ad::set_kernel_threads(1);
  const auto svc = make_service();
  std::vector<std::string> bodies;
  for (const char* c : {"box", "ell"})
    for (const auto& id : svc.embedding().ids) bodies.push_back(detailize_body(c, {{"id", id}}));
  bodies.push_back(detailize_body("ell", {{"point", {0.001, -0.002}}}, "components"));
  std::vector<std::string> serial;
  for (const auto& b : bodies) serial.push_back(svc.handle("POST", "/api/detailize", b).body);

  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  std::thread loop([&] { server.listen(); });
  {
    httplib::Client probe("127.0.0.1", port);
    for (int tries = 0; tries < 100 && !probe.Get("/api/health"); ++tries)
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }

  std::vector<std::future<std::pair<int, std::string>>> futures;
  for (const auto& b : bodies) {
    futures.push_back(std::async(std::launch::async, [&, b] {
      httplib::Client cli("127.0.0.1", port);
      cli.set_read_timeout(120, 0);
      auto res = cli.Post("/api/detailize", b, "application/json");
      return res ? std::pair{res->status, res->body} : std::pair{-1, std::string()};
    }));
  }
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const auto [code, body] = futures[i].get();
    CHECK(code == 200);
    CHECK(body == serial[i]);
  }

  httplib::Client cli("127.0.0.1", port);
  auto res = cli.Post("/api/detailize", detailize_body("missing", {{"id", "smooth"}}), "application/json");
  REQUIRE(res);
  CHECK(res->status == 404);
  res = cli.Post("/api/detailize", "{", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  res = cli.Post("/api/detailize", std::string(svc.options().max_body + 10, 'x'), "application/json");
  REQUIRE(res);
  CHECK(res->status == 413);
  res = cli.Get("/api/health");
  REQUIRE(res);
  CHECK(res->status == 200);

  server.stop();
  loop.join();
}
