#include "decor/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "decor/errors.hpp"
#include "decor/mesh.hpp"
#include "decor/voxel_io.hpp"

namespace decor {
namespace {

using nlohmann::json;

HttpResult json_result(int status, const json& j) { return {status, "application/json", j.dump(), {}}; }
HttpResult error_result(int status, const std::string& message) { return json_result(status, {{"error", message}}); }

struct BadRequest {
  std::string message;
};

}  // namespace

StyleService::StyleService(DecorModel model, StyleEmbedding embedding, std::vector<NamedGrid> contents,
                           ServiceOptions options)
    : model_(std::move(model)), embedding_(std::move(embedding)), options_(options) {
  if (embedding_.ids.size() != embedding_.codes.size() || embedding_.ids.empty()) {
    throw ConfigError("style embedding has no styles");
  }
  for (auto& c : contents) {
    if (!contents_.emplace(c.id, c.grid.threshold()).second) throw ConfigError("duplicate content id '" + c.id + "'");
  }
}

StyleService StyleService::from_files(const std::filesystem::path& checkpoint, const std::filesystem::path& contents_dir,
                                      const std::filesystem::path& embedding_json, ServiceOptions options) {
  auto model = DecorModel::load(checkpoint);
  StyleEmbedding emb;
  if (embedding_json.empty()) {
    emb = embedding_from_model(model);
  } else {
    std::ifstream in(embedding_json);
    if (!in) throw IoError("cannot open " + embedding_json.string());
    std::stringstream ss;
    ss << in.rdbuf();
    emb = StyleEmbedding::from_json(ss.str());
  }
  return StyleService(std::move(model), std::move(emb), read_grid_dir(contents_dir), options);
}

HttpResult StyleService::handle(const std::string& method, const std::string& path, const std::string& body,
                                const std::string& accept) const {
  const bool get = method == "GET", post = method == "POST";
  if (path == "/api/health" && get) return json_result(200, {{"status", "ok"}});
  if (path == "/api/styles" && get) {
    json arr = json::array();
    for (std::size_t i = 0; i < embedding_.ids.size(); ++i) arr.push_back({{"id", embedding_.ids[i]}, {"point", embedding_.points[i]}});
    return json_result(200, arr);
  }
  if (path == "/api/embedding" && get) return {200, "application/json", embedding_.to_json(), {}};
  if (path == "/api/contents" && get) {
    json arr = json::array();
    for (const auto& [id, g] : contents_) arr.push_back({{"id", id}, {"dims", {g.dims().x, g.dims().y, g.dims().z}}});
    return json_result(200, arr);
  }
  if (path == "/api/detailize" && post) return detailize_request(body, accept);
  if (path == "/api/health" || path == "/api/styles" || path == "/api/embedding" || path == "/api/contents" ||
      path == "/api/detailize") {
    return error_result(405, "method not allowed");
  }
  return error_result(404, "no route " + path);
}

HttpResult StyleService::detailize_request(const std::string& body, const std::string& accept) const {
  if (body.size() > options_.max_body) return error_result(413, "request body too large");
  std::vector<float> code;
  const VoxelGrid* content = nullptr;
  DetailizeOptions opt;
  opt.symmetric = options_.symmetric;
  json echo;
  try {
    const json req = json::parse(body);
    if (!req.is_object()) throw BadRequest{"body must be a JSON object"};
    if (!req.contains("content_id") || !req["content_id"].is_string()) throw BadRequest{"content_id must be a string"};
    if (!req.contains("style") || !req["style"].is_object()) throw BadRequest{"style must be an object"};
    const auto& style = req["style"];
    const bool by_id = style.contains("id"), by_point = style.contains("point");
    if (by_id == by_point) throw BadRequest{"style needs exactly one of id or point"};
    if (req.contains("postprocess")) {
      if (!req["postprocess"].is_string()) throw BadRequest{"postprocess must be a string"};
      try {
        opt.postprocess = parse_postprocess(req["postprocess"].get<std::string>());
      } catch (const ParameterError& e) {
        throw BadRequest{e.what()};
      }
    }
    if (req.contains("mask")) {
      if (!req["mask"].is_string()) throw BadRequest{"mask must be a string"};
      try {
        opt.mask = parse_gen_mask_mode(req["mask"].get<std::string>());
      } catch (const Error& e) {
        throw BadRequest{e.what()};
      }
    }

    const auto id = req["content_id"].get<std::string>();
    const auto it = contents_.find(id);
    if (it == contents_.end()) return error_result(404, "unknown content_id '" + id + "'");
    content = &it->second;

    echo = {{"content_id", id}, {"postprocess", to_string(opt.postprocess)}, {"mask", to_string(opt.mask)}};
    if (by_id) {
      if (!style["id"].is_string()) throw BadRequest{"style.id must be a string"};
      const auto sid = style["id"].get<std::string>();
      const auto pos = std::find(embedding_.ids.begin(), embedding_.ids.end(), sid);
      if (pos == embedding_.ids.end()) return error_result(404, "unknown style id '" + sid + "'");
      code = embedding_.codes[pos - embedding_.ids.begin()];
      echo["style"] = {{"id", sid}};
    } else {
      const auto& p = style["point"];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw BadRequest{"style.point must be [x, y]"};
      }
      const Vec2 q{p[0].get<double>(), p[1].get<double>()};
      if (!std::isfinite(q[0]) || !std::isfinite(q[1])) throw BadRequest{"style.point must be finite"};
      code = interpolate_code(embedding_, q);
      echo["style"] = {{"point", q}};
    }
  } catch (const json::exception& e) {
    return error_result(400, std::string("malformed request: ") + e.what());
  } catch (const BadRequest& e) {
    return error_result(400, e.message);
  }

  const auto& d = content->dims();
  if (d.x > options_.max_dim || d.y > options_.max_dim || d.z > options_.max_dim) {
    return error_result(413, "content " + to_string(d) + " exceeds the " + std::to_string(options_.max_dim) +
                                 " voxel limit");
  }
  const auto out = detailize(model_.generator, *content, code, opt);
  const auto mesh = marching_cubes(mesh_field(out), 0.5);

  HttpResult r;
  r.headers.emplace_back("X-Decor-Request", echo.dump());
  if (accept.find("model/obj") != std::string::npos || accept.find("text/plain") != std::string::npos) {
    std::ostringstream s;
    write_obj(mesh, s);
    r.content_type = "text/plain";
    r.body = s.str();
  } else {
    const auto blob = encode_mesh_blob(mesh);
    r.content_type = "application/octet-stream";
    r.body.assign(blob.begin(), blob.end());
  }
  return r;
}

struct HttpServer::Impl {
  const StyleService& service;
  httplib::Server server;
};

HttpServer::HttpServer(const StyleService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  srv.set_payload_max_length(service.options().max_body);
  const auto route = [this](const httplib::Request& req, httplib::Response& res) {
    HttpResult r;
    try {
      r = impl_->service.handle(req.method, req.path, req.body, req.get_header_value("Accept"));
    } catch (const std::exception& e) {
      r = error_result(500, e.what());
    }
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, r.content_type);
  };
  srv.Get(R"(/api/.*)", route);
  srv.Post(R"(/api/.*)", route);
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const auto r = error_result(res.status, res.status == 413 ? "request body too large" : "request failed");
      res.set_content(r.body, r.content_type);
    }
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace decor
