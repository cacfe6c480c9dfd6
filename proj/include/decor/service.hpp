#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "decor/detailize.hpp"
#include "decor/models.hpp"
#include "decor/style_space.hpp"
#include "decor/trainer.hpp"

namespace decor {

struct ServiceOptions {
  int max_dim = 64;                    // largest content extent accepted by /api/detailize
  std::size_t max_body = 1 << 16;      // request bytes
  bool symmetric = false;
};

struct HttpResult {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
};

// Immutable after construction; handle() may run on any number of threads.
class StyleService {
 public:
  StyleService(DecorModel model, StyleEmbedding embedding, std::vector<NamedGrid> contents, ServiceOptions options = {});

  // Loads the checkpoint, builds the embedding from its codes (or reads
  // `embedding_json` when given) and the catalog from every shape file in
  // `contents_dir`.
  static StyleService from_files(const std::filesystem::path& checkpoint, const std::filesystem::path& contents_dir,
                                 const std::filesystem::path& embedding_json = {}, ServiceOptions options = {});

  // Routes: GET /api/health, /api/styles, /api/embedding, /api/contents and
  // POST /api/detailize. `accept` picks OBJ text over the binary mesh blob
  // when it names text/plain or model/obj.
  HttpResult handle(const std::string& method, const std::string& path, const std::string& body,
                    const std::string& accept = {}) const;

  const StyleEmbedding& embedding() const { return embedding_; }
  const ServiceOptions& options() const { return options_; }

 private:
  HttpResult detailize_request(const std::string& body, const std::string& accept) const;

  DecorModel model_;
  StyleEmbedding embedding_;
  std::map<std::string, VoxelGrid> contents_;
  ServiceOptions options_;
};

// cpp-httplib front end over a StyleService.
class HttpServer {
 public:
  explicit HttpServer(const StyleService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws IoError.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace decor
