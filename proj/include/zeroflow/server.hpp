#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "zeroflow/checkpoint.hpp"

namespace zf {

struct HttpReply {
  int status = 200;
  std::string body;
};

/// Read-only request handling over a loaded checkpoint. Independent of the
/// HTTP transport so handlers can be exercised directly.
class ServerState {
 public:
  explicit ServerState(Checkpoint ckpt);

  const Checkpoint& checkpoint() const { return ckpt_; }
  /// {"d", "mask_kind", "trained_on", "feature_names" (or null), "train_config"}.
  const nlohmann::json& model_info() const { return info_; }

  HttpReply model() const;
  /// {"mask": [0/1 x d], "rule": {"threshold": x} | {"topk": k}}.
  HttpReply blanket(std::string_view body) const;
  /// {"start": i, "length": n, "topk": k}: the contiguous window mask.
  HttpReply window(std::string_view body) const;

 private:
  Checkpoint ckpt_;
  nlohmann::json info_;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> ui_dir;
  std::size_t max_body_bytes = 1 << 20;
};

/// Splits "host:port"; throws ParameterError on malformed input.
std::pair<std::string, int> parse_addr(std::string_view addr);

/// HTTP front end for ServerState.
class BlanketServer {
 public:
  BlanketServer(Checkpoint ckpt, ServeOptions options);
  ~BlanketServer();
  BlanketServer(const BlanketServer&) = delete;
  BlanketServer& operator=(const BlanketServer&) = delete;

  /// Binds the socket and returns the port. Throws Error if binding fails.
  int bind();
  /// Serves until stop(); call after bind().
  void listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace zf
