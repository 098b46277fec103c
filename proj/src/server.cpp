#include "zeroflow/server.hpp"

#include <charconv>
#include <cstdint>

#include <httplib.h>

#include "zeroflow/blanket.hpp"
#include "zeroflow/errors.hpp"

namespace zf {

namespace {

HttpReply error_reply(int status, const std::string& reason) {
  return {status, nlohmann::json{{"error", reason}}.dump()};
}

nlohmann::json parse_body(std::string_view body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw ParameterError("request body is not valid JSON");
  if (!j.is_object()) throw ParameterError("request body must be a JSON object");
  return j;
}

std::int64_t int_field(const nlohmann::json& j, const char* name) {
  if (!j.contains(name)) throw ParameterError(std::string("missing field '") + name + "'");
  const auto& v = j.at(name);
  if (!v.is_number_integer()) throw ParameterError(std::string("field '") + name + "' must be an integer");
  return v.get<std::int64_t>();
}

HttpReply query_reply(const Checkpoint& ckpt, const Tensor& mask, const BlanketRule& rule) {
  return {200, to_json(query_blanket(ckpt, mask, rule)).dump()};
}

template <class F>
HttpReply guarded(F&& f) {
  try {
    return f();
  } catch (const ParameterError& e) {
    return error_reply(400, e.what());
  } catch (const ShapeError& e) {
    return error_reply(400, e.what());
  } catch (const std::exception& e) {
    return error_reply(500, e.what());
  }
}

}  // namespace

ServerState::ServerState(Checkpoint ckpt) : ckpt_(std::move(ckpt)) {
  info_ = {{"d", ckpt_.d},
           {"mask_kind", ckpt_.meta.mask_kind},
           {"trained_on", ckpt_.meta.trained_on},
           {"feature_names", nullptr},
           {"train_config", to_json(ckpt_.train_config)}};
  if (ckpt_.meta.feature_names) info_["feature_names"] = *ckpt_.meta.feature_names;
}

HttpReply ServerState::model() const { return {200, info_.dump()}; }

HttpReply ServerState::blanket(std::string_view body) const {
  return guarded([&] {
    const nlohmann::json j = parse_body(body);
    if (!j.contains("mask") || !j.at("mask").is_array()) throw ParameterError("field 'mask' must be an array");
    const auto& arr = j.at("mask");
    Tensor mask({arr.size()});
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number()) throw ParameterError("invalid mask: entry " + std::to_string(i) + " is not a number");
      mask[i] = arr[i].get<double>();
    }
    if (!j.contains("rule")) throw ParameterError("missing field 'rule'");
    return query_reply(ckpt_, mask, rule_from_json(j.at("rule")));
  });
}

HttpReply ServerState::window(std::string_view body) const {
  return guarded([&] {
    const nlohmann::json j = parse_body(body);
    const std::int64_t start = int_field(j, "start");
    const std::int64_t length = int_field(j, "length");
    const std::int64_t topk = int_field(j, "topk");
    const auto d = static_cast<std::int64_t>(ckpt_.d);
    if (start < 0 || length < 1 || start + length > d) {
      throw ParameterError("window out of range: start=" + std::to_string(start) + " length=" +
                           std::to_string(length) + " d=" + std::to_string(d));
    }
    if (topk < 1) throw ParameterError("invalid rule: topk must be a positive integer");
    const Tensor mask = window_mask(ckpt_.d, static_cast<std::size_t>(start), static_cast<std::size_t>(length));
    return query_reply(ckpt_, mask, TopKRule{static_cast<std::size_t>(topk)});
  });
}

std::pair<std::string, int> parse_addr(std::string_view addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw ParameterError("address must be host:port");
  int port = -1;
  const std::string_view p = addr.substr(colon + 1);
  const auto res = std::from_chars(p.data(), p.data() + p.size(), port);
  if (res.ec != std::errc() || res.ptr != p.data() + p.size() || port < 0 || port > 65535) {
    throw ParameterError("invalid port in address '" + std::string(addr) + "'");
  }
  return {std::string(addr.substr(0, colon)), port};
}

// ---------------------------------------------------------------------------

struct BlanketServer::Impl {
  ServerState state;
  ServeOptions options;
  httplib::Server http;

  Impl(Checkpoint ckpt, ServeOptions opts) : state(std::move(ckpt)), options(std::move(opts)) {}

  static void send(httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  }

  void routes() {
    http.set_payload_max_length(options.max_body_bytes);
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
    http.Get("/api/model", [this](const httplib::Request&, httplib::Response& res) { send(res, state.model()); });
    http.Post("/api/blanket",
              [this](const httplib::Request& req, httplib::Response& res) { send(res, state.blanket(req.body)); });
    http.Post("/api/window",
              [this](const httplib::Request& req, httplib::Response& res) { send(res, state.window(req.body)); });
    http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    if (options.ui_dir) {
      if (!http.set_mount_point("/", options.ui_dir->string())) {
        throw ParameterError("ui directory not found: " + options.ui_dir->string());
      }
    }
  }
};

BlanketServer::BlanketServer(Checkpoint ckpt, ServeOptions options)
    : impl_(std::make_unique<Impl>(std::move(ckpt), std::move(options))) {
  impl_->routes();
}

BlanketServer::~BlanketServer() { stop(); }

int BlanketServer::bind() {
  int port = impl_->options.port;
  if (port == 0) {
    port = impl_->http.bind_to_any_port(impl_->options.host);
  } else if (!impl_->http.bind_to_port(impl_->options.host, port)) {
    port = -1;
  }
  if (port < 0) {
    throw Error("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  }
  return port;
}

void BlanketServer::listen() { impl_->http.listen_after_bind(); }

void BlanketServer::stop() {
  if (impl_) impl_->http.stop();
}

bool BlanketServer::running() const { return impl_->http.is_running(); }

}  // namespace zf
