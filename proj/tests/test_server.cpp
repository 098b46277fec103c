#include <cmath>
#include <string>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "test_util.hpp"
#include "zeroflow/blanket.hpp"
#include "zeroflow/dataset_io.hpp"
#include "zeroflow/errors.hpp"
#include "zeroflow/rng.hpp"
#include "zeroflow/server.hpp"

using namespace zf;
using nlohmann::json;

namespace {

Checkpoint random_checkpoint(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Tensor logits({d, d});
  for (double& v : logits.storage()) v = 2.0 * rng.normal();
  Checkpoint c = test::designed_checkpoint(logits, seed);
  c.meta.trained_on = "synthetic";
  return c;
}

json one_hot(std::size_t d, std::size_t i) {
  json m = json::array();
  for (std::size_t j = 0; j < d; ++j) m.push_back(j == i ? 1 : 0);
  return m;
}

// Runs a BlanketServer on an ephemeral port for the lifetime of the object.
class LiveServer {
 public:
  explicit LiveServer(Checkpoint ckpt, ServeOptions opts = {}) {
    opts.port = 0;
    server_ = std::make_unique<BlanketServer>(std::move(ckpt), std::move(opts));
    port_ = server_->bind();
    thread_ = std::thread([this] { server_->listen(); });
    for (int i = 0; i < 200 && !server_->running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ~LiveServer() {
    server_->stop();
    thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

 private:
  std::unique_ptr<BlanketServer> server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(ServerState, ModelInfo) {
  Checkpoint c = random_checkpoint(5, 1);
  c.meta.feature_names = std::vector<std::string>{"a", "b", "c", "d", "e"};
  const ServerState s(c);
  const HttpReply r = s.model();
  EXPECT_EQ(r.status, 200);
  const json j = json::parse(r.body);
  EXPECT_EQ(j.at("d"), 5);
  EXPECT_EQ(j.at("mask_kind"), "one-hot");
  EXPECT_EQ(j.at("feature_names").size(), 5u);
  EXPECT_EQ(j.at("train_config"), to_json(c.train_config));
  EXPECT_EQ(s.model().body, r.body);

  EXPECT_TRUE(json::parse(ServerState(random_checkpoint(3, 1)).model().body).at("feature_names").is_null());
}

TEST(ServerState, BlanketDelegatesToQuery) {
  const Checkpoint c = random_checkpoint(6, 2);
  const ServerState s(c);
  const json req{{"mask", one_hot(6, 0)}, {"rule", {{"threshold", 0.1}}}};
  const HttpReply r = s.blanket(req.dump());
  ASSERT_EQ(r.status, 200) << r.body;
  const BlanketResult direct = query_blanket(c, Tensor::vector({1, 0, 0, 0, 0, 0}), ThresholdRule{0.1});
  EXPECT_EQ(r.body, to_json(direct).dump());
  const json j = json::parse(r.body);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(j.at("gates")[i].get<double>(), direct.gates[i]);  // bit-exact
  EXPECT_EQ(s.blanket(req.dump()).body, r.body);
}

TEST(ServerState, BadRequestsAre400) {
  const ServerState s(random_checkpoint(4, 3));
  const auto status = [&](const json& body) { return s.blanket(body.dump()).status; };
  EXPECT_EQ(status({{"mask", {1, 1, 1, 1}}, {"rule", {{"threshold", 0.1}}}}), 400);
  EXPECT_EQ(status({{"mask", {0, 0, 0, 0}}, {"rule", {{"threshold", 0.1}}}}), 400);
  EXPECT_EQ(status({{"mask", {1, 0, 0}}, {"rule", {{"threshold", 0.1}}}}), 400);
  EXPECT_EQ(status({{"mask", {1, 0, 2, 0}}, {"rule", {{"threshold", 0.1}}}}), 400);
  EXPECT_EQ(status({{"mask", {1, 0, 0, 0}}, {"rule", {{"median", 1}}}}), 400);
  EXPECT_EQ(status({{"mask", {1, 0, 0, 0}}}), 400);
  EXPECT_EQ(s.blanket("{not json").status, 400);
  const HttpReply r = s.blanket(json{{"mask", {1, 1, 1, 1}}, {"rule", {{"topk", 2}}}}.dump());
  EXPECT_TRUE(json::parse(r.body).contains("error"));

  EXPECT_EQ(s.window(json{{"start", 0}, {"length", 4}, {"topk", 2}}.dump()).status, 400);
  EXPECT_EQ(s.window(json{{"start", 3}, {"length", 2}, {"topk", 2}}.dump()).status, 400);
  EXPECT_EQ(s.window(json{{"start", -1}, {"length", 2}, {"topk", 2}}.dump()).status, 400);
  EXPECT_EQ(s.window(json{{"start", 0}, {"length", 2}, {"topk", 0}}.dump()).status, 400);
  EXPECT_EQ(s.window(json{{"start", 0}, {"length", 2}}.dump()).status, 400);
}

TEST(ServerState, WindowEqualsExplicitMask) {
  const ServerState s(random_checkpoint(20, 4));
  const HttpReply w = s.window(json{{"start", 7}, {"length", 5}, {"topk", 6}}.dump());
  ASSERT_EQ(w.status, 200) << w.body;
  json mask = json::array();
  for (int j = 0; j < 20; ++j) mask.push_back(j >= 7 && j < 12 ? 1 : 0);
  const HttpReply b = s.blanket(json{{"mask", mask}, {"rule", {{"topk", 6}}}}.dump());
  EXPECT_EQ(w.body, b.body);
  EXPECT_EQ(json::parse(w.body).at("selected").size(), 6u);
}

TEST(ServeAddr, Parse) {
  EXPECT_EQ(parse_addr("127.0.0.1:8080"), (std::pair<std::string, int>{"127.0.0.1", 8080}));
  EXPECT_EQ(parse_addr("0.0.0.0:0").second, 0);
  EXPECT_THROW(parse_addr("localhost"), ParameterError);
  EXPECT_THROW(parse_addr("host:99999"), ParameterError);
  EXPECT_THROW(parse_addr("host:12ab"), ParameterError);
  EXPECT_THROW(parse_addr(":80"), ParameterError);
}

TEST(Http, EndpointsOverLoopback) {
  const Checkpoint c = random_checkpoint(8, 5);
  LiveServer live(c);
  httplib::Client cli = live.client();

  const auto model = cli.Get("/api/model");
  ASSERT_TRUE(model);
  EXPECT_EQ(model->status, 200);
  EXPECT_EQ(model->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(json::parse(model->body).at("d"), 8);

  const std::string body = json{{"mask", one_hot(8, 3)}, {"rule", {{"topk", 3}}}}.dump();
  const auto first = cli.Post("/api/blanket", body, "application/json");
  const auto second = cli.Post("/api/blanket", body, "application/json");
  ASSERT_TRUE(first && second);
  EXPECT_EQ(first->status, 200);
  EXPECT_EQ(first->body, second->body);
  EXPECT_EQ(first->body, ServerState(c).blanket(body).body);
  EXPECT_EQ(first->get_header_value("Content-Type"), "application/json");

  const auto bad = cli.Post("/api/blanket", json{{"mask", json::array({1, 1, 1, 1, 1, 1, 1, 1})}, {"rule", {{"topk", 3}}}}.dump(),
                            "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  const auto win = cli.Post("/api/window", json{{"start", 2}, {"length", 3}, {"topk", 4}}.dump(), "application/json");
  ASSERT_TRUE(win);
  EXPECT_EQ(win->status, 200);

  const auto pre = cli.Options("/api/blanket");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
}

TEST(Http, OversizedBodyIs413) {
  ServeOptions opts;
  opts.max_body_bytes = 256;
  LiveServer live(random_checkpoint(4, 6), opts);
  httplib::Client cli = live.client();
  const std::string big(4096, ' ');
  const auto res = cli.Post("/api/blanket", big, "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 413);
}

TEST(Http, ConcurrentRequestsMatchSerial) {
  const Checkpoint c = random_checkpoint(10, 7);
  const ServerState serial(c);
  LiveServer live(c);
  std::vector<std::thread> threads;
  std::vector<int> ok(8, 0);
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      httplib::Client cli = live.client();
      bool all = true;
      for (int k = 0; k < 10; ++k) {
        const std::string body = json{{"mask", one_hot(10, (t + k) % 10)}, {"rule", {{"threshold", 0.2}}}}.dump();
        const auto res = cli.Post("/api/blanket", body, "application/json");
        all = all && res && res->body == serial.blanket(body).body;
      }
      ok[t] = all;
    });
  }
  for (auto& th : threads) th.join();
  for (int v : ok) EXPECT_EQ(v, 1);
}

TEST(Http, ServesUiDirectory) {
  test::TempDir dir;
  write_text_file(dir / "index.html", "<html>ui</html>");
  ServeOptions opts;
  opts.ui_dir = dir.path();
  LiveServer live(random_checkpoint(3, 8), opts);
  httplib::Client cli = live.client();
  const auto res = cli.Get("/index.html");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, "<html>ui</html>");

  ServeOptions missing;
  missing.ui_dir = dir / "nope";
  EXPECT_THROW(BlanketServer(random_checkpoint(3, 8), missing), ParameterError);
}
