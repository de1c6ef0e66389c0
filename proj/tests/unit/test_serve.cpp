#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "httplib.h"
#include "sentinel/serve.hpp"
#include "test_util.hpp"

using namespace sentinel;

namespace {

ServeConfig serve_config(const std::string& fixture, int tick_ms) {
  ServeConfig cfg;
  cfg.run.scenario_path = (testutil::kScenarios / fixture).string();
  cfg.run.out_dir = testutil::temp_dir("serve_" + fixture).string();
  cfg.port = 0;
  cfg.tick_ms = tick_ms;
  return cfg;
}

json get_json(httplib::Client& c, const std::string& path, int* status = nullptr) {
  auto res = c.Get(path);
  if (!res) return nullptr;
  if (status) *status = res->status;
  return json::parse(res->body);
}

template <class Pred>
bool wait_for(Pred pred, int timeout_ms) {
  const auto end = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  while (std::chrono::steady_clock::now() < end) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return pred();
}

}  // namespace

TEST(Serve, StateQueryAndThreshold) {
  SessionHost host(serve_config("straight_road_clear.json", 20));
  const int port = host.start();
  httplib::Client c("127.0.0.1", port);

  int status = 0;
  const json st = get_json(c, "/v1/state", &status);
  EXPECT_EQ(status, 200);
  EXPECT_TRUE(st.contains("threshold"));

  auto bad = c.Post("/v1/query", R"({"text": "  "})", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(c.Post("/v1/query", "not json", "application/json")->status, 400);
  auto ok = c.Post("/v1/query", R"({"text": "Is it safe to overtake?"})", "application/json");
  EXPECT_EQ(ok->status, 202);

  EXPECT_EQ(c.Post("/v1/threshold", R"({"value": 1.5})", "application/json")->status, 400);
  EXPECT_EQ(c.Post("/v1/threshold", R"({"value": 0.45})", "application/json")->status, 200);
  EXPECT_TRUE(wait_for([&] { return get_json(c, "/v1/state").at("threshold") == 0.45; }, 3000));

  EXPECT_TRUE(wait_for([&] { return get_json(c, "/v1/bev", &status), status == 200; }, 5000));
  const json bev = get_json(c, "/v1/bev");
  EXPECT_TRUE(bev.contains("grid"));
  host.stop();
}

TEST(Serve, StreamAndReportAfterFinish) {
  SessionHost host(serve_config("noiseless_crossing.json", 0));
  const int port = host.start();
  ASSERT_TRUE(wait_for([&] { return host.finished(); }, 60000));
  httplib::Client c("127.0.0.1", port);

  const json rep = get_json(c, "/v1/report");
  EXPECT_EQ(rep.at("finished"), true);
  EXPECT_EQ(rep.at("scenario_id"), "noiseless_crossing");
  EXPECT_EQ(rep.at("missions").size(), 8u);

  EXPECT_EQ(c.Post("/v1/query", R"({"text": "still there?"})", "application/json")->status, 409);

  auto s = c.Get("/v1/stream?from=20");
  ASSERT_TRUE(s);
  EXPECT_EQ(s->status, 200);
  EXPECT_NE(s->body.find("event: frame"), std::string::npos);
  EXPECT_NE(s->body.find("event: end"), std::string::npos);
  EXPECT_EQ(s->body.find("id: 19\n"), std::string::npos);
  EXPECT_EQ(c.Get("/v1/stream?from=abc")->status, 400);
  host.stop();
}

TEST(Serve, NoBevBeforeFirstGrid) {
  SessionHost host(serve_config("straight_road_clear.json", 100000));
  const int port = host.start();
  httplib::Client c("127.0.0.1", port);
  int status = 0;
  get_json(c, "/v1/bev", &status);
  EXPECT_EQ(status, 404);
  host.stop();
}
