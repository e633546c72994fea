// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "fixtures.hpp"
#include "splitaudit/http.hpp"

namespace splitaudit::service {
namespace {

class HttpServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(501);
    auto d = std::make_shared<const Dataset>(fixtures::random_dataset(rng));
    service_ = std::make_unique<Service>(d, fixtures::random_assignment(rng, *d, false));
    bind_routes(server_, *service_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void TearDown() override {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  httplib::Client client() { return httplib::Client("127.0.0.1", port_); }

  httplib::Server server_;
  std::unique_ptr<Service> service_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpServiceTest, JsonRoundTrip) {
  auto c = client();
  auto res = c.Get("/api/viewmodel");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
  const auto vm = json::parse(res->body);
  EXPECT_EQ(vm["schema_version"], 1);

  res = c.Post("/api/filter", R"({"phases":["P1"]})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["filter_state"]["phases"], json::array({"P1"}));

  res = c.Delete("/api/filter");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body).dump(), vm.dump());
}

TEST_F(HttpServiceTest, ErrorsCarryViolations) {
  auto c = client();
  auto res = c.Put("/api/split", R"({"train":["nobody"],"test":[]})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  const auto body = json::parse(res->body);
  ASSERT_TRUE(body.contains("violations"));
  EXPECT_FALSE(body["violations"].empty());
  res = c.Get("/api/unknown");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
}

TEST_F(HttpServiceTest, SessionTokenHeader) {
  auto c = client();
  const auto id = json::parse(c.Get("/api/split")->body)["train"][0].get<std::string>();
  httplib::Headers mine{{"X-Session-Token", "mine"}};
  auto res = c.Post("/api/split/reassign", mine, json{{"surgery_id", id}, {"set", "test"}}.dump(), "application/json");
  ASSERT_TRUE(res);
  if (res->status == 200) {
    EXPECT_EQ(json::parse(c.Get("/api/split", mine)->body)["train"].size() + 1,
              json::parse(c.Get("/api/split")->body)["train"].size());
  } else {
    EXPECT_EQ(res->status, 400);  // moving the only train surgery
  }
}

}  // namespace
}  // namespace splitaudit::service
