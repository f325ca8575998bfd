/*
 * Copyright 2026 The RGG Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <fstream>

#include <gtest/gtest.h>
#include <httplib.h>

#include "fixtures.hpp"
#include "rgg/review_http.hpp"

namespace rgg {
namespace {

using nlohmann::json;

constexpr const char* kToken = "s3cret-admin";

SystemRun make_run(const std::string& system, std::size_t n) {
  SystemRun run{system, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = "rec-" + std::to_string(1000 + i);
    run.captions[id] = "Caption " + std::to_string(i) + " written by one of the systems.";
  }
  return run;
}

json judgment_body(const std::string& case_id, const std::string& reviewer,
                   const std::string& slot, int rating = 4) {
  json ratings;
  for (auto c : kReviewCriteria) ratings[std::string(c)] = rating;
  return {{"case_id", case_id}, {"reviewer_id", reviewer}, {"preferred_slot", slot},
          {"ratings", ratings}, {"comment", ""}};
}

class ReviewHttp : public ::testing::Test {
 protected:
  void SetUp() override {
    cases = sample_cases(make_run("uni2-secret", 40), make_run("conch-secret", 40), 10, 77);
    launch();
  }
  void launch(std::filesystem::path static_dir = {}) {
    server = std::make_unique<ReviewServer>(
        cases, ReviewServiceOptions{state.path(), kToken, std::move(static_dir)});
    port = server->bind("127.0.0.1", 0);
    server->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  void restart(std::filesystem::path static_dir = {}) {
    client.reset();
    server.reset();
    launch(std::move(static_dir));
  }
  httplib::Result post(const std::string& path, const json& body,
                       const httplib::Headers& headers = {}) {
    return client->Post(path, headers, body.dump(), "application/json");
  }

  testing::TempDir state;
  std::vector<ReviewCase> cases;
  std::unique_ptr<ReviewServer> server;
  std::unique_ptr<httplib::Client> client;
  int port = 0;
};

TEST_F(ReviewHttp, Health) {
  auto res = client->Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["status"], "ok");
}

TEST_F(ReviewHttp, CaseListIsBlinded) {
  auto res = client->Get("/review/cases?reviewer=r1");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body.find("secret"), std::string::npos);
  EXPECT_EQ(res->body.find("blind_map"), std::string::npos);
  EXPECT_EQ(res->body.find("rec-"), std::string::npos);  // no query ref either
  const auto body = json::parse(res->body);
  ASSERT_EQ(body["cases"].size(), 10u);
  EXPECT_EQ(body["cases"][0]["case_id"], "case-001");
  EXPECT_EQ(body["cases"][0]["judged"], false);
  EXPECT_EQ(body["progress"], (json{{"judged", 0}, {"total", 10}}));

  for (const auto& c : cases) {
    auto one = client->Get("/review/cases/" + c.case_id);
    ASSERT_TRUE(one);
    EXPECT_EQ(one->status, 200);
    EXPECT_EQ(one->body.find("secret"), std::string::npos);
    EXPECT_EQ(json::parse(one->body)["slot_a"], c.slot_a);
  }
}

TEST_F(ReviewHttp, UnknownCaseIs404) {
  auto res = client->Get("/review/cases/case-999");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["error"]["code"], "unknown_case");

  auto post_res = post("/review/judgments", judgment_body("case-999", "r1", "a"));
  ASSERT_TRUE(post_res);
  EXPECT_EQ(post_res->status, 404);
  EXPECT_EQ(json::parse(post_res->body)["error"]["code"], "unknown_case");
}

TEST_F(ReviewHttp, JudgmentValidation) {
  auto bad = client->Post("/review/judgments", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body)["error"]["code"], "invalid_body");

  auto body = judgment_body("case-001", "r1", "a");
  body["ratings"].erase("clinical_plausibility");
  auto missing = post("/review/judgments", body);
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 400);
  const auto err = json::parse(missing->body)["error"];
  EXPECT_EQ(err["code"], "incomplete_ratings");
  EXPECT_NE(err["message"].get<std::string>().find("clinical_plausibility"), std::string::npos);

  auto out_of_range = post("/review/judgments", judgment_body("case-001", "r1", "a", 9));
  EXPECT_EQ(json::parse(out_of_range->body)["error"]["code"], "invalid_rating");
  auto bad_slot = post("/review/judgments", judgment_body("case-001", "r1", "left"));
  EXPECT_EQ(json::parse(bad_slot->body)["error"]["code"], "invalid_preference");
  EXPECT_TRUE(server->store().all_current().empty());
}

TEST_F(ReviewHttp, AcknowledgesAndTracksProgress) {
  auto body = judgment_body("case-002", "r1", "b");
  body["version"] = 42;  // client-supplied metadata is ignored
  body["submitted_at"] = "1999-01-01T00:00:00Z";
  auto res = post("/review/judgments", body);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto ack = json::parse(res->body);
  EXPECT_EQ(ack["status"], "ok");
  EXPECT_EQ(ack["case_id"], "case-002");
  EXPECT_EQ(ack["version"], 1);
  EXPECT_EQ(ack["duplicate"], false);
  EXPECT_NE(ack["submitted_at"], "1999-01-01T00:00:00Z");

  const auto list = json::parse(client->Get("/review/cases?reviewer=r1")->body);
  EXPECT_EQ(list["progress"]["judged"], 1);
  EXPECT_EQ(list["cases"][1]["judged"], true);
  const auto other = json::parse(client->Get("/review/cases?reviewer=r2")->body);
  EXPECT_EQ(other["progress"]["judged"], 0);
}

TEST_F(ReviewHttp, DoubleSubmitStoresOnce) {
  const auto body = judgment_body("case-003", "r1", "neither", 2);
  auto first = post("/review/judgments", body);
  auto second = post("/review/judgments", body);
  ASSERT_TRUE(first && second);
  EXPECT_EQ(json::parse(second->body)["duplicate"], true);
  EXPECT_EQ(json::parse(second->body)["version"], 1);
  EXPECT_EQ(server->store().audit_trail("case-003", "r1").size(), 1u);

  auto revised = post("/review/judgments", judgment_body("case-003", "r1", "a", 2));
  EXPECT_EQ(json::parse(revised->body)["version"], 2);
  EXPECT_EQ(server->store().audit_trail("case-003", "r1").size(), 2u);
}

TEST_F(ReviewHttp, UnblindRequiresTokenAndIsLogged) {
  post("/review/judgments", judgment_body("case-001", "r1", "a"));
  post("/review/judgments", judgment_body("case-002", "r1", "b"));

  auto anon = client->Post("/review/unblind", "", "application/json");
  ASSERT_TRUE(anon);
  EXPECT_EQ(anon->status, 401);
  EXPECT_EQ(anon->body.find("secret"), std::string::npos);
  auto wrong = post("/review/unblind", json::object(), {{"Authorization", "Bearer nope"}});
  EXPECT_EQ(wrong->status, 401);
  EXPECT_FALSE(std::filesystem::exists(state / "unblind.log"));

  auto ok = post("/review/unblind", json::object(),
                 {{"Authorization", std::string("Bearer ") + kToken}});
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 200);
  const auto report = json::parse(ok->body);
  EXPECT_EQ(report["n_cases"], 10);
  // Oracle: resolve each preferred slot through the sealed map by hand.
  std::map<std::string, int> want{{"conch-secret", 0}, {"uni2-secret", 0}};
  ++want[cases[0].blind_map[0]];
  ++want[cases[1].blind_map[1]];
  EXPECT_EQ(report["overall"]["preferences"], json(want));
  EXPECT_EQ(report["overall"]["pending"].size(), 8u);

  std::ifstream log(state / "unblind.log");
  std::string line;
  ASSERT_TRUE(std::getline(log, line));
  EXPECT_NE(line.find("unblind"), std::string::npos);
}

TEST_F(ReviewHttp, JudgmentsSurviveRestart) {
  post("/review/judgments", judgment_body("case-004", "r7", "a", 5));
  restart();
  const auto list = json::parse(client->Get("/review/cases?reviewer=r7")->body);
  EXPECT_EQ(list["progress"]["judged"], 1);
  EXPECT_EQ(server->store().current("case-004", "r7")->ratings.at("clinical_plausibility"), 5);
  auto dup = post("/review/judgments", judgment_body("case-004", "r7", "a", 5));
  EXPECT_EQ(json::parse(dup->body)["duplicate"], true);
}

TEST_F(ReviewHttp, ServesStaticUi) {
  testing::TempDir ui;
  testing::write_text(ui / "index.html", "<!doctype html><title>review</title>");
  restart(ui.path());
  auto res = client->Get("/index.html");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_NE(res->body.find("<title>review</title>"), std::string::npos);
  EXPECT_EQ(client->Get("/review/cases")->status, 200);  // API still routed
}

TEST(ReviewHttpSetup, MissingStaticDirAndBusyPort) {
  testing::TempDir state;
  const auto cases = sample_cases(make_run("x", 3), make_run("y", 3), 2, 1);
  EXPECT_THROW(ReviewServer(cases, {state.path(), kToken, state / "no-such-dir"}), IoError);

  ReviewServer first(cases, {state / "a", kToken, {}});
  const int port = first.bind("127.0.0.1", 0);
  ReviewServer second(cases, {state / "b", kToken, {}});
  EXPECT_THROW(second.bind("127.0.0.1", port), IoError);
}

}  // namespace
}  // namespace rgg
