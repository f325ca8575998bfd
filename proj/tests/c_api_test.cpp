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

// Exercises the shared library through rgg.h only.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include "rgg/rgg.h"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Takes ownership of a library-allocated string.
json take_json(char* s) {
  EXPECT_NE(s, nullptr);
  if (s == nullptr) return nullptr;
  auto j = json::parse(s);
  rgg_string_free(s);
  return j;
}

class CApi : public ::testing::Test {
 protected:
  void SetUp() override {
    std::string tmpl = (fs::temp_directory_path() / "rgg-capi-XXXXXX").string();
    ASSERT_NE(mkdtemp(tmpl.data()), nullptr);
    dir = tmpl;
    // Six records on a circle: angle i * 30 degrees.
    std::ofstream manifest(dir / "manifest.jsonl");
    std::ofstream emb(dir / "bb.jsonl");
    for (int i = 0; i < 6; ++i) {
      const auto id = "r" + std::to_string(i);
      manifest << json{{"id", id},
                       {"image_uri", id + ".png"},
                       {"captions", {"Sample " + id + " shows tissue type " + std::to_string(i % 2) + "."}}}
                      .dump()
               << "\n";
      const double a = i * M_PI / 6;
      emb << json{{"id", id}, {"values", {std::cos(a), std::sin(a)}}}.dump() << "\n";
    }
  }
  void TearDown() override { fs::remove_all(dir); }

  json build() {
    const auto req = json{{"manifest", (dir / "manifest.jsonl").string()},
                          {"embeddings", {{"bb", (dir / "bb.jsonl").string()}}},
                          {"out", (dir / "atlas").string()}}
                         .dump();
    char* out = nullptr;
    EXPECT_EQ(rgg_build_atlas(req.c_str(), &out), RGG_OK) << rgg_last_error();
    return take_json(out);
  }

  fs::path dir;
};

TEST(CApiBasics, VersionAndStatusNames) {
  EXPECT_STRNE(rgg_version(), "");
  EXPECT_STREQ(rgg_status_name(RGG_OK), "ok");
  EXPECT_STRNE(rgg_status_name(RGG_ERR_NOT_FOUND), rgg_status_name(RGG_ERR_IO));
  rgg_string_free(nullptr);
}

TEST(CApiBasics, NullArgumentsAreRejected) {
  rgg_atlas* atlas = nullptr;
  EXPECT_EQ(rgg_atlas_load(nullptr, &atlas), RGG_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(rgg_atlas_load("x", nullptr), RGG_ERR_INVALID_ARGUMENT);
  EXPECT_STRNE(rgg_last_error(), "");
  char* out = nullptr;
  EXPECT_EQ(rgg_caption(nullptr, &out), RGG_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(rgg_caption("{not json", &out), RGG_ERR_VALIDATION);
  EXPECT_EQ(out, nullptr);
  EXPECT_EQ(rgg_atlas_size(nullptr), 0u);
  rgg_atlas_free(nullptr);
  rgg_index_free(nullptr);
  rgg_server_free(nullptr);
}

TEST(CApiBasics, LastErrorIsPerThread) {
  rgg_atlas* atlas = nullptr;
  EXPECT_EQ(rgg_atlas_load("/nonexistent/atlas", &atlas), RGG_ERR_IO);
  const std::string here = rgg_last_error();
  EXPECT_NE(here.find("/nonexistent/atlas"), std::string::npos) << here;
  std::string other;
  std::thread([&] { other = rgg_last_error(); }).join();
  EXPECT_EQ(other, "");
  EXPECT_EQ(std::string(rgg_last_error()), here);
}

TEST_F(CApi, AtlasAndIndexHandles) {
  const auto built = build();
  EXPECT_EQ(built["records"], 6);

  rgg_atlas* atlas = nullptr;
  ASSERT_EQ(rgg_atlas_load((dir / "atlas").c_str(), &atlas), RGG_OK) << rgg_last_error();
  EXPECT_EQ(rgg_atlas_size(atlas), 6u);
  char* issues = nullptr;
  ASSERT_EQ(rgg_atlas_validate(atlas, &issues), RGG_OK);
  EXPECT_TRUE(take_json(issues).empty());

  rgg_index* index = nullptr;
  EXPECT_EQ(rgg_index_build(atlas, "nope", &index), RGG_ERR_NOT_FOUND);
  ASSERT_EQ(rgg_index_build(atlas, "bb", &index), RGG_OK);
  EXPECT_EQ(rgg_index_size(index), 6u);
  EXPECT_EQ(rgg_index_dim(index), 2u);

  // Oracle: neighbors of r0 on the circle are r1 (30 deg) then r2 (60 deg).
  char* out = nullptr;
  ASSERT_EQ(rgg_index_query_id(index, "r0", 2, &out), RGG_OK);
  const auto by_id = take_json(out);
  EXPECT_EQ(by_id["neighbors"][0]["record_id"], "r1");
  EXPECT_NEAR(by_id["neighbors"][0]["similarity"].get<double>(), std::cos(M_PI / 6), 1e-6);
  EXPECT_EQ(by_id["neighbors"][1]["record_id"], "r2");
  EXPECT_EQ(by_id["excluded_ids"], json::array({"r0"}));

  const float q[2] = {0.0f, 1.0f};
  ASSERT_EQ(rgg_index_query_vector(index, q, 2, 1, &out), RGG_OK);
  const auto by_vec = take_json(out);
  EXPECT_EQ(by_vec["neighbors"][0]["record_id"], "r3");
  EXPECT_NEAR(by_vec["neighbors"][0]["similarity"].get<double>(), 1.0, 1e-6);

  EXPECT_EQ(rgg_index_query_vector(index, q, 1, 1, &out), RGG_ERR_VALIDATION);
  EXPECT_EQ(rgg_index_query_id(index, "r0", 0, &out), RGG_ERR_VALIDATION);
  EXPECT_EQ(rgg_index_query_id(index, "zz", 1, &out), RGG_ERR_NOT_FOUND);

  rgg_index_free(index);  // the index does not borrow from the atlas
  rgg_atlas_free(atlas);
}

TEST_F(CApi, CaptionEvaluateAndReview) {
  build();
  const auto config = json{{"atlas", (dir / "atlas").string()}, {"backbone", "bb"}, {"k", 2}};
  char* out = nullptr;
  ASSERT_EQ(rgg_caption(json{{"config", config}, {"record_id", "r0"}}.dump().c_str(), &out), RGG_OK)
      << rgg_last_error();
  const auto caption = take_json(out);
  EXPECT_EQ(caption["query_ref"], "r0");
  EXPECT_FALSE(caption["caption"].get<std::string>().empty());
  EXPECT_EQ(caption["provenance"]["source_ids"], json::array({"r1", "r2"}));

  auto missing = config;
  missing["backbone"] = "uni2";
  EXPECT_EQ(rgg_caption(json{{"config", missing}, {"record_id", "r0"}}.dump().c_str(), &out),
            RGG_ERR_NOT_FOUND);
  EXPECT_NE(std::string(rgg_last_error()).find("uni2"), std::string::npos);

  std::ofstream baseline(dir / "baseline.jsonl");
  for (int i = 0; i < 6; ++i) {
    baseline << json{{"query_ref", "r" + std::to_string(i)}, {"text", "Tissue."}}.dump() << "\n";
  }
  baseline.close();
  auto run_a = config;
  run_a["run_id"] = "k2";
  auto run_b = config;
  run_b["run_id"] = "k4";
  run_b["k"] = 4;
  const auto eval_req = json{{"configs", {run_a, run_b}},
                             {"baseline", (dir / "baseline.jsonl").string()},
                             {"resamples", 200},
                             {"out", (dir / "eval").string()}};
  ASSERT_EQ(rgg_evaluate(eval_req.dump().c_str(), &out), RGG_OK) << rgg_last_error();
  const auto eval = take_json(out);
  EXPECT_EQ(eval["summaries"].size(), 3u);
  EXPECT_EQ(eval["comparisons"].size(), 2u);

  auto mismatch = eval_req;
  mismatch["scorer"] = "mock-image";
  EXPECT_EQ(rgg_evaluate(mismatch.dump().c_str(), &out), RGG_ERR_VALIDATION);

  const auto sample_req = json{{"runs",
                                {{"k2", (dir / "eval" / "k2" / "captions.jsonl").string()},
                                 {"k4", (dir / "eval" / "k4" / "captions.jsonl").string()}}},
                               {"n", 4},
                               {"seed", 9},
                               {"out", (dir / "review").string()}};
  ASSERT_EQ(rgg_review_sample(sample_req.dump().c_str(), &out), RGG_OK) << rgg_last_error();
  EXPECT_EQ(take_json(out)["case_ids"].size(), 4u);

  rgg_server* server = nullptr;
  const auto serve_req = json{{"state_dir", (dir / "state").string()},
                              {"cases", (dir / "review" / "cases.json").string()},
                              {"port", 0},
                              {"admin_token", "t"}};
  ASSERT_EQ(rgg_server_start(serve_req.dump().c_str(), &server), RGG_OK) << rgg_last_error();
  const int port = rgg_server_port(server);
  ASSERT_GT(port, 0);
  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/review/cases");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["cases"].size(), 4u);
  rgg_server_stop(server);
  EXPECT_FALSE(client.Get("/healthz"));
  rgg_server_free(server);
}

TEST_F(CApi, ProviderFailureMapsToProviderStatus) {
  build();
  std::ofstream(dir / "registry.json")
      << json{{"providers",
               {{{"provider_id", "remote-text"},
                 {"kind", "remote"},
                 {"modality", "text"},
                 {"dim", 4},
                 {"endpoint", "http://127.0.0.1:9/embed"},
                 {"timeout_ms", 200}}}}}
             .dump();
  std::ofstream(dir / "baseline.jsonl") << json{{"query_ref", "r0"}, {"text", "Tissue."}}.dump() << "\n";
  const auto req = json{{"baseline", (dir / "baseline.jsonl").string()},
                        {"reference_atlas", (dir / "atlas").string()},
                        {"scorer", "remote-text"},
                        {"registry", (dir / "registry.json").string()},
                        {"out", (dir / "eval").string()}};
  char* out = nullptr;
  EXPECT_EQ(rgg_evaluate(req.dump().c_str(), &out), RGG_ERR_PROVIDER) << rgg_last_error();
  EXPECT_NE(std::string(rgg_last_error()).find("remote-text"), std::string::npos) << rgg_last_error();
}

}  // namespace
