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

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>

#include <gtest/gtest.h>

#include "fake_model_server.hpp"
#include "fixtures.hpp"
#include "rgg/embed_gateway.hpp"
#include "rgg/error.hpp"
#include "rgg/vector_index.hpp"

namespace rgg {
namespace {

using testing::FakeModelServer;
using testing::TempDir;

ProviderSpec mock_spec(std::uint64_t seed = 7, std::uint32_t dim = 1024, Modality m = Modality::kText) {
  ProviderSpec s;
  s.provider_id = "m";
  s.kind = ProviderKind::kMock;
  s.dim = dim;
  s.modality = m;
  s.seed = seed;
  return s;
}

ProviderSpec remote_spec(const std::string& endpoint, std::uint32_t dim = 4) {
  ProviderSpec s;
  s.provider_id = "remote-bb";
  s.kind = ProviderKind::kRemote;
  s.endpoint = endpoint;
  s.dim = dim;
  s.modality = Modality::kImage;
  s.retry.initial_backoff = std::chrono::milliseconds(1);
  s.retry.timeout = std::chrono::milliseconds(2000);
  return s;
}

double mock_cos(std::string_view a, std::string_view b, std::uint64_t seed = 7) {
  return cosine(mock_embed(seed, Modality::kText, a, 1024).values,
                mock_embed(seed, Modality::kText, b, 1024).values);
}

TEST(MockEmbed, Deterministic) {
  const MockProvider p(mock_spec());
  const auto a = p.embed({"x", Modality::kText, "tubular adenoma"});
  const auto b = p.embed({"x", Modality::kText, "tubular adenoma"});
  EXPECT_EQ(a.embedding.values, b.embedding.values);
  EXPECT_EQ(a.embedding.backbone_id, "m");
}

TEST(MockEmbed, SeedChangesVector) {
  const auto a = mock_embed(1, Modality::kText, "nuclear atypia mitoses", 1024);
  const auto b = mock_embed(2, Modality::kText, "nuclear atypia mitoses", 1024);
  EXPECT_LT(cosine(a.values, b.values), 1.0);
}

TEST(MockEmbed, TokenOverlapOrdersSimilarity) {
  const double near = mock_cos("nuclear atypia mitoses", "nuclear atypia");
  const double far = mock_cos("nuclear atypia mitoses", "bland stroma");
  EXPECT_GT(near, far);
  // 2 of 3 shared unit tokens: 2 / (sqrt(3) sqrt(2)), barring collisions.
  EXPECT_NEAR(near, 2.0 / std::sqrt(6.0), 1e-6);
}

TEST(MockEmbed, MatchesIndependentConstruction) {
  // Re-derives the bag-of-hashed-tokens vector from its definition.
  const std::string text = "Glands, glands and STROMA.";
  const std::uint64_t seed = 99;
  const std::uint64_t basis = splitmix64(seed ^ splitmix64(0x74657874ULL));
  std::map<std::size_t, double> buckets;
  for (const char* tok : {"glands", "glands", "and", "stroma"}) buckets[fnv1a64(tok, basis) % 64] += 1;
  double norm = 0;
  for (const auto& [_, c] : buckets) norm += c * c;
  norm = std::sqrt(norm);
  const auto got = mock_embed(seed, Modality::kText, text, 64).values;
  for (std::size_t i = 0; i < 64; ++i) {
    const double want = buckets.count(i) ? buckets[i] / norm : 0.0;
    EXPECT_NEAR(got[i], want, 1e-7) << i;
  }
}

TEST(MockEmbed, ImageAndTextModalitiesDiffer) {
  const auto t = mock_embed(7, Modality::kText, "keratin pearls", 256);
  const auto i = mock_embed(7, Modality::kImage, "keratin pearls", 256);
  EXPECT_NE(t.values, i.values);
}

TEST(MockEmbed, EmptyTokenSetStillUnit) {
  const auto v = mock_embed(7, Modality::kText, "...", 32).values;
  double n = 0;
  for (float x : v) n += x * x;
  EXPECT_NEAR(n, 1.0, 1e-6);
}

TEST(Provider, ModalityMismatchAndEmptyPayload) {
  const MockProvider p(mock_spec());
  EXPECT_THROW(p.embed({"x", Modality::kImage, "bytes"}), ValidationError);
  EXPECT_THROW(p.embed({"x", Modality::kText, ""}), ValidationError);
}

TEST(Provider, FileProviderLookupIsBitExact) {
  TempDir tmp;
  const EmbeddingTable t{3, {{"a", {0.1f, 0.2f, 0.3f}}, {"b", {1e-20f, -2.0f, 7.0f}}}};
  {
    std::ofstream out(tmp / "e.emb", std::ios::binary);
    write_embeddings(out, t);
  }
  ProviderSpec s;
  s.provider_id = "f";
  s.kind = ProviderKind::kFile;
  s.endpoint = (tmp / "e.emb").string();
  s.dim = 3;
  s.modality = Modality::kImage;
  const auto p = make_provider(s);
  const auto r = p->embed({"b", Modality::kImage, ""});
  EXPECT_EQ(std::memcmp(r.embedding.values.data(), t.rows[1].values.data(), 12), 0);
  EXPECT_THROW(p->embed({"zz", Modality::kImage, ""}), NotFoundError);
}

TEST(Provider, SpecInvariants) {
  auto s = mock_spec();
  s.dim = 0;
  EXPECT_THROW(check_spec(s), ValidationError);
  auto r = remote_spec("");
  EXPECT_THROW(check_spec(r), ValidationError);
}

TEST(Remote, ConformingReply) {
  FakeModelServer fake;
  const RemoteProvider p(remote_spec(fake.url("/embed")));
  const auto r = p.embed({"img-1", Modality::kImage, std::string("\x89PNG\x00\x01", 6)});
  EXPECT_EQ(r.embedding.values, (std::vector<float>{0.5f, 1.5f, 2.5f, 3.5f}));
  const auto body = fake.bodies().front();
  EXPECT_EQ(body["id"], "img-1");
  EXPECT_EQ(body["modality"], "image");
  EXPECT_EQ(base64_decode(body["payload"].get<std::string>()), std::string("\x89PNG\x00\x01", 6));
}

TEST(Remote, DimContractViolationIsNonRetryableAndNamesProvider) {
  FakeModelServer fake;
  fake.embed_dim = 5;
  const RemoteProvider p(remote_spec(fake.url("/embed"), 4));
  try {
    p.embed({"x", Modality::kImage, "b"});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_FALSE(e.retryable());
    EXPECT_NE(std::string(e.what()).find("remote-bb"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("contract"), std::string::npos);
  }
  EXPECT_EQ(fake.calls, 1);
}

TEST(Remote, TransientFailuresRetried) {
  FakeModelServer fake;
  fake.fail_first = 2;
  const RemoteProvider p(remote_spec(fake.url("/embed")));
  EXPECT_NO_THROW(p.embed({"x", Modality::kImage, "b"}));
  EXPECT_EQ(fake.calls, 3);
}

TEST(Remote, ExhaustedRetriesAreRetryable) {
  FakeModelServer fake;
  fake.fail_first = 10;
  const RemoteProvider p(remote_spec(fake.url("/embed")));
  try {
    p.embed({"x", Modality::kImage, "b"});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_TRUE(e.retryable());
  }
  EXPECT_EQ(fake.calls, 3);
}

TEST(Remote, ClientErrorNotRetried) {
  FakeModelServer fake;
  fake.status_code = 400;
  const RemoteProvider p(remote_spec(fake.url("/embed")));
  try {
    p.embed({"x", Modality::kImage, "b"});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_FALSE(e.retryable());
  }
  EXPECT_EQ(fake.calls, 1);
}

TEST(Remote, GarbageBodyIsContractViolation) {
  FakeModelServer fake;
  fake.garbage = true;
  const RemoteProvider p(remote_spec(fake.url("/embed")));
  EXPECT_THROW(p.embed({"x", Modality::kImage, "b"}), ProviderError);
}

TEST(Remote, UnreachableIsRetryable) {
  int port = 0;
  {
    FakeModelServer probe;  // grab a free port, then release it
    port = std::stoi(probe.url("").substr(17));
  }
  auto spec = remote_spec("http://127.0.0.1:" + std::to_string(port) + "/embed");
  spec.retry.timeout = std::chrono::milliseconds(300);
  const RemoteProvider p(spec);
  try {
    p.embed({"x", Modality::kImage, "b"});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_TRUE(e.retryable());
    EXPECT_NE(std::string(e.what()).find("remote-bb"), std::string::npos);
  }
}

TEST(Batch, InOrder) {
  const MockProvider p(mock_spec());
  const auto out = batch_embed(p, {{"1", Modality::kText, "a"}, {"2", Modality::kText, "b"},
                                   {"3", Modality::kText, "c"}});
  ASSERT_EQ(out.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_TRUE(out[i].response);
    EXPECT_EQ(out[i].response->item_id, std::to_string(i + 1));
  }
}

TEST(Batch, PositionalErrors) {
  const MockProvider p(mock_spec());
  const auto out = batch_embed(p, {{"1", Modality::kText, "a"}, {"2", Modality::kText, ""},
                                   {"3", Modality::kText, "c"}});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_TRUE(out[0].response);
  EXPECT_FALSE(out[1].response);
  EXPECT_FALSE(out[1].error.empty());
  EXPECT_TRUE(out[2].response);
}

TEST(Batch, EmptyAndMixed) {
  const MockProvider p(mock_spec());
  EXPECT_TRUE(batch_embed(p, {}).empty());
  EXPECT_THROW(batch_embed(p, {{"1", Modality::kText, "a"}, {"2", Modality::kImage, "b"}}),
               ValidationError);
}

TEST(Batch, UnreachableAbortsWholeBatch) {
  FakeModelServer fake;
  fake.fail_first = 100;
  const RemoteProvider p(remote_spec(fake.url("/embed")));
  EXPECT_THROW(batch_embed(p, {{"1", Modality::kImage, "a"}, {"2", Modality::kImage, "b"}}),
               ProviderError);
}

TEST(Registry, BuiltinsAndFileWithEnvOverride) {
  TempDir tmp;
  testing::write_text(tmp / "reg.json", R"({
    "providers": [
      {"provider_id": "uni2", "kind": "remote", "modality": "image", "dim": 1536,
       "endpoint": "http://model-host:9000/embed"},
      {"provider_id": "precomputed", "kind": "file", "modality": "image", "dim": 3,
       "endpoint": "emb/p.emb"}
    ],
    "summarizers": [{"engine_id": "phi-4", "endpoint": "http://llm:8000/generate"}]
  })");
  auto reg = ProviderRegistry::load(tmp / "reg.json");
  EXPECT_TRUE(reg.has_provider("mock-text"));
  EXPECT_TRUE(reg.has_provider("mock-image"));
  EXPECT_EQ(reg.provider("uni2").dim, 1536u);
  EXPECT_EQ(reg.provider("precomputed").endpoint, (tmp / "emb/p.emb").string());
  ASSERT_NE(reg.summarizer("phi-4"), nullptr);
  EXPECT_THROW(reg.provider("nope"), NotFoundError);

  EXPECT_EQ(endpoint_env_var("uni2"), "RGG_ENDPOINT_UNI2");
  EXPECT_EQ(endpoint_env_var("phi-4"), "RGG_ENDPOINT_PHI_4");
  setenv("RGG_ENDPOINT_UNI2", "http://override:1/embed", 1);
  reg.apply_env_overrides();
  unsetenv("RGG_ENDPOINT_UNI2");
  EXPECT_EQ(reg.provider("uni2").endpoint, "http://override:1/embed");
}

TEST(Registry, BuiltinDefaults) {
  const auto reg = ProviderRegistry::builtin();
  EXPECT_EQ(reg.provider("mock-text").modality, Modality::kText);
  EXPECT_EQ(reg.provider("mock-text").dim, 1024u);
  EXPECT_EQ(reg.provider("mock-image").modality, Modality::kImage);
}

}  // namespace
}  // namespace rgg
