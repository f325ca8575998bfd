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

#pragma once

// One boundary for every embedding model, image or text.
//
// Three provider kinds sit behind EmbeddingProvider:
//   remote  HTTP model server: POST {id, modality, payload} -> {id, values}
//           (image payloads base64-encoded, text payloads sent verbatim)
//   file    lookup in a precomputed embedding file, keyed by item id
//   mock    seeded bag-of-hashed-tokens, for tests and offline runs
//
// Every response is checked before it leaves the gateway: declared dim,
// finite values, non-zero norm. Providers hold no mutable state after
// construction and may be shared across threads.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rgg/atlas.hpp"
#include "rgg/http_client.hpp"

namespace rgg {

enum class ProviderKind { kRemote, kFile, kMock };
enum class Modality { kImage, kText };

std::string_view to_string(ProviderKind kind);
std::string_view to_string(Modality modality);
ProviderKind parse_provider_kind(std::string_view text);
Modality parse_modality(std::string_view text);

struct ProviderSpec {
  std::string provider_id;
  ProviderKind kind = ProviderKind::kMock;
  std::string endpoint;  // remote: http URL; file: path to an embedding file
  std::uint32_t dim = 0;
  Modality modality = Modality::kText;
  std::uint64_t seed = 0;  // mock only
  RetryPolicy retry;       // remote only
};

/// Throws ValidationError unless dim > 0 and a remote/file spec has an endpoint.
void check_spec(const ProviderSpec& spec);

struct EmbedRequest {
  std::string item_id;
  Modality modality = Modality::kText;
  std::string payload;  // raw image bytes or text
};

struct EmbedResponse {
  std::string item_id;
  Embedding embedding;
  double latency_ms = 0.0;
};

class EmbeddingProvider {
 public:
  explicit EmbeddingProvider(ProviderSpec spec);
  virtual ~EmbeddingProvider() = default;
  EmbeddingProvider(const EmbeddingProvider&) = delete;
  EmbeddingProvider& operator=(const EmbeddingProvider&) = delete;

  const ProviderSpec& spec() const { return spec_; }

  /// Throws ValidationError on modality mismatch or an empty payload,
  /// ProviderError on transport failure or a contract violation.
  EmbedResponse embed(const EmbedRequest& request) const;

 protected:
  virtual std::vector<float> compute(const EmbedRequest& request) const = 0;

 private:
  ProviderSpec spec_;
};

/// Deterministic embedding: tokens are hashed (seeded, modality-salted) into
/// `dim` count buckets and the result is unit-normalized. A payload with no
/// tokens hashes a fixed placeholder token, so the vector is never zero.
Embedding mock_embed(std::uint64_t seed, Modality modality, std::string_view payload,
                     std::uint32_t dim, std::string backbone_id = "mock");

class MockProvider final : public EmbeddingProvider {
 public:
  explicit MockProvider(ProviderSpec spec);

 protected:
  std::vector<float> compute(const EmbedRequest& request) const override;
};

class FileProvider final : public EmbeddingProvider {
 public:
  explicit FileProvider(ProviderSpec spec);

 protected:
  std::vector<float> compute(const EmbedRequest& request) const override;

 private:
  std::map<std::string, std::vector<float>, std::less<>> vectors_;
};

class RemoteProvider final : public EmbeddingProvider {
 public:
  explicit RemoteProvider(ProviderSpec spec);

 protected:
  std::vector<float> compute(const EmbedRequest& request) const override;
};

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderSpec& spec);

/// Per-item outcome of batch_embed: exactly one of response / error is set.
struct BatchItem {
  std::optional<EmbedResponse> response;
  std::string error;
};

/// Embeds every request in order. Item-level failures are reported in place;
/// only an unreachable provider (retryable ProviderError) aborts the batch.
/// Throws ValidationError when the batch mixes modalities.
std::vector<BatchItem> batch_embed(const EmbeddingProvider& provider,
                                   const std::vector<EmbedRequest>& requests);

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// Remote text-generation service used by the summarizer.
struct SummarizerSpec {
  std::string engine_id;
  std::string endpoint;
  int max_tokens = 256;
  double temperature = 0.0;
  RetryPolicy retry;
};

/// provider_id -> ProviderSpec, plus remote summarizer engines.
///
/// Registry file (JSON):
///   {"providers":   [{"provider_id", "kind", "modality", "dim",
///                     "endpoint"?, "seed"?, "timeout_ms"?}],
///    "summarizers": [{"engine_id", "endpoint", "max_tokens"?, "temperature"?}]}
///
/// Endpoints can be overridden per entry with RGG_ENDPOINT_<ID>, where <ID>
/// is the id upper-cased with every non-alphanumeric byte replaced by '_'.
class ProviderRegistry {
 public:
  /// Registry holding only the built-in "mock-text" and "mock-image" providers.
  static ProviderRegistry builtin();

  /// Built-ins plus the entries of `path`; file entries win on id clashes.
  static ProviderRegistry load(const std::filesystem::path& path);

  void add(ProviderSpec spec);
  void add(SummarizerSpec spec);

  const ProviderSpec& provider(std::string_view provider_id) const;
  const SummarizerSpec* summarizer(std::string_view engine_id) const;
  bool has_provider(std::string_view provider_id) const;
  std::vector<std::string> provider_ids() const;

  /// Applies RGG_ENDPOINT_* environment overrides to every entry.
  void apply_env_overrides();

 private:
  std::map<std::string, ProviderSpec, std::less<>> providers_;
  std::map<std::string, SummarizerSpec, std::less<>> summarizers_;
};

std::string endpoint_env_var(std::string_view id);

}  // namespace rgg
