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

// End-to-end commands: build an atlas, caption a query, evaluate runs,
// sample review cases and host the review service. Each command takes a
// plain struct (parsable from JSON) and returns a JSON document. Outputs
// contain no wall-clock data, so mock/file-backed runs are byte-stable.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgg/embed_gateway.hpp"
#include "rgg/eval_harness.hpp"
#include "rgg/review_http.hpp"
#include "rgg/summarizer.hpp"

namespace rgg {

inline constexpr std::string_view kExtractiveEngine = "extractive";
inline constexpr std::string_view kDefaultScorer = "mock-text";

struct RunConfig {
  std::string run_id;  // defaults to the backbone id
  std::filesystem::path atlas;
  std::string backbone;
  std::uint32_t k = kDefaultTopK;
  std::string engine = std::string(kExtractiveEngine);
  std::size_t budget = kDefaultSentenceBudget;  // extractive only
  std::filesystem::path template_path;          // empty: built-in template
  std::string scorer = std::string(kDefaultScorer);
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::filesystem::path registry;  // empty: built-in providers

  /// Parses a config object; relative paths resolve against `base`.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
  nlohmann::json to_json() const;
  /// sha256 of the canonical JSON form.
  std::string checksum() const;
  /// Throws ValidationError for k == 0 or empty atlas/backbone.
  void check() const;
  std::string effective_run_id() const { return run_id.empty() ? backbone : run_id; }
};

/// Built-in registry, or the registry file, with RGG_ENDPOINT_* overrides.
ProviderRegistry load_registry(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct BuildAtlasRequest {
  std::filesystem::path manifest;
  std::map<std::string, std::filesystem::path> embeddings;  // backbone -> file
  std::filesystem::path out;

  static BuildAtlasRequest from_json(const nlohmann::json& j);
};

/// Ingests, attaches every backbone, validates and saves. Any rejection or
/// validation violation throws; nothing is written in that case.
nlohmann::json cmd_build_atlas(const BuildAtlasRequest& request);

// ---------------------------------------------------------------------------

struct CaptionRequest {
  RunConfig config;
  std::string record_id;              // either this ...
  std::filesystem::path image_path;   // ... or an external image
  static CaptionRequest from_json(const nlohmann::json& j);
};

/// Retrieves k neighbors (the query record excluded), summarizes them and
/// returns caption, neighbors, prompt checksum, provenance and warnings.
nlohmann::json cmd_caption(const CaptionRequest& request);

// ---------------------------------------------------------------------------

struct EvaluateRequest {
  std::vector<RunConfig> configs;
  std::filesystem::path baseline;  // JSONL {query_ref, text}
  std::string baseline_id = "baseline";
  std::filesystem::path reference_atlas;  // defaults to the first config's atlas
  std::string scorer = std::string(kDefaultScorer);
  std::uint64_t seed = 0;  // baseline bootstrap seed
  std::uint32_t resamples = kDefaultResamples;
  double ci_level = kDefaultCiLevel;
  std::filesystem::path registry;
  std::filesystem::path out;

  static EvaluateRequest from_json(const nlohmann::json& j);
};

/// Captions every baseline query id with each config, scores generated vs
/// reference (the record's primary caption) and writes per-run captions,
/// scores and summaries plus comparisons and the table under `out`.
/// Throws ValidationError on scorer or id-set mismatches.
nlohmann::json cmd_evaluate(const EvaluateRequest& request);

// ---------------------------------------------------------------------------

/// Reads a captions file (JSONL with query_ref and text).
SystemRun read_system_run(const std::string& system_id, const std::filesystem::path& path);

struct ReviewSampleRequest {
  std::map<std::string, std::filesystem::path> runs;  // exactly two: system id -> captions
  std::size_t n = 20;
  std::uint64_t seed = 0;
  std::filesystem::path atlas;  // optional, supplies image locators
  std::filesystem::path out;    // cases.json is written here

  static ReviewSampleRequest from_json(const nlohmann::json& j);
};

nlohmann::json cmd_review_sample(const ReviewSampleRequest& request);

// ---------------------------------------------------------------------------

struct ServeRequest {
  std::filesystem::path state_dir;  // cases.json, judgments.jsonl, unblind.log
  std::filesystem::path cases;      // explicit cases file; else state_dir/cases.json
  ReviewSampleRequest sample;       // used when no cases file exists yet
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string admin_token;
  std::filesystem::path static_dir;

  static ServeRequest from_json(const nlohmann::json& j);
};

/// Loads (or samples and persists) the cases, then binds the server.
std::unique_ptr<ReviewServer> cmd_serve(const ServeRequest& request, int* bound_port);

}  // namespace rgg
