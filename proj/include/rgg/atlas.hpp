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

// The atlas: expert-captioned image records plus one embedding set per
// backbone. It is both the retrieval database and the ground-truth source.
//
// An Atlas is built once (ingest_manifest, then attach_embeddings for each
// backbone) and is read-only afterwards; every accessor is const, so any
// number of threads may read it concurrently.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rgg/embedding_io.hpp"

namespace rgg {

struct ImageRecord {
  std::string record_id;
  std::string image_uri;  // opaque locator, never dereferenced here
  std::vector<std::string> captions;
  std::map<std::string, std::string> source_meta;

  /// The first caption is the reference caption used for evaluation.
  const std::string& primary_caption() const { return captions.front(); }

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// A backbone-tagged vector, as produced by an embedding provider.
struct Embedding {
  std::string backbone_id;
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
};

/// All embeddings produced by one backbone. Rows keep file order.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(std::string backbone_id, std::uint32_t dim);

  const std::string& backbone_id() const { return backbone_id_; }
  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  const std::vector<EmbeddingRow>& rows() const { return rows_; }

  /// nullptr when the record has no embedding in this set.
  const std::vector<float>* find(std::string_view record_id) const;

  /// Bitwise equality of ids, order and float payloads.
  bool bit_equal(const EmbeddingSet& other) const;

 private:
  friend class AtlasBuilder;

  std::string backbone_id_;
  std::uint32_t dim_ = 0;
  std::vector<EmbeddingRow> rows_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

struct BuildMeta {
  std::string created_at;
  std::string manifest_checksum;  // sha256 of the manifest bytes as ingested
};

struct CoverageReport {
  std::string backbone_id;
  std::size_t covered = 0;
  std::vector<std::string> missing_ids;  // atlas iteration order
};

struct Violation {
  std::string record_id;    // may be empty for atlas-level problems
  std::string backbone_id;  // empty for record-level problems
  std::string message;
};

class Atlas {
 public:
  /// Records in manifest order.
  const std::vector<ImageRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const ImageRecord* find(std::string_view record_id) const;
  bool contains(std::string_view record_id) const { return find(record_id) != nullptr; }

  const EmbeddingSet* embeddings(std::string_view backbone_id) const;
  std::vector<std::string> backbones() const;

  const BuildMeta& meta() const { return meta_; }

  /// Problems detected while loading a persisted atlas (checksum mismatches).
  const std::vector<Violation>& load_issues() const { return load_issues_; }

  /// Record-by-record and bit-exact embedding-by-embedding equality.
  bool same_contents(const Atlas& other) const;

 private:
  friend class AtlasBuilder;

  std::vector<ImageRecord> records_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::map<std::string, EmbeddingSet, std::less<>> embedding_sets_;
  BuildMeta meta_;
  std::vector<Violation> load_issues_;
};

struct AttachResult {
  Atlas atlas;
  CoverageReport coverage;
};

/// Parses a line-delimited manifest ({"id", "image_uri", "captions", "meta"}).
/// Throws ValidationError naming the line for malformed lines, duplicate ids
/// or empty captions.
Atlas ingest_manifest(std::istream& manifest);

/// Adds the embedding set for `backbone_id`. Rejects a backbone that is
/// already attached, dimension changes within the stream, zero-norm or
/// non-finite vectors, ids not present in the atlas and repeated ids.
AttachResult attach_embeddings(Atlas atlas, const std::string& backbone_id,
                               std::istream& embeddings);
AttachResult attach_embeddings(Atlas atlas, const std::string& backbone_id,
                               EmbeddingTable table);

/// Every invariant violation; empty for a valid atlas. Never throws on bad data.
std::vector<Violation> validate(const Atlas& atlas);

/// Writes atlas.json, records.jsonl and embeddings/<backbone>.emb under `dir`.
void save_atlas(const Atlas& atlas, const std::filesystem::path& dir);

/// Loads a persisted atlas without enforcing embedding invariants, so that
/// validate() can report damage instead of the load failing outright.
Atlas load_atlas(const std::filesystem::path& dir);

}  // namespace rgg
