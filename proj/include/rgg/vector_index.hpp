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

// Exact cosine top-k search over one backbone's embeddings.
//
// Vectors are unit-normalized when the index is built, so a similarity is a
// dot product. Results are sorted by similarity descending with ties broken
// by ascending record id, which makes every run reproducible.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rgg/atlas.hpp"

namespace rgg {

inline constexpr std::uint32_t kDefaultTopK = 3;
inline constexpr std::string_view kExternalQuery = "external";
inline constexpr std::string_view kIndexMagic = "RGGIDX01";

/// Unit vector in the direction of `v`. Throws ValidationError on a zero or
/// non-finite norm.
std::vector<float> normalize(std::span<const float> v);

/// dot(a, b) / (|a| |b|), clamped to [-1, 1].
double cosine(std::span<const float> a, std::span<const float> b);

struct Neighbor {
  std::string record_id;
  double similarity = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct RetrievalResult {
  std::string query_ref;  // record id, or "external" for a vector query
  std::vector<Neighbor> neighbors;
  std::uint32_t k_requested = 0;
  std::vector<std::string> excluded_ids;  // sorted
};

/// A query is either a raw vector or the id of an indexed record.
using Query = std::variant<std::span<const float>, std::string_view>;

class VectorIndex {
 public:
  /// One entry per record covered by `backbone_id`, in atlas order.
  static VectorIndex build(const Atlas& atlas, const std::string& backbone_id);

  const std::string& backbone_id() const { return backbone_id_; }
  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  bool contains(std::string_view record_id) const;

  /// Stored unit vector of entry `i`.
  std::span<const float> vector(std::size_t i) const;

  /// Top-k by cosine similarity. An id query excludes itself automatically.
  RetrievalResult top_k(const Query& query, std::uint32_t k,
                        const std::set<std::string, std::less<>>& exclude = {}) const;

  /// Index file: "RGGIDX01" | u16 len | backbone id | u8 normalized flag |
  /// embedded atlas binary embedding stream of the stored unit vectors.
  void write(std::ostream& out) const;
  static VectorIndex read(std::istream& in);
  std::string serialize() const;

 private:
  RetrievalResult scan(const std::vector<double>& unit_query, std::string query_ref, std::uint32_t k,
                       std::set<std::string, std::less<>> exclude) const;
  std::ptrdiff_t position(std::string_view record_id) const;

  std::string backbone_id_;
  std::uint32_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> matrix_;  // size() x dim_, row-major
  std::vector<std::size_t> sorted_positions_;  // positions ordered by id, for lookup
};

}  // namespace rgg
