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

#include "rgg/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rgg/error.hpp"

namespace rgg {
namespace {

double norm_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

std::vector<double> unit_double(std::span<const float> v) {
  const double n = norm_of(v);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw ValidationError("degenerate embedding: norm is zero or non-finite");
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

std::vector<float> normalize(std::span<const float> v) {
  const auto unit = unit_double(v);
  return {unit.begin(), unit.end()};
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ValidationError("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  const double na = norm_of(a);
  const double nb = norm_of(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw ValidationError("cosine: zero-norm operand");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
  return clamp_unit(dot / (na * nb));
}

// ---------------------------------------------------------------------------

VectorIndex VectorIndex::build(const Atlas& atlas, const std::string& backbone_id) {
  const auto* set = atlas.embeddings(backbone_id);
  if (set == nullptr) throw NotFoundError("unknown backbone '" + backbone_id + "'");

  VectorIndex index;
  index.backbone_id_ = backbone_id;
  index.dim_ = set->dim();
  for (const auto& rec : atlas.records()) {
    const auto* values = set->find(rec.record_id);
    if (values == nullptr) continue;
    const auto unit = normalize(*values);
    index.ids_.push_back(rec.record_id);
    index.matrix_.insert(index.matrix_.end(), unit.begin(), unit.end());
  }
  index.sorted_positions_.resize(index.ids_.size());
  std::iota(index.sorted_positions_.begin(), index.sorted_positions_.end(), std::size_t{0});
  std::sort(index.sorted_positions_.begin(), index.sorted_positions_.end(),
            [&](std::size_t a, std::size_t b) { return index.ids_[a] < index.ids_[b]; });
  return index;
}

std::ptrdiff_t VectorIndex::position(std::string_view record_id) const {
  auto it = std::lower_bound(sorted_positions_.begin(), sorted_positions_.end(), record_id,
                             [&](std::size_t p, std::string_view id) { return ids_[p] < id; });
  if (it == sorted_positions_.end() || ids_[*it] != record_id) return -1;
  return static_cast<std::ptrdiff_t>(*it);
}

bool VectorIndex::contains(std::string_view record_id) const { return position(record_id) >= 0; }

std::span<const float> VectorIndex::vector(std::size_t i) const {
  return {matrix_.data() + i * dim_, dim_};
}

RetrievalResult VectorIndex::top_k(const Query& query, std::uint32_t k,
                                   const std::set<std::string, std::less<>>& exclude) const {
  if (k == 0) throw ValidationError("top_k: k must be at least 1");
  auto excluded = exclude;

  if (const auto* id = std::get_if<std::string_view>(&query)) {
    const auto pos = position(*id);
    if (pos < 0) {
      throw NotFoundError("record '" + std::string(*id) + "' is not covered by backbone '" +
                          backbone_id_ + "'");
    }
    excluded.emplace(*id);
    const auto stored = vector(static_cast<std::size_t>(pos));
    return scan({stored.begin(), stored.end()}, std::string(*id), k, std::move(excluded));
  }

  const auto vec = std::get<std::span<const float>>(query);
  if (vec.size() != dim_) {
    throw ValidationError("top_k: query dim " + std::to_string(vec.size()) +
                          " does not match index dim " + std::to_string(dim_));
  }
  return scan(unit_double(vec), std::string(kExternalQuery), k, std::move(excluded));
}

RetrievalResult VectorIndex::scan(const std::vector<double>& unit_query, std::string query_ref,
                                  std::uint32_t k,
                                  std::set<std::string, std::less<>> exclude) const {
  struct Scored {
    std::size_t pos;
    double score;
  };
  std::vector<Scored> candidates;
  candidates.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (exclude.contains(ids_[i])) continue;
    const auto row = vector(i);
    double dot = 0.0;
    for (std::uint32_t d = 0; d < dim_; ++d) dot += row[d] * unit_query[d];
    candidates.push_back({i, clamp_unit(dot)});
  }

  const auto better = [&](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return ids_[a.pos] < ids_[b.pos];
  };
  const auto take = std::min<std::size_t>(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), better);

  RetrievalResult result;
  result.query_ref = std::move(query_ref);
  result.k_requested = k;
  result.excluded_ids.assign(exclude.begin(), exclude.end());
  result.neighbors.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    result.neighbors.push_back({ids_[candidates[i].pos], candidates[i].score});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void VectorIndex::write(std::ostream& out) const {
  out.write(kIndexMagic.data(), kIndexMagic.size());
  const auto len = static_cast<std::uint16_t>(backbone_id_.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(backbone_id_.data(), len);
  const std::uint8_t normalized = 1;
  out.write(reinterpret_cast<const char*>(&normalized), sizeof(normalized));

  EmbeddingTable table;
  table.dim = dim_;
  table.rows.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const auto v = vector(i);
    table.rows.push_back({ids_[i], {v.begin(), v.end()}});
  }
  write_embeddings(out, table, EmbeddingEncoding::kBinary);
}

VectorIndex VectorIndex::read(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (in.gcount() != 8 || std::string_view(magic, 8) != kIndexMagic) {
    throw ValidationError("index file: bad magic");
  }
  std::uint16_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  VectorIndex index;
  index.backbone_id_.resize(len);
  in.read(index.backbone_id_.data(), len);
  std::uint8_t normalized = 0;
  in.read(reinterpret_cast<char*>(&normalized), sizeof(normalized));
  if (!in) throw ValidationError("index file: truncated header");

  // The embedded stream starts at the current offset; hand the remainder over.
  std::ostringstream rest;
  rest << in.rdbuf();
  std::istringstream body(rest.str());
  auto table = read_embeddings_binary(body);
  index.dim_ = table.dim;
  for (auto& row : table.rows) {
    auto values = normalized ? std::move(row.values) : normalize(row.values);
    index.ids_.push_back(std::move(row.id));
    index.matrix_.insert(index.matrix_.end(), values.begin(), values.end());
  }
  index.sorted_positions_.resize(index.ids_.size());
  std::iota(index.sorted_positions_.begin(), index.sorted_positions_.end(), std::size_t{0});
  std::sort(index.sorted_positions_.begin(), index.sorted_positions_.end(),
            [&](std::size_t a, std::size_t b) { return index.ids_[a] < index.ids_[b]; });
  return index;
}

std::string VectorIndex::serialize() const {
  std::ostringstream out;
  write(out);
  return out.str();
}

}  // namespace rgg
