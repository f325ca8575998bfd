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

#include "rgg/atlas.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rgg/error.hpp"
#include "rgg/support.hpp"

namespace rgg {

using nlohmann::json;

namespace {

constexpr std::string_view kAtlasFormat = "rgg-atlas/1";

std::string line_prefix(std::size_t line_no) {
  return "manifest line " + std::to_string(line_no) + ": ";
}

bool valid_backbone_id(std::string_view id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

double squared_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return s;
}

json record_to_json(const ImageRecord& r) {
  json j{{"id", r.record_id}, {"image_uri", r.image_uri}, {"captions", r.captions}};
  if (!r.source_meta.empty()) j["meta"] = r.source_meta;
  return j;
}

}  // namespace

// Sole writer of Atlas / EmbeddingSet internals.
class AtlasBuilder {
 public:
  static void add_record(Atlas& atlas, ImageRecord record) {
    atlas.by_id_.emplace(record.record_id, atlas.records_.size());
    atlas.records_.push_back(std::move(record));
  }

  static void add_row(EmbeddingSet& set, EmbeddingRow row) {
    set.by_id_.emplace(row.id, set.rows_.size());
    set.rows_.push_back(std::move(row));
  }

  static void put_set(Atlas& atlas, EmbeddingSet set) {
    auto key = set.backbone_id();
    atlas.embedding_sets_.insert_or_assign(std::move(key), std::move(set));
  }

  static BuildMeta& meta(Atlas& atlas) { return atlas.meta_; }
  static std::vector<Violation>& load_issues(Atlas& atlas) { return atlas.load_issues_; }
};

// ---------------------------------------------------------------------------
// EmbeddingSet / Atlas accessors
// ---------------------------------------------------------------------------

EmbeddingSet::EmbeddingSet(std::string backbone_id, std::uint32_t dim)
    : backbone_id_(std::move(backbone_id)), dim_(dim) {}

const std::vector<float>* EmbeddingSet::find(std::string_view record_id) const {
  auto it = by_id_.find(record_id);
  return it == by_id_.end() ? nullptr : &rows_[it->second].values;
}

bool EmbeddingSet::bit_equal(const EmbeddingSet& other) const {
  if (backbone_id_ != other.backbone_id_ || dim_ != other.dim_ ||
      rows_.size() != other.rows_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& a = rows_[i];
    const auto& b = other.rows_[i];
    if (a.id != b.id || a.values.size() != b.values.size()) return false;
    if (std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

const ImageRecord* Atlas::find(std::string_view record_id) const {
  auto it = by_id_.find(record_id);
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

const EmbeddingSet* Atlas::embeddings(std::string_view backbone_id) const {
  auto it = embedding_sets_.find(backbone_id);
  return it == embedding_sets_.end() ? nullptr : &it->second;
}

std::vector<std::string> Atlas::backbones() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : embedding_sets_) out.push_back(id);
  return out;
}

bool Atlas::same_contents(const Atlas& other) const {
  if (records_ != other.records_) return false;
  if (embedding_sets_.size() != other.embedding_sets_.size()) return false;
  for (const auto& [id, set] : embedding_sets_) {
    const auto* o = other.embeddings(id);
    if (o == nullptr || !set.bit_equal(*o)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Manifest ingestion
// ---------------------------------------------------------------------------

namespace {

ImageRecord parse_manifest_line(const std::string& line, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ValidationError(line_prefix(line_no) + "malformed JSON (" + e.what() + ")");
  }
  if (!obj.is_object()) throw ValidationError(line_prefix(line_no) + "expected an object");

  ImageRecord rec;
  if (!obj.contains("id") || !obj["id"].is_string() || obj["id"].get<std::string>().empty()) {
    throw ValidationError(line_prefix(line_no) + "missing or empty string 'id'");
  }
  rec.record_id = obj["id"].get<std::string>();

  if (!obj.contains("image_uri") || !obj["image_uri"].is_string()) {
    throw ValidationError(line_prefix(line_no) + "missing string 'image_uri' for id '" +
                          rec.record_id + "'");
  }
  rec.image_uri = obj["image_uri"].get<std::string>();

  if (!obj.contains("captions") || !obj["captions"].is_array()) {
    throw ValidationError(line_prefix(line_no) + "missing 'captions' array for id '" +
                          rec.record_id + "'");
  }
  for (const auto& c : obj["captions"]) {
    if (!c.is_string()) {
      throw ValidationError(line_prefix(line_no) + "non-string caption for id '" +
                            rec.record_id + "'");
    }
    auto text = c.get<std::string>();
    if (trim(text).empty()) {
      throw ValidationError(line_prefix(line_no) + "blank caption for id '" + rec.record_id +
                            "'");
    }
    rec.captions.push_back(std::move(text));
  }
  if (rec.captions.empty()) {
    throw ValidationError(line_prefix(line_no) + "empty caption list for id '" +
                          rec.record_id + "'");
  }

  if (obj.contains("meta")) {
    const auto& meta = obj["meta"];
    if (!meta.is_object()) {
      throw ValidationError(line_prefix(line_no) + "'meta' must be a flat object");
    }
    for (const auto& [key, value] : meta.items()) {
      if (value.is_string()) {
        rec.source_meta[key] = value.get<std::string>();
      } else if (value.is_primitive() && !value.is_null()) {
        rec.source_meta[key] = value.dump();
      } else {
        throw ValidationError(line_prefix(line_no) + "'meta." + key + "' is not a scalar");
      }
    }
  }
  return rec;
}

}  // namespace

Atlas ingest_manifest(std::istream& manifest) {
  std::ostringstream buf;
  buf << manifest.rdbuf();
  const std::string bytes = buf.str();

  Atlas atlas;
  std::map<std::string, std::size_t, std::less<>> first_seen;
  std::istringstream lines(bytes);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto rec = parse_manifest_line(line, line_no);
    auto [it, inserted] = first_seen.emplace(rec.record_id, line_no);
    if (!inserted) {
      throw ValidationError(line_prefix(line_no) + "duplicate record id '" + rec.record_id +
                            "' (first seen on line " + std::to_string(it->second) + ")");
    }
    AtlasBuilder::add_record(atlas, std::move(rec));
  }
  AtlasBuilder::meta(atlas) = BuildMeta{utc_timestamp(), sha256_hex(bytes)};
  return atlas;
}

// ---------------------------------------------------------------------------
// Embedding attachment
// ---------------------------------------------------------------------------

AttachResult attach_embeddings(Atlas atlas, const std::string& backbone_id,
                               std::istream& embeddings) {
  return attach_embeddings(std::move(atlas), backbone_id, read_embeddings(embeddings));
}

AttachResult attach_embeddings(Atlas atlas, const std::string& backbone_id,
                               EmbeddingTable table) {
  if (!valid_backbone_id(backbone_id)) {
    throw ValidationError("invalid backbone id '" + backbone_id +
                          "' (allowed: letters, digits, '-', '_', '.')");
  }
  if (atlas.embeddings(backbone_id) != nullptr) {
    throw ValidationError("backbone '" + backbone_id + "' is already attached");
  }
  if (!table.rows.empty() && table.dim == 0) {
    throw ValidationError("backbone '" + backbone_id + "': embeddings have dimension 0");
  }

  EmbeddingSet set(backbone_id, table.dim);
  for (auto& row : table.rows) {
    if (row.values.size() != table.dim) {
      throw ValidationError("backbone '" + backbone_id + "': dimension mismatch (" +
                            std::to_string(table.dim) + " vs " +
                            std::to_string(row.values.size()) + ") at id '" + row.id + "'");
    }
    if (!atlas.contains(row.id)) {
      throw ValidationError("backbone '" + backbone_id + "': unknown record id '" + row.id + "'");
    }
    if (set.find(row.id) != nullptr) {
      throw ValidationError("backbone '" + backbone_id + "': repeated embedding for id '" +
                            row.id + "'");
    }
    if (!std::all_of(row.values.begin(), row.values.end(),
                     [](float x) { return std::isfinite(x); })) {
      throw ValidationError("backbone '" + backbone_id + "': non-finite value for id '" +
                            row.id + "'");
    }
    if (!(squared_norm(row.values) > 0.0)) {
      throw ValidationError("backbone '" + backbone_id + "': zero-norm embedding for id '" +
                            row.id + "'");
    }
    AtlasBuilder::add_row(set, std::move(row));
  }

  CoverageReport coverage{backbone_id, set.size(), {}};
  for (const auto& rec : atlas.records()) {
    if (set.find(rec.record_id) == nullptr) coverage.missing_ids.push_back(rec.record_id);
  }
  AtlasBuilder::put_set(atlas, std::move(set));
  return {std::move(atlas), std::move(coverage)};
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::vector<Violation> validate(const Atlas& atlas) {
  std::vector<Violation> out;

  std::set<std::string, std::less<>> seen;
  for (const auto& rec : atlas.records()) {
    if (!seen.insert(rec.record_id).second) {
      out.push_back({rec.record_id, "", "duplicate record id"});
    }
    if (rec.captions.empty()) out.push_back({rec.record_id, "", "empty caption list"});
    for (std::size_t i = 0; i < rec.captions.size(); ++i) {
      if (trim(rec.captions[i]).empty()) {
        out.push_back({rec.record_id, "", "caption " + std::to_string(i) + " is blank"});
      }
    }
  }

  for (const auto& backbone : atlas.backbones()) {
    const auto& set = *atlas.embeddings(backbone);
    std::set<std::string, std::less<>> ids;
    for (const auto& row : set.rows()) {
      if (!atlas.contains(row.id)) {
        out.push_back({row.id, backbone, "dangling embedding: record id not in atlas"});
      }
      if (!ids.insert(row.id).second) {
        out.push_back({row.id, backbone, "repeated embedding"});
      }
      if (row.values.size() != set.dim()) {
        out.push_back({row.id, backbone,
                       "dimension " + std::to_string(row.values.size()) + " differs from set dim " +
                           std::to_string(set.dim())});
      }
      const bool finite = std::all_of(row.values.begin(), row.values.end(),
                                      [](float x) { return std::isfinite(x); });
      if (!finite) {
        out.push_back({row.id, backbone, "non-finite value"});
      } else if (!(squared_norm(row.values) > 0.0)) {
        out.push_back({row.id, backbone, "zero-norm embedding"});
      }
    }
  }

  out.insert(out.end(), atlas.load_issues().begin(), atlas.load_issues().end());
  return out;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void save_atlas(const Atlas& atlas, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "embeddings");

  std::string records;
  for (const auto& rec : atlas.records()) records += record_to_json(rec).dump() + "\n";
  write_file_atomic(dir / "records.jsonl", records);

  json sets = json::array();
  for (const auto& backbone : atlas.backbones()) {
    const auto& set = *atlas.embeddings(backbone);
    EmbeddingTable table{set.dim(), set.rows()};
    std::ostringstream bin;
    write_embeddings(bin, table, EmbeddingEncoding::kBinary);
    const auto rel = "embeddings/" + backbone + ".emb";
    write_file_atomic(dir / rel, bin.str());
    sets.push_back({{"backbone_id", backbone},
                    {"file", rel},
                    {"dim", set.dim()},
                    {"count", set.size()},
                    {"sha256", sha256_hex(bin.str())}});
  }

  json meta{{"format", kAtlasFormat},
            {"created_at", atlas.meta().created_at},
            {"manifest_checksum", atlas.meta().manifest_checksum},
            {"records",
             {{"file", "records.jsonl"}, {"count", atlas.size()}, {"sha256", sha256_hex(records)}}},
            {"embedding_sets", sets}};
  write_file_atomic(dir / "atlas.json", meta.dump(2) + "\n");
}

Atlas load_atlas(const std::filesystem::path& dir) {
  json meta;
  try {
    meta = json::parse(read_file(dir / "atlas.json"));
  } catch (const json::exception& e) {
    throw ValidationError("atlas.json: " + std::string(e.what()));
  }
  if (meta.value("format", "") != kAtlasFormat) {
    throw ValidationError("atlas.json: unsupported format '" + meta.value("format", "") + "'");
  }

  const auto records_bytes = read_file(dir / meta["records"]["file"].get<std::string>());
  std::istringstream records_in(records_bytes);
  Atlas atlas = ingest_manifest(records_in);
  AtlasBuilder::meta(atlas) = BuildMeta{meta.value("created_at", ""),
                                        meta.value("manifest_checksum", "")};
  auto& issues = AtlasBuilder::load_issues(atlas);
  if (sha256_hex(records_bytes) != meta["records"].value("sha256", "")) {
    issues.push_back({"", "", "records.jsonl checksum mismatch"});
  }

  for (const auto& entry : meta["embedding_sets"]) {
    const auto backbone = entry["backbone_id"].get<std::string>();
    const auto bytes = read_file(dir / entry["file"].get<std::string>());
    if (sha256_hex(bytes) != entry.value("sha256", "")) {
      issues.push_back({"", backbone, entry["file"].get<std::string>() + " checksum mismatch"});
    }
    std::istringstream in(bytes);
    auto table = read_embeddings(in);
    EmbeddingSet set(backbone, table.dim);
    for (auto& row : table.rows) AtlasBuilder::add_row(set, std::move(row));
    AtlasBuilder::put_set(atlas, std::move(set));
  }
  return atlas;
}

}  // namespace rgg
