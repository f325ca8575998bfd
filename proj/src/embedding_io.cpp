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

#include "rgg/embedding_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "rgg/error.hpp"
#include "rgg/support.hpp"

namespace rgg {
namespace {

static_assert(std::endian::native == std::endian::little,
              "embedding codec assumes a little-endian host");
static_assert(std::numeric_limits<float>::is_iec559);

template <typename T>
bool read_le(std::istream& in, T& value) {
  std::array<char, sizeof(T)> buf{};
  in.read(buf.data(), buf.size());
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) return false;
  std::memcpy(&value, buf.data(), sizeof(T));
  return true;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

EmbeddingTable read_embeddings(std::istream& in) {
  std::array<char, 8> head{};
  in.read(head.data(), head.size());
  const auto got = in.gcount();
  in.clear();
  in.seekg(0, std::ios::beg);
  if (got == 8 && std::string_view(head.data(), 8) == kEmbeddingMagic) {
    return read_embeddings_binary(in);
  }
  return read_embeddings_text(in);
}

EmbeddingTable read_embeddings_binary(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 8 || std::string_view(magic.data(), 8) != kEmbeddingMagic) {
    throw ValidationError("embedding file: bad magic");
  }
  EmbeddingTable table;
  if (!read_le(in, table.dim)) throw ValidationError("embedding file: truncated header");

  std::size_t record = 0;
  while (true) {
    if (in.peek() == std::char_traits<char>::eof()) break;
    std::uint16_t id_len = 0;
    ++record;
    if (!read_le(in, id_len)) {
      throw ValidationError("embedding file: truncated id length in record " + std::to_string(record));
    }
    EmbeddingRow row;
    row.id.resize(id_len);
    in.read(row.id.data(), id_len);
    if (in.gcount() != id_len) {
      throw ValidationError("embedding file: truncated id in record " + std::to_string(record));
    }
    row.values.resize(table.dim);
    const auto bytes = static_cast<std::streamsize>(table.dim * sizeof(float));
    in.read(reinterpret_cast<char*>(row.values.data()), bytes);
    if (in.gcount() != bytes) {
      throw ValidationError("embedding file: truncated values for id '" + row.id + "'");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

EmbeddingTable read_embeddings_text(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("embedding file line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("values") || !obj["values"].is_array()) {
      throw ValidationError("embedding file line " + std::to_string(line_no) +
                            ": expected {\"id\": string, \"values\": array}");
    }
    EmbeddingRow row;
    row.id = obj["id"].get<std::string>();
    for (const auto& v : obj["values"]) {
      if (!v.is_number()) {
        throw ValidationError("embedding file line " + std::to_string(line_no) +
                              ": non-numeric value");
      }
      row.values.push_back(static_cast<float>(v.get<double>()));
    }
    const auto dim = static_cast<std::uint32_t>(row.values.size());
    if (table.rows.empty()) {
      table.dim = dim;
    } else if (dim != table.dim) {
      throw ValidationError("embedding file line " + std::to_string(line_no) +
                            ": dimension mismatch (expected " + std::to_string(table.dim) +
                            ", got " + std::to_string(dim) + ") for id '" + row.id + "'");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table, EmbeddingEncoding encoding) {
  if (encoding == EmbeddingEncoding::kText) {
    for (const auto& row : table.rows) {
      nlohmann::json obj{{"id", row.id}, {"values", row.values}};
      out << obj.dump() << '\n';
    }
    return;
  }
  out.write(kEmbeddingMagic.data(), kEmbeddingMagic.size());
  write_le(out, table.dim);
  for (const auto& row : table.rows) {
    if (row.id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw ValidationError("embedding id longer than 65535 bytes");
    }
    if (row.values.size() != table.dim) {
      throw ValidationError("embedding '" + row.id + "' has dim " +
                            std::to_string(row.values.size()) + ", table dim is " +
                            std::to_string(table.dim));
    }
    write_le(out, static_cast<std::uint16_t>(row.id.size()));
    out.write(row.id.data(), static_cast<std::streamsize>(row.id.size()));
    out.write(reinterpret_cast<const char*>(row.values.data()),
              static_cast<std::streamsize>(row.values.size() * sizeof(float)));
  }
}

}  // namespace rgg
