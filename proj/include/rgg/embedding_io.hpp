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

// Embedding file codecs.
//
// Two on-disk encodings are accepted by the reader (auto-detected):
//
//   text    one JSON object per line: {"id": "...", "values": [0.1, ...]}
//   binary  "RGGEMB01" | u32 dim | repeated { u16 id_len | id | dim x f32 }
//           all integers and floats little-endian
//
// The reader performs structural checks only (framing, consistent dim).
// Semantic checks (finite, non-zero, known ids) belong to the atlas.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rgg {

inline constexpr std::string_view kEmbeddingMagic = "RGGEMB01";

struct EmbeddingRow {
  std::string id;
  std::vector<float> values;
};

struct EmbeddingTable {
  std::uint32_t dim = 0;
  std::vector<EmbeddingRow> rows;
};

enum class EmbeddingEncoding { kBinary, kText };

EmbeddingTable read_embeddings(std::istream& in);
EmbeddingTable read_embeddings_binary(std::istream& in);
EmbeddingTable read_embeddings_text(std::istream& in);

void write_embeddings(std::ostream& out, const EmbeddingTable& table,
                      EmbeddingEncoding encoding = EmbeddingEncoding::kBinary);

}  // namespace rgg
