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

// Small shared helpers: digests, base64, seeded hashing, file IO.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rgg {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::string_view data);
std::string base64_decode(std::string_view text);

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// One step of the splitmix64 mixer; used to derive independent sub-seeds.
std::uint64_t splitmix64(std::uint64_t x);

std::string_view trim(std::string_view s);

/// Lowercased word tokens: maximal runs of ASCII letters/digits or non-ASCII
/// bytes. Everything else (whitespace, punctuation) separates tokens.
std::vector<std::string> tokenize(std::string_view text);
std::string to_lower_ascii(std::string_view s);

/// Lowercase and collapse every whitespace run to one space, trimmed.
std::string normalize_whitespace_lower(std::string_view s);

/// ISO-8601 UTC timestamp with second precision, e.g. 2026-01-31T12:00:00Z.
std::string utc_timestamp();

std::string read_file(const std::filesystem::path& path);

/// Writes via a temp file + rename so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace rgg
