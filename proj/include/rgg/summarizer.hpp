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

// Turns the captions of retrieved neighbors into one caption.
//
// The language model is used as a summarizer over the retrieved expert text,
// never as a free generator: the prompt numbers every source caption by rank
// and forbids content that is not in the sources. The extractive engine is a
// deterministic offline stand-in that only ever emits source sentences.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rgg/atlas.hpp"
#include "rgg/embed_gateway.hpp"
#include "rgg/error.hpp"
#include "rgg/vector_index.hpp"

namespace rgg {

struct BundleItem {
  std::string record_id;
  double similarity = 0.0;
  std::string caption;

  friend bool operator==(const BundleItem&, const BundleItem&) = default;
};

struct CaptionBundle {
  std::string query_ref;
  std::vector<BundleItem> items;  // similarity descending, ties by record id
  bool dedup_applied = false;

  std::vector<std::string> record_ids() const;  // unique, first-seen order
};

/// Pairs each neighbor with its expert captions (all of them, in record
/// order), keeping retrieval order.
CaptionBundle make_bundle(const RetrievalResult& retrieval, const Atlas& atlas);

/// Drops exact duplicate captions (compared lowercased, whitespace collapsed),
/// keeping the first, i.e. highest-similarity, instance.
CaptionBundle dedup_captions(CaptionBundle bundle);

/// Prompt template. Placeholders: {{k}} anywhere; {{rank}} and {{caption}}
/// inside the repeated {{#sources}} ... {{/sources}} section.
struct PromptTemplate {
  std::string template_id;
  std::string text;

  std::string checksum() const;

  static PromptTemplate builtin();  // "rgg-summary-v1"
  /// Loads a template file; its id is the file stem.
  static PromptTemplate load(const std::filesystem::path& path);
};

inline constexpr std::string_view kDefaultTemplateId = "rgg-summary-v1";

/// Deterministic prompt; every caption appears verbatim, numbered by rank.
/// Throws ValidationError for an empty bundle.
std::string build_prompt(const CaptionBundle& bundle, const PromptTemplate& tmpl);

struct Provenance {
  std::string backbone_id;
  std::string summarizer_id;
  std::string template_id;
  std::uint32_t k = 0;
  std::vector<std::string> source_ids;
};

struct GeneratedCaption {
  std::string query_ref;
  std::string text;
  Provenance provenance;
  std::string prompt_checksum;  // sha256 of the exact prompt text
};

class SummarizerEngine {
 public:
  virtual ~SummarizerEngine() = default;
  virtual std::string id() const = 0;
  virtual std::string generate(const CaptionBundle& bundle, const std::string& prompt) const = 0;
};

inline constexpr std::size_t kDefaultSentenceBudget = 2;

/// Offline engine: picks the highest-scoring source sentences (see
/// extract_summary). Ignores the prompt text.
class ExtractiveEngine final : public SummarizerEngine {
 public:
  explicit ExtractiveEngine(std::size_t budget = kDefaultSentenceBudget);
  std::string id() const override;
  std::string generate(const CaptionBundle& bundle, const std::string& prompt) const override;

 private:
  std::size_t budget_;
};

/// Remote LLM: POST {prompt, max_tokens, temperature} -> {text}.
class RemoteLlmEngine final : public SummarizerEngine {
 public:
  explicit RemoteLlmEngine(SummarizerSpec spec);
  std::string id() const override { return spec_.engine_id; }
  std::string generate(const CaptionBundle& bundle, const std::string& prompt) const override;

 private:
  SummarizerSpec spec_;
};

/// Raised when a remote engine fails for good; carries the bundle so the
/// caller can decide to fall back to the extractive engine explicitly.
class SummarizerError : public ProviderError {
 public:
  SummarizerError(const ProviderError& cause, CaptionBundle bundle)
      : ProviderError(cause), bundle_(std::move(bundle)) {}
  const CaptionBundle& bundle() const { return bundle_; }

 private:
  CaptionBundle bundle_;
};

struct SummarizeOptions {
  std::string backbone_id;
  std::uint32_t k = kDefaultTopK;
  PromptTemplate prompt_template = PromptTemplate::builtin();
};

GeneratedCaption summarize(const CaptionBundle& bundle, const SummarizerEngine& engine,
                           const SummarizeOptions& options = {});

/// summarize() with the extractive engine and the built-in template.
GeneratedCaption summarize_extractive(const CaptionBundle& bundle, std::size_t budget);

/// Splits on '.', '!' or '?' followed by whitespace or end of text. Each
/// sentence is a trimmed substring of `text`, terminator included.
std::vector<std::string> split_sentences(std::string_view text);

/// Extractive scoring. Items are first put in canonical order (similarity
/// desc, record id asc, caption asc) so equal-similarity permutations cannot
/// change the result. Sentences are de-duplicated (normalized text) and
/// scored as
///
///   weight(rank) * centrality
///   weight      = 1 / rank, rank = 1 + #items with strictly higher similarity
///   centrality  = mean over the sentence's distinct tokens of df(t) / N,
///                 df(t) = #items whose caption contains t, N = #items
///
/// The top `budget` sentences (score desc, earlier first on ties) are
/// returned in their original relative order, joined by single spaces.
std::string extract_summary(const CaptionBundle& bundle, std::size_t budget);

}  // namespace rgg
