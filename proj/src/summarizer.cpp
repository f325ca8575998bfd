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

#include "rgg/summarizer.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

#include "rgg/http_client.hpp"
#include "rgg/support.hpp"

namespace rgg {
namespace {

constexpr std::string_view kSectionOpen = "{{#sources}}";
constexpr std::string_view kSectionClose = "{{/sources}}";

constexpr std::string_view kBuiltinTemplate =
    "You are summarizing expert histopathology captions retrieved for a query image.\n"
    "The {{k}} captions below belong to the most visually similar archived cases,\n"
    "ranked from most to least similar.\n"
    "\n"
    "{{#sources}}Source {{rank}}:\n"
    "{{caption}}\n"
    "\n"
    "{{/sources}}"
    "Instructions:\n"
    "- Write one concise caption for the query image.\n"
    "- Use only findings, terms and diagnoses that appear in the sources above.\n"
    "- Do not add any claim, label or detail that is not stated in at least one source.\n"
    "- Where the sources disagree, keep the wording they share and do not commit to a\n"
    "  single diagnosis.\n"
    "\n"
    "Caption:\n";

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos;
       pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

void check_template(const PromptTemplate& t) {
  const auto open = t.text.find(kSectionOpen);
  const auto close = t.text.find(kSectionClose);
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw ValidationError("template '" + t.template_id +
                          "': needs a {{#sources}} ... {{/sources}} section");
  }
  const auto body = std::string_view(t.text).substr(open, close - open);
  if (body.find("{{caption}}") == std::string_view::npos) {
    throw ValidationError("template '" + t.template_id +
                          "': {{caption}} must appear inside the sources section");
  }
}

std::vector<BundleItem> canonical_items(const CaptionBundle& bundle) {
  auto items = bundle.items;
  std::stable_sort(items.begin(), items.end(), [](const BundleItem& a, const BundleItem& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.record_id != b.record_id) return a.record_id < b.record_id;
    return a.caption < b.caption;
  });
  return items;
}

}  // namespace

std::vector<std::string> CaptionBundle::record_ids() const {
  std::vector<std::string> out;
  std::set<std::string, std::less<>> seen;
  for (const auto& item : items) {
    if (seen.insert(item.record_id).second) out.push_back(item.record_id);
  }
  return out;
}

CaptionBundle make_bundle(const RetrievalResult& retrieval, const Atlas& atlas) {
  CaptionBundle bundle;
  bundle.query_ref = retrieval.query_ref;
  for (const auto& n : retrieval.neighbors) {
    const auto* rec = atlas.find(n.record_id);
    if (rec == nullptr) {
      throw NotFoundError("retrieved record '" + n.record_id + "' is not in the atlas");
    }
    for (const auto& caption : rec->captions) {
      bundle.items.push_back({n.record_id, n.similarity, caption});
    }
  }
  return bundle;
}

CaptionBundle dedup_captions(CaptionBundle bundle) {
  std::set<std::string, std::less<>> seen;
  std::vector<BundleItem> kept;
  kept.reserve(bundle.items.size());
  for (auto& item : bundle.items) {
    if (seen.insert(normalize_whitespace_lower(item.caption)).second) {
      kept.push_back(std::move(item));
    }
  }
  bundle.items = std::move(kept);
  bundle.dedup_applied = true;
  return bundle;
}

// ---------------------------------------------------------------------------
// Prompt
// ---------------------------------------------------------------------------

std::string PromptTemplate::checksum() const { return sha256_hex(text); }

PromptTemplate PromptTemplate::builtin() {
  return {std::string(kDefaultTemplateId), std::string(kBuiltinTemplate)};
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  PromptTemplate t{path.stem().string(), read_file(path)};
  check_template(t);
  return t;
}

std::string build_prompt(const CaptionBundle& bundle, const PromptTemplate& tmpl) {
  if (bundle.items.empty()) throw ValidationError("build_prompt: empty caption bundle");
  check_template(tmpl);

  const auto open = tmpl.text.find(kSectionOpen);
  const auto close = tmpl.text.find(kSectionClose);
  std::string head = tmpl.text.substr(0, open);
  const std::string section =
      tmpl.text.substr(open + kSectionOpen.size(), close - open - kSectionOpen.size());
  std::string tail = tmpl.text.substr(close + kSectionClose.size());

  const auto k = std::to_string(bundle.items.size());
  replace_all(head, "{{k}}", k);
  replace_all(tail, "{{k}}", k);

  std::string out = head;
  for (std::size_t i = 0; i < bundle.items.size(); ++i) {
    // Substitute {{caption}} last and in one pass so caption text is never
    // re-scanned for placeholders.
    std::string part = section;
    replace_all(part, "{{rank}}", std::to_string(i + 1));
    replace_all(part, "{{k}}", k);
    const auto at = part.find("{{caption}}");
    std::string rendered;
    std::size_t from = 0;
    for (auto pos = at; pos != std::string::npos; pos = part.find("{{caption}}", from)) {
      rendered.append(part, from, pos - from);
      rendered += bundle.items[i].caption;
      from = pos + std::string_view("{{caption}}").size();
    }
    rendered.append(part, from);
    out += rendered;
  }
  out += tail;
  return out;
}

// ---------------------------------------------------------------------------
// Engines
// ---------------------------------------------------------------------------

ExtractiveEngine::ExtractiveEngine(std::size_t budget) : budget_(budget) {
  if (budget_ == 0) throw ValidationError("extractive engine: budget must be at least 1");
}

std::string ExtractiveEngine::id() const {
  return "extractive(budget=" + std::to_string(budget_) + ")";
}

std::string ExtractiveEngine::generate(const CaptionBundle& bundle, const std::string&) const {
  return extract_summary(bundle, budget_);
}

RemoteLlmEngine::RemoteLlmEngine(SummarizerSpec spec) : spec_(std::move(spec)) {
  if (spec_.endpoint.empty()) {
    throw ValidationError("summarizer '" + spec_.engine_id + "': empty endpoint");
  }
}

std::string RemoteLlmEngine::generate(const CaptionBundle&, const std::string& prompt) const {
  nlohmann::json body{{"prompt", prompt},
                      {"max_tokens", spec_.max_tokens},
                      {"temperature", spec_.temperature}};
  const auto reply = post_json(spec_.engine_id, spec_.endpoint, body, spec_.retry);
  if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
    throw ProviderError(spec_.engine_id, "contract violation: reply lacks a 'text' string", false);
  }
  auto text = std::string(trim(reply["text"].get<std::string>()));
  if (text.empty()) throw ProviderError(spec_.engine_id, "contract violation: empty text", false);
  return text;
}

GeneratedCaption summarize(const CaptionBundle& bundle, const SummarizerEngine& engine,
                           const SummarizeOptions& options) {
  const auto prompt = build_prompt(bundle, options.prompt_template);
  GeneratedCaption out;
  out.query_ref = bundle.query_ref;
  try {
    out.text = engine.generate(bundle, prompt);
  } catch (const ProviderError& e) {
    throw SummarizerError(e, bundle);
  }
  if (trim(out.text).empty()) {
    throw ValidationError("summarizer '" + engine.id() + "' produced an empty caption");
  }
  out.provenance = Provenance{options.backbone_id, engine.id(), options.prompt_template.template_id,
                              options.k, bundle.record_ids()};
  out.prompt_checksum = sha256_hex(prompt);
  return out;
}

GeneratedCaption summarize_extractive(const CaptionBundle& bundle, std::size_t budget) {
  return summarize(bundle, ExtractiveEngine(budget));
}

// ---------------------------------------------------------------------------
// Extractive scoring
// ---------------------------------------------------------------------------

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  const auto emit = [&](std::size_t end) {
    const auto s = trim(text.substr(start, end - start));
    if (!s.empty()) out.emplace_back(s);
    start = end;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    const bool at_end = i + 1 == text.size();
    if (at_end || std::isspace(static_cast<unsigned char>(text[i + 1]))) emit(i + 1);
  }
  if (start < text.size()) emit(text.size());
  return out;
}

std::string extract_summary(const CaptionBundle& bundle, std::size_t budget) {
  if (bundle.items.empty()) throw ValidationError("extractive summary: empty caption bundle");
  if (budget == 0) throw ValidationError("extractive summary: budget must be at least 1");

  const auto items = canonical_items(bundle);
  const auto n_items = static_cast<double>(items.size());

  // Document frequency of each token over the bundle's captions.
  std::map<std::string, int, std::less<>> df;
  for (const auto& item : items) {
    auto toks = tokenize(item.caption);
    std::set<std::string> distinct(toks.begin(), toks.end());
    for (const auto& t : distinct) ++df[t];
  }

  struct Candidate {
    std::string text;
    std::size_t position;
    double score;
  };
  std::vector<Candidate> candidates;
  std::set<std::string, std::less<>> seen;
  for (const auto& item : items) {
    const auto higher = std::count_if(items.begin(), items.end(), [&](const BundleItem& o) {
      return o.similarity > item.similarity;
    });
    const double weight = 1.0 / static_cast<double>(1 + higher);
    for (auto& sentence : split_sentences(item.caption)) {
      if (!seen.insert(normalize_whitespace_lower(sentence)).second) continue;
      const auto toks = tokenize(sentence);
      const std::set<std::string> distinct(toks.begin(), toks.end());
      double centrality = 0.0;
      for (const auto& t : distinct) centrality += df.find(t)->second / n_items;
      if (!distinct.empty()) centrality /= static_cast<double>(distinct.size());
      candidates.push_back({std::move(sentence), candidates.size(), weight * centrality});
    }
  }

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].score > candidates[b].score;
  });
  order.resize(std::min(budget, order.size()));
  std::sort(order.begin(), order.end());

  std::string out;
  for (auto i : order) {
    if (!out.empty()) out += ' ';
    out += candidates[i].text;
  }
  return out;
}

}  // namespace rgg
