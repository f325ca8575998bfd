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

// Caption scoring and run aggregation.
//
// A generated caption is scored by the cosine of its text embedding against
// the reference caption's. A run is summarized by its mean score and a
// percentile-bootstrap confidence interval of the mean (seeded, so reruns
// give the same interval). Means are reported on the raw cosine scale.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rgg/embed_gateway.hpp"

namespace rgg {

inline constexpr double kDefaultCiLevel = 0.95;
inline constexpr std::uint32_t kDefaultResamples = 10000;
inline constexpr std::string_view kCiMethod = "percentile-bootstrap";

struct EvalRecord {
  std::string query_ref;
  std::string generated;
  std::string reference;
  double score = 0.0;
  std::string scorer_provider;
};

struct EvalSummary {
  std::string run_id;
  std::size_t n = 0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double ci_level = kDefaultCiLevel;
  std::uint32_t resamples = kDefaultResamples;
  std::uint64_t seed = 0;
  std::string scorer_provider;
  std::string ci_method = std::string(kCiMethod);
};

struct Comparison {
  std::string candidate;
  std::string baseline;
  double delta = 0.0;  // candidate.mean - baseline.mean
  bool ci_overlap = false;
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Cosine between the scorer's embeddings of the two texts. Throws
/// ValidationError if either text is blank.
double score_pair(const EmbeddingProvider& scorer, std::string_view generated,
                  std::string_view reference);

/// Percentile bootstrap of the mean: `resamples` resamples of size n drawn
/// with replacement (mt19937_64 seeded with `seed`), then the (1-level)/2 and
/// 1-(1-level)/2 empirical quantiles (linear interpolation between order
/// statistics). Scores are sorted first, so input order does not matter.
Interval bootstrap_ci(std::span<const double> scores, double level, std::uint32_t resamples,
                      std::uint64_t seed);

struct EvalOptions {
  double ci_level = kDefaultCiLevel;
  std::uint32_t resamples = kDefaultResamples;
};

/// Mean and bootstrap CI over the record scores. The interval is widened to
/// include the mean if a tiny resample count left it outside.
EvalSummary evaluate_run(const std::vector<EvalRecord>& records, const std::string& run_id,
                         std::uint64_t seed, const EvalOptions& options = {});

/// Throws ValidationError when the two summaries use different CI levels.
Comparison compare(const EvalSummary& candidate, const EvalSummary& baseline);

/// Signed, 4 decimals: "+0.1307", "-0.0232".
std::string format_delta(double delta);

struct TableOutput {
  std::string text;     // UTF-8, aligned columns
  nlohmann::json data;  // machine-readable variant
};

/// Baseline row first, then by mean descending, ties by run id ascending.
/// Columns: model, cosine (4 dp), CI, delta vs baseline ("--" for itself).
TableOutput emit_table(const std::vector<EvalSummary>& summaries, const std::string& baseline);

nlohmann::json to_json(const EvalSummary& summary);
EvalSummary summary_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Comparison& comparison);

/// Line-delimited {query_ref, score, scorer_provider}.
std::string scores_to_jsonl(const std::vector<EvalRecord>& records);

}  // namespace rgg
