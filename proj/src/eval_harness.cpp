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

#include "rgg/eval_harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include "rgg/error.hpp"
#include "rgg/support.hpp"
#include "rgg/vector_index.hpp"

namespace rgg {
namespace {

double mean_of_sorted(std::span<const double> sorted) {
  double sum = 0.0;
  for (double x : sorted) sum += x;
  return sum / static_cast<double>(sorted.size());
}

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile_sorted(std::span<const double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string fixed4(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

// Display width of a UTF-8 string, counting code points.
std::size_t display_width(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
}

std::string pad(std::string_view s, std::size_t width) {
  std::string out(s);
  out.append(width - std::min(width, display_width(s)), ' ');
  return out;
}

std::string ci_label(double level) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g%% CI", level * 100.0);
  return buf;
}

}  // namespace

double score_pair(const EmbeddingProvider& scorer, std::string_view generated,
                  std::string_view reference) {
  if (trim(generated).empty()) throw ValidationError("score_pair: generated text is empty");
  if (trim(reference).empty()) throw ValidationError("score_pair: reference text is empty");
  const auto g = scorer.embed({"generated", Modality::kText, std::string(generated)});
  const auto r = scorer.embed({"reference", Modality::kText, std::string(reference)});
  return cosine(g.embedding.values, r.embedding.values);
}

Interval bootstrap_ci(std::span<const double> scores, double level, std::uint32_t resamples,
                      std::uint64_t seed) {
  if (scores.empty()) throw ValidationError("bootstrap_ci: no scores");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("bootstrap_ci: level must be in (0, 1)");
  if (resamples == 0) throw ValidationError("bootstrap_ci: resamples must be at least 1");

  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += sorted[pick(rng)];
    m = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  return {quantile_sorted(means, tail), quantile_sorted(means, 1.0 - tail)};
}

EvalSummary evaluate_run(const std::vector<EvalRecord>& records, const std::string& run_id,
                         std::uint64_t seed, const EvalOptions& options) {
  if (records.empty()) throw ValidationError("evaluate_run '" + run_id + "': no records");
  std::vector<double> scores;
  scores.reserve(records.size());
  for (const auto& r : records) {
    if (!(r.score >= -1.0 && r.score <= 1.0)) {
      throw ValidationError("evaluate_run '" + run_id + "': score for '" + r.query_ref +
                            "' outside [-1, 1]");
    }
    scores.push_back(r.score);
  }
  std::sort(scores.begin(), scores.end());

  EvalSummary s;
  s.run_id = run_id;
  s.n = scores.size();
  s.mean = mean_of_sorted(scores);
  const auto ci = bootstrap_ci(scores, options.ci_level, options.resamples, seed);
  s.ci_low = std::min(ci.low, s.mean);
  s.ci_high = std::max(ci.high, s.mean);
  s.ci_level = options.ci_level;
  s.resamples = options.resamples;
  s.seed = seed;
  s.scorer_provider = records.front().scorer_provider;
  return s;
}

Comparison compare(const EvalSummary& candidate, const EvalSummary& baseline) {
  if (candidate.ci_level != baseline.ci_level) {
    throw ValidationError("compare: CI levels differ (" + candidate.run_id + " vs " +
                          baseline.run_id + ")");
  }
  Comparison c;
  c.candidate = candidate.run_id;
  c.baseline = baseline.run_id;
  c.delta = candidate.mean - baseline.mean;
  c.ci_overlap = std::max(candidate.ci_low, baseline.ci_low) <=
                 std::min(candidate.ci_high, baseline.ci_high);
  return c;
}

std::string format_delta(double delta) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.4f", delta);
  std::string out = buf;
  if (out == "-0.0000") out = "+0.0000";
  return out;
}

TableOutput emit_table(const std::vector<EvalSummary>& summaries, const std::string& baseline) {
  const auto base_it = std::find_if(summaries.begin(), summaries.end(),
                                    [&](const EvalSummary& s) { return s.run_id == baseline; });
  if (base_it == summaries.end()) {
    throw ValidationError("emit_table: baseline '" + baseline + "' not among the summaries");
  }
  const EvalSummary& base = *base_it;

  std::vector<const EvalSummary*> rows;
  for (const auto& s : summaries) {
    if (&s != &base) rows.push_back(&s);
  }
  std::sort(rows.begin(), rows.end(), [](const EvalSummary* a, const EvalSummary* b) {
    if (a->mean != b->mean) return a->mean > b->mean;
    return a->run_id < b->run_id;
  });
  rows.insert(rows.begin(), &base);

  std::vector<std::array<std::string, 4>> cells;
  cells.push_back({"Model", "Cosine", ci_label(base.ci_level), "\xCE\x94 vs " + baseline});
  nlohmann::json data{{"baseline", baseline},
                      {"ci_level", base.ci_level},
                      {"ci_method", base.ci_method},
                      {"rows", nlohmann::json::array()}};
  for (const auto* s : rows) {
    const bool is_base = s == &base;
    const auto cmp = is_base ? Comparison{} : compare(*s, base);
    cells.push_back({s->run_id, fixed4(s->mean),
                     "[" + fixed4(s->ci_low) + ", " + fixed4(s->ci_high) + "]",
                     is_base ? std::string("--") : format_delta(cmp.delta)});
    nlohmann::json row{{"model", s->run_id},
                       {"n", s->n},
                       {"cosine", s->mean},
                       {"ci_low", s->ci_low},
                       {"ci_high", s->ci_high}};
    row["delta"] = is_base ? nlohmann::json(nullptr) : nlohmann::json(cmp.delta);
    row["ci_overlap"] = is_base ? nlohmann::json(nullptr) : nlohmann::json(cmp.ci_overlap);
    data["rows"].push_back(std::move(row));
  }

  std::array<std::size_t, 4> widths{};
  for (const auto& r : cells) {
    for (std::size_t c = 0; c < 4; ++c) widths[c] = std::max(widths[c], display_width(r[c]));
  }
  std::string text;
  for (const auto& r : cells) {
    std::string line;
    for (std::size_t c = 0; c < 4; ++c) {
      line += c + 1 < 4 ? pad(r[c], widths[c]) + "  " : r[c];
    }
    text += line + "\n";
  }
  return {std::move(text), std::move(data)};
}

nlohmann::json to_json(const EvalSummary& s) {
  return {{"run_id", s.run_id},       {"n", s.n},
          {"mean", s.mean},           {"ci_low", s.ci_low},
          {"ci_high", s.ci_high},     {"ci_level", s.ci_level},
          {"ci_method", s.ci_method}, {"resamples", s.resamples},
          {"seed", s.seed},           {"scorer_provider", s.scorer_provider}};
}

EvalSummary summary_from_json(const nlohmann::json& j) {
  EvalSummary s;
  s.run_id = j.at("run_id").get<std::string>();
  s.n = j.at("n").get<std::size_t>();
  s.mean = j.at("mean").get<double>();
  s.ci_low = j.at("ci_low").get<double>();
  s.ci_high = j.at("ci_high").get<double>();
  s.ci_level = j.value("ci_level", kDefaultCiLevel);
  s.ci_method = j.value("ci_method", std::string(kCiMethod));
  s.resamples = j.value("resamples", kDefaultResamples);
  s.seed = j.value("seed", std::uint64_t{0});
  s.scorer_provider = j.value("scorer_provider", "");
  return s;
}

nlohmann::json to_json(const Comparison& c) {
  return {{"candidate", c.candidate},
          {"baseline", c.baseline},
          {"delta", c.delta},
          {"delta_4dp", format_delta(c.delta)},
          {"ci_overlap", c.ci_overlap}};
}

std::string scores_to_jsonl(const std::vector<EvalRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += nlohmann::json{{"query_ref", r.query_ref},
                          {"score", r.score},
                          {"scorer_provider", r.scorer_provider}}
               .dump();
    out += '\n';
  }
  return out;
}

}  // namespace rgg
