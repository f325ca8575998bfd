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

// Single-blind pairwise review of two captioning systems.
//
// sample_cases draws cases from two aligned runs and flips a fair coin per
// case (from the case's own assignment seed) to decide which system fills
// slot A. The slot -> system map is sealed: reviewer-facing payloads carry
// only the case id, image locator and the two captions. Judgments go to an
// append-only log; a resubmission for the same (case, reviewer) becomes a
// new version and the old one stays in the audit trail.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rgg/error.hpp"

namespace rgg {

inline constexpr std::array<std::string_view, 3> kReviewCriteria = {
    "clinical_plausibility", "morphological_fidelity", "descriptive_specificity"};
inline constexpr int kMinRating = 1;
inline constexpr int kMaxRating = 5;
inline constexpr std::string_view kNeither = "neither";

/// Review failure with a machine-readable code ("unknown_case",
/// "incomplete_ratings", "invalid_rating", "invalid_preference", ...).
class ReviewError : public Error {
 public:
  ReviewError(ErrorKind kind, std::string code, const std::string& message)
      : Error(kind, message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Generated captions of one system, keyed by query record id.
struct SystemRun {
  std::string system_id;
  std::map<std::string, std::string, std::less<>> captions;
};

struct ReviewCase {
  std::string case_id;
  std::string query_ref;
  std::string image_uri;
  std::string slot_a;
  std::string slot_b;
  std::array<std::string, 2> blind_map;  // systems behind slot a, slot b (sealed)
  std::uint64_t assignment_seed = 0;

  /// Reviewer-facing view: case_id, image_uri, slot_a, slot_b only.
  nlohmann::json blinded() const;
};

/// Draws `n` distinct shared query ids without replacement (seeded) and
/// assigns slots by a per-case coin. Case order follows the draw.
/// Throws ValidationError for n == 0, n above the shared coverage, or runs
/// that cannot be paired (same system id, no shared ids).
std::vector<ReviewCase> sample_cases(
    const SystemRun& first, const SystemRun& second, std::size_t n, std::uint64_t seed,
    const std::map<std::string, std::string, std::less<>>& image_uris = {});

nlohmann::json cases_to_json(const std::vector<ReviewCase>& cases);
std::vector<ReviewCase> cases_from_json(const nlohmann::json& j);

struct Judgment {
  std::string case_id;
  std::string reviewer_id;
  std::string preferred_slot;  // "a", "b" or "neither"
  std::map<std::string, int> ratings;  // criterion -> 1..5
  std::string comment;
  std::string submitted_at;  // assigned by the store when empty
  int version = 0;           // assigned by the store

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

nlohmann::json to_json(const Judgment& j);
/// Structural parse only; the store applies the protocol checks.
Judgment judgment_from_json(const nlohmann::json& j);

struct JudgmentAck {
  std::string case_id;
  std::string reviewer_id;
  int version = 0;
  std::string submitted_at;
  bool duplicate = false;  // identical resubmission, nothing appended
};

/// Durable judgment store backed by an append-only JSON-lines log. A record
/// is fsync'ed before record() returns. Writers are serialized; readers see
/// committed judgments only.
class JudgmentStore {
 public:
  JudgmentStore(std::filesystem::path log_path, std::vector<std::string> case_ids);
  ~JudgmentStore();
  JudgmentStore(const JudgmentStore&) = delete;
  JudgmentStore& operator=(const JudgmentStore&) = delete;

  /// Throws ReviewError: unknown_case (kNotFound), missing_reviewer,
  /// invalid_preference, incomplete_ratings (names the criterion),
  /// invalid_rating.
  JudgmentAck record(Judgment judgment);

  std::optional<Judgment> current(std::string_view case_id, std::string_view reviewer_id) const;
  std::vector<Judgment> audit_trail(std::string_view case_id, std::string_view reviewer_id) const;
  std::vector<Judgment> all_current() const;
  std::size_t judged_count(std::string_view reviewer_id) const;

 private:
  using Key = std::pair<std::string, std::string>;

  void validate(const Judgment& j) const;

  std::filesystem::path log_path_;
  int fd_ = -1;
  std::vector<std::string> case_ids_;
  mutable std::shared_mutex mutex_;
  std::map<Key, std::vector<Judgment>> history_;
};

struct ReviewRow {
  std::string case_id;
  std::string query_ref;
  std::string system_a;
  std::string system_b;
  std::string reviewer_id;
  std::string preferred_slot;
  std::string preferred_system;  // system id, "neither", or "" when pending
  std::map<std::string, int> ratings;
  std::string comment;
};

struct PreferenceTally {
  std::map<std::string, int> by_system;  // every system present, zeros included
  int neither = 0;
  std::vector<std::string> pending;  // case ids without a judgment
};

struct ReviewReport {
  std::size_t n_cases = 0;
  std::vector<std::string> systems;
  PreferenceTally overall;
  std::map<std::string, PreferenceTally> per_reviewer;
  /// Ratings describe the preferred caption, so they are averaged under the
  /// preferred system (or "neither").
  std::map<std::string, std::map<std::string, double>> criterion_means;
  std::vector<ReviewRow> rows;  // case order, then reviewer id
};

/// Unblinds every current judgment through the sealed slot maps.
ReviewReport unblind_aggregate(const JudgmentStore& store, const std::vector<ReviewCase>& cases);

nlohmann::json to_json(const ReviewReport& report);

}  // namespace rgg
