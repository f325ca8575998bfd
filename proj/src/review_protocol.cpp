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

#include "rgg/review_protocol.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <set>

#include "rgg/support.hpp"

namespace rgg {

using nlohmann::json;

namespace {

std::string case_id_for(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "case-%03zu", index + 1);
  return buf;
}

std::uint64_t assignment_seed_for(std::uint64_t seed, std::size_t index) {
  return splitmix64(seed ^ splitmix64(0x5ca1ab1eULL + index));
}

}  // namespace

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

json ReviewCase::blinded() const {
  return {{"case_id", case_id}, {"image_uri", image_uri}, {"slot_a", slot_a}, {"slot_b", slot_b}};
}

std::vector<ReviewCase> sample_cases(
    const SystemRun& first, const SystemRun& second, std::size_t n, std::uint64_t seed,
    const std::map<std::string, std::string, std::less<>>& image_uris) {
  if (first.system_id.empty() || second.system_id.empty() ||
      first.system_id == second.system_id) {
    throw ValidationError("sample_cases: runs need two distinct, non-empty system ids");
  }
  if (n == 0) throw ValidationError("sample_cases: n must be at least 1");

  std::vector<std::string> shared;
  for (const auto& [id, _] : first.captions) {
    if (second.captions.find(id) != second.captions.end()) shared.push_back(id);
  }
  if (shared.empty()) {
    throw ValidationError("sample_cases: runs '" + first.system_id + "' and '" +
                          second.system_id + "' share no query ids");
  }
  if (n > shared.size()) {
    throw ValidationError("sample_cases: n = " + std::to_string(n) + " exceeds shared coverage " +
                          std::to_string(shared.size()));
  }

  // Partial Fisher-Yates over the sorted shared ids.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, shared.size() - 1);
    std::swap(shared[i], shared[pick(rng)]);
  }

  std::vector<ReviewCase> cases;
  cases.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = shared[i];
    ReviewCase c;
    c.case_id = case_id_for(i);
    c.query_ref = id;
    if (auto it = image_uris.find(id); it != image_uris.end()) c.image_uri = it->second;
    c.assignment_seed = assignment_seed_for(seed, i);
    const bool first_in_a = (splitmix64(c.assignment_seed) & 1ULL) == 0;
    const SystemRun& a = first_in_a ? first : second;
    const SystemRun& b = first_in_a ? second : first;
    c.slot_a = a.captions.find(id)->second;
    c.slot_b = b.captions.find(id)->second;
    c.blind_map = {a.system_id, b.system_id};
    cases.push_back(std::move(c));
  }
  return cases;
}

json cases_to_json(const std::vector<ReviewCase>& cases) {
  json arr = json::array();
  for (const auto& c : cases) {
    arr.push_back({{"case_id", c.case_id},
                   {"query_ref", c.query_ref},
                   {"image_uri", c.image_uri},
                   {"slot_a", c.slot_a},
                   {"slot_b", c.slot_b},
                   {"blind_map", {{"a", c.blind_map[0]}, {"b", c.blind_map[1]}}},
                   {"assignment_seed", c.assignment_seed}});
  }
  return {{"format", "rgg-review-cases/1"}, {"cases", std::move(arr)}};
}

std::vector<ReviewCase> cases_from_json(const json& j) {
  std::vector<ReviewCase> out;
  try {
    for (const auto& c : j.at("cases")) {
      ReviewCase rc;
      rc.case_id = c.at("case_id").get<std::string>();
      rc.query_ref = c.at("query_ref").get<std::string>();
      rc.image_uri = c.value("image_uri", "");
      rc.slot_a = c.at("slot_a").get<std::string>();
      rc.slot_b = c.at("slot_b").get<std::string>();
      rc.blind_map = {c.at("blind_map").at("a").get<std::string>(),
                      c.at("blind_map").at("b").get<std::string>()};
      rc.assignment_seed = c.value("assignment_seed", std::uint64_t{0});
      if (rc.blind_map[0] == rc.blind_map[1]) {
        throw ValidationError("case '" + rc.case_id + "': both slots map to one system");
      }
      out.push_back(std::move(rc));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("review cases: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Judgments
// ---------------------------------------------------------------------------

json to_json(const Judgment& j) {
  return {{"case_id", j.case_id},       {"reviewer_id", j.reviewer_id},
          {"preferred_slot", j.preferred_slot}, {"ratings", j.ratings},
          {"comment", j.comment},       {"submitted_at", j.submitted_at},
          {"version", j.version}};
}

Judgment judgment_from_json(const json& j) {
  if (!j.is_object()) {
    throw ReviewError(ErrorKind::kValidation, "invalid_body", "judgment must be a JSON object");
  }
  Judgment out;
  try {
    out.case_id = j.value("case_id", "");
    out.reviewer_id = j.value("reviewer_id", "");
    out.preferred_slot = j.value("preferred_slot", "");
    out.comment = j.value("comment", "");
    out.submitted_at = j.value("submitted_at", "");
    out.version = j.value("version", 0);
    if (j.contains("ratings")) {
      if (!j["ratings"].is_object()) {
        throw ReviewError(ErrorKind::kValidation, "invalid_body", "'ratings' must be an object");
      }
      for (const auto& [k, v] : j["ratings"].items()) {
        if (!v.is_number_integer()) {
          throw ReviewError(ErrorKind::kValidation, "invalid_rating",
                            "rating '" + k + "' must be an integer");
        }
        out.ratings[k] = v.get<int>();
      }
    }
  } catch (const json::exception& e) {
    throw ReviewError(ErrorKind::kValidation, "invalid_body", e.what());
  }
  return out;
}

JudgmentStore::JudgmentStore(std::filesystem::path log_path, std::vector<std::string> case_ids)
    : log_path_(std::move(log_path)), case_ids_(std::move(case_ids)) {
  if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());

  if (std::ifstream in(log_path_); in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      try {
        auto j = judgment_from_json(json::parse(line));
        history_[{j.case_id, j.reviewer_id}].push_back(std::move(j));
      } catch (const std::exception& e) {
        throw ValidationError("judgment log " + log_path_.string() + " line " +
                              std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  fd_ = ::open(log_path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw IoError("cannot open judgment log " + log_path_.string() + ": " + std::strerror(errno));
  }
}

JudgmentStore::~JudgmentStore() {
  if (fd_ >= 0) ::close(fd_);
}

void JudgmentStore::validate(const Judgment& j) const {
  if (std::find(case_ids_.begin(), case_ids_.end(), j.case_id) == case_ids_.end()) {
    throw ReviewError(ErrorKind::kNotFound, "unknown_case", "unknown case '" + j.case_id + "'");
  }
  if (trim(j.reviewer_id).empty()) {
    throw ReviewError(ErrorKind::kValidation, "missing_reviewer", "reviewer_id is required");
  }
  if (j.preferred_slot != "a" && j.preferred_slot != "b" && j.preferred_slot != kNeither) {
    throw ReviewError(ErrorKind::kValidation, "invalid_preference",
                      "preferred_slot must be 'a', 'b' or 'neither'");
  }
  for (auto criterion : kReviewCriteria) {
    auto it = j.ratings.find(std::string(criterion));
    if (it == j.ratings.end()) {
      throw ReviewError(ErrorKind::kValidation, "incomplete_ratings",
                        "missing rating for criterion '" + std::string(criterion) + "'");
    }
    if (it->second < kMinRating || it->second > kMaxRating) {
      throw ReviewError(ErrorKind::kValidation, "invalid_rating",
                        "rating for '" + std::string(criterion) + "' must be within 1..5");
    }
  }
  for (const auto& [criterion, _] : j.ratings) {
    if (std::find(kReviewCriteria.begin(), kReviewCriteria.end(), criterion) ==
        kReviewCriteria.end()) {
      throw ReviewError(ErrorKind::kValidation, "invalid_rating",
                        "unknown criterion '" + criterion + "'");
    }
  }
}

JudgmentAck JudgmentStore::record(Judgment judgment) {
  validate(judgment);
  std::unique_lock lock(mutex_);

  auto& versions = history_[{judgment.case_id, judgment.reviewer_id}];
  if (!versions.empty()) {
    const auto& last = versions.back();
    if (last.preferred_slot == judgment.preferred_slot && last.ratings == judgment.ratings &&
        last.comment == judgment.comment) {
      return {last.case_id, last.reviewer_id, last.version, last.submitted_at, true};
    }
  }
  judgment.version = versions.empty() ? 1 : versions.back().version + 1;
  if (judgment.submitted_at.empty()) judgment.submitted_at = utc_timestamp();

  const auto line = to_json(judgment).dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const auto rc = ::write(fd_, line.data() + written, line.size() - written);
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw IoError("judgment log write failed: " + std::string(std::strerror(errno)));
    }
    written += static_cast<std::size_t>(rc);
  }
  if (::fsync(fd_) != 0) {
    throw IoError("judgment log fsync failed: " + std::string(std::strerror(errno)));
  }

  versions.push_back(judgment);
  return {judgment.case_id, judgment.reviewer_id, judgment.version, judgment.submitted_at, false};
}

std::optional<Judgment> JudgmentStore::current(std::string_view case_id,
                                               std::string_view reviewer_id) const {
  std::shared_lock lock(mutex_);
  auto it = history_.find({std::string(case_id), std::string(reviewer_id)});
  if (it == history_.end() || it->second.empty()) return std::nullopt;
  return it->second.back();
}

std::vector<Judgment> JudgmentStore::audit_trail(std::string_view case_id,
                                                 std::string_view reviewer_id) const {
  std::shared_lock lock(mutex_);
  auto it = history_.find({std::string(case_id), std::string(reviewer_id)});
  return it == history_.end() ? std::vector<Judgment>{} : it->second;
}

std::vector<Judgment> JudgmentStore::all_current() const {
  std::shared_lock lock(mutex_);
  std::vector<Judgment> out;
  for (const auto& [_, versions] : history_) {
    if (!versions.empty()) out.push_back(versions.back());
  }
  return out;
}

std::size_t JudgmentStore::judged_count(std::string_view reviewer_id) const {
  std::shared_lock lock(mutex_);
  return static_cast<std::size_t>(
      std::count_if(history_.begin(), history_.end(), [&](const auto& entry) {
        return entry.first.second == reviewer_id && !entry.second.empty();
      }));
}

// ---------------------------------------------------------------------------
// Unblinding
// ---------------------------------------------------------------------------

ReviewReport unblind_aggregate(const JudgmentStore& store, const std::vector<ReviewCase>& cases) {
  ReviewReport report;
  report.n_cases = cases.size();

  std::set<std::string> systems;
  for (const auto& c : cases) systems.insert(c.blind_map.begin(), c.blind_map.end());
  report.systems.assign(systems.begin(), systems.end());
  for (const auto& s : report.systems) report.overall.by_system[s] = 0;

  std::map<std::string, std::vector<Judgment>> by_case;
  std::set<std::string> reviewers;
  for (auto& j : store.all_current()) {
    reviewers.insert(j.reviewer_id);
    by_case[j.case_id].push_back(std::move(j));
  }
  for (const auto& r : reviewers) {
    auto& tally = report.per_reviewer[r];
    for (const auto& s : report.systems) tally.by_system[s] = 0;
  }

  std::map<std::string, std::map<std::string, std::pair<double, int>>> rating_sums;
  for (const auto& c : cases) {
    auto it = by_case.find(c.case_id);
    std::set<std::string> judged_by;
    if (it == by_case.end()) {
      report.overall.pending.push_back(c.case_id);
      report.rows.push_back({c.case_id, c.query_ref, c.blind_map[0], c.blind_map[1], "", "", "",
                             {}, ""});
    } else {
      auto judgments = it->second;
      std::sort(judgments.begin(), judgments.end(),
                [](const Judgment& a, const Judgment& b) { return a.reviewer_id < b.reviewer_id; });
      for (const auto& j : judgments) {
        judged_by.insert(j.reviewer_id);
        std::string preferred;
        if (j.preferred_slot == "a") {
          preferred = c.blind_map[0];
        } else if (j.preferred_slot == "b") {
          preferred = c.blind_map[1];
        } else {
          preferred = std::string(kNeither);
        }
        auto& tally = report.per_reviewer[j.reviewer_id];
        if (preferred == kNeither) {
          ++report.overall.neither;
          ++tally.neither;
        } else {
          ++report.overall.by_system[preferred];
          ++tally.by_system[preferred];
        }
        for (const auto& [criterion, value] : j.ratings) {
          auto& acc = rating_sums[preferred][criterion];
          acc.first += value;
          acc.second += 1;
        }
        report.rows.push_back({c.case_id, c.query_ref, c.blind_map[0], c.blind_map[1],
                               j.reviewer_id, j.preferred_slot, preferred, j.ratings, j.comment});
      }
    }
    for (const auto& r : reviewers) {
      if (!judged_by.contains(r)) report.per_reviewer[r].pending.push_back(c.case_id);
    }
  }

  for (const auto& [system, criteria] : rating_sums) {
    for (const auto& [criterion, acc] : criteria) {
      report.criterion_means[system][criterion] = acc.first / acc.second;
    }
  }
  return report;
}

namespace {

json tally_json(const PreferenceTally& t) {
  return {{"preferences", t.by_system}, {"neither", t.neither}, {"pending", t.pending}};
}

}  // namespace

json to_json(const ReviewReport& r) {
  json per_reviewer = json::object();
  for (const auto& [id, t] : r.per_reviewer) per_reviewer[id] = tally_json(t);
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"case_id", row.case_id},
                    {"query_ref", row.query_ref},
                    {"slot_a_system", row.system_a},
                    {"slot_b_system", row.system_b},
                    {"reviewer_id", row.reviewer_id},
                    {"preferred_slot", row.preferred_slot},
                    {"preferred_system", row.preferred_system},
                    {"ratings", row.ratings},
                    {"comment", row.comment},
                    {"status", row.reviewer_id.empty() ? "pending" : "judged"}});
  }
  return {{"n_cases", r.n_cases},
          {"systems", r.systems},
          {"overall", tally_json(r.overall)},
          {"per_reviewer", std::move(per_reviewer)},
          {"criterion_means", r.criterion_means},
          {"cases", std::move(rows)},
          {"metadata",
           {{"rating_scale", "ordinal 1-5 per criterion; scale chosen by this tool, not prescribed"},
            {"ratings_attributed_to", "preferred system"},
            {"criteria", kReviewCriteria}}}};
}

}  // namespace rgg
