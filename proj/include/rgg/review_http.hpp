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

// HTTP surface of the review protocol.
//
//   GET  /review/cases?reviewer=ID   blinded case list + progress
//   GET  /review/cases/{case_id}     one blinded case
//   POST /review/judgments           Judgment body -> acknowledgment
//   POST /review/unblind             privileged; "Authorization: Bearer <token>"
//   GET  /healthz
//
// Errors are {"error": {"code": ..., "message": ...}}. Static UI assets are
// served from `static_dir` when set.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rgg/review_protocol.hpp"

namespace rgg {

struct ReviewServiceOptions {
  std::filesystem::path state_dir;  // judgments.jsonl and unblind.log live here
  std::string admin_token;          // required by /review/unblind
  std::filesystem::path static_dir;
};

class ReviewServer {
 public:
  ReviewServer(std::vector<ReviewCase> cases, ReviewServiceOptions options);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds host:port (port 0 picks a free port) and returns the bound port.
  /// Throws IoError when the address is unavailable.
  int bind(const std::string& host, int port);

  /// Serves until stop(); call after bind().
  void run();
  /// run() on a background thread.
  void start();
  /// Stops accepting requests and waits for in-flight handlers.
  void stop();

  const JudgmentStore& store() const;
  const std::vector<ReviewCase>& cases() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rgg
