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

#include <chrono>
#include <string>

#include <json.hpp>

namespace rgg {

/// Attempts are retried only on transport failures (no response, or a 502/
/// 503/504 from a proxy). Backoff doubles after each failed attempt.
struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
  std::chrono::milliseconds timeout{30000};
};

/// POSTs `body` as JSON to `endpoint` (http://host[:port]/path) and returns
/// the parsed JSON reply. Throws ProviderError tagged with `provider_id`:
/// retryable when the transport kept failing, non-retryable for HTTP 4xx or
/// an unparseable body.
nlohmann::json post_json(const std::string& provider_id, const std::string& endpoint,
                         const nlohmann::json& body, const RetryPolicy& policy);

}  // namespace rgg
