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

#include "rgg/http_client.hpp"

#include <thread>

#include <httplib.h>

#include "rgg/error.hpp"

namespace rgg {
namespace {

struct SplitUrl {
  std::string base;  // scheme://host:port
  std::string path;
};

SplitUrl split_url(const std::string& provider_id, const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos || endpoint.compare(0, scheme_end, "http") != 0) {
    throw ProviderError(provider_id, "unsupported endpoint '" + endpoint + "' (expected http://)",
                        false);
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

bool transient_status(int status) { return status == 502 || status == 503 || status == 504; }

}  // namespace

nlohmann::json post_json(const std::string& provider_id, const std::string& endpoint,
                         const nlohmann::json& body, const RetryPolicy& policy) {
  const auto url = split_url(provider_id, endpoint);
  const auto payload = body.dump();
  auto backoff = policy.initial_backoff;
  std::string last_failure = "no attempt made";

  for (int attempt = 1; attempt <= std::max(1, policy.attempts); ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(url.base);
    const auto secs = policy.timeout.count() / 1000;
    const auto usecs = (policy.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    auto res = client.Post(url.path, payload, "application/json");
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (transient_status(res->status)) {
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw ProviderError(provider_id, "HTTP " + std::to_string(res->status) + ": " + res->body,
                          false);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
      throw ProviderError(provider_id, "response body is not valid JSON", false);
    }
  }
  throw ProviderError(provider_id,
                      "unreachable after " + std::to_string(policy.attempts) +
                          " attempts (" + last_failure + ")",
                      true);
}

}  // namespace rgg
