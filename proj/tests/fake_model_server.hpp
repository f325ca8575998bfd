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

// In-process stand-in for a remote embedding / LLM model server.

#include <atomic>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

namespace rgg::testing {

class FakeModelServer {
 public:
  std::atomic<int> embed_dim{4};
  std::atomic<int> fail_first{0};    // answer 503 to this many requests first
  std::atomic<int> status_code{200};  // forced status once failures are used up
  std::atomic<bool> garbage{false};
  std::atomic<int> calls{0};
  std::string llm_text = "Summarized caption.";

  FakeModelServer() {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      if (!preflight(req, res)) return;
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::json values = nlohmann::json::array();
      for (int i = 0; i < embed_dim; ++i) values.push_back(0.5 + i);
      res.set_content(nlohmann::json{{"id", body["id"]}, {"values", values}}.dump(), "application/json");
    });
    server_.Post("/generate", [this](const httplib::Request& req, httplib::Response& res) {
      if (!preflight(req, res)) return;
      res.set_content(nlohmann::json{{"text", llm_text}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeModelServer() {
    server_.stop();
    thread_.join();
  }

  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }
  std::vector<nlohmann::json> bodies() {
    std::lock_guard lock(mutex_);
    return bodies_;
  }

 private:
  bool preflight(const httplib::Request& req, httplib::Response& res) {
    ++calls;
    {
      std::lock_guard lock(mutex_);
      bodies_.push_back(nlohmann::json::parse(req.body, nullptr, false));
    }
    if (fail_first > 0) {
      --fail_first;
      res.status = 503;
      return false;
    }
    if (status_code != 200) {
      res.status = status_code;
      res.set_content("{\"error\":\"forced\"}", "application/json");
      return false;
    }
    if (garbage) {
      res.set_content("not json at all", "text/plain");
      return false;
    }
    return true;
  }

  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mutex_;
  std::vector<nlohmann::json> bodies_;
};

}  // namespace rgg::testing
