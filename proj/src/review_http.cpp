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

#include "rgg/review_http.hpp"

#include <fstream>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "rgg/support.hpp"

namespace rgg {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message) {
  send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kValidation: return 400;
    default: return 500;
  }
}

}  // namespace

struct ReviewServer::Impl {
  Impl(std::vector<ReviewCase> c, ReviewServiceOptions o)
      : cases(std::move(c)), options(std::move(o)), store(options.state_dir / "judgments.jsonl",
                                                          case_ids(cases)) {}

  static std::vector<std::string> case_ids(const std::vector<ReviewCase>& cases) {
    std::vector<std::string> ids;
    for (const auto& c : cases) ids.push_back(c.case_id);
    return ids;
  }

  const ReviewCase* find_case(const std::string& id) const {
    for (const auto& c : cases) {
      if (c.case_id == id) return &c;
    }
    return nullptr;
  }

  void routes() {
    // No SO_REUSEPORT: a busy port must fail to bind.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });

    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });

    server.Get("/review/cases", [this](const httplib::Request& req, httplib::Response& res) {
      const auto reviewer = req.get_param_value("reviewer");
      json list = json::array();
      std::size_t judged = 0;
      for (const auto& c : cases) {
        auto view = c.blinded();
        if (!reviewer.empty()) {
          const bool done = store.current(c.case_id, reviewer).has_value();
          view["judged"] = done;
          judged += done ? 1 : 0;
        }
        list.push_back(std::move(view));
      }
      json body{{"cases", std::move(list)}};
      if (!reviewer.empty()) {
        body["reviewer_id"] = reviewer;
        body["progress"] = {{"judged", judged}, {"total", cases.size()}};
      }
      send_json(res, 200, body);
    });

    server.Get(R"(/review/cases/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 const auto* c = find_case(req.matches[1].str());
                 if (c == nullptr) {
                   send_error(res, 404, "unknown_case", "unknown case '" + req.matches[1].str() + "'");
                   return;
                 }
                 auto view = c->blinded();
                 const auto reviewer = req.get_param_value("reviewer");
                 if (!reviewer.empty()) {
                   view["judged"] = store.current(c->case_id, reviewer).has_value();
                 }
                 send_json(res, 200, view);
               });

    server.Post("/review/judgments", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error&) {
        send_error(res, 400, "invalid_body", "request body is not valid JSON");
        return;
      }
      try {
        auto judgment = judgment_from_json(body);
        judgment.version = 0;
        judgment.submitted_at.clear();  // server clock is authoritative
        const auto ack = store.record(std::move(judgment));
        send_json(res, 200,
                  {{"status", "ok"},
                   {"case_id", ack.case_id},
                   {"reviewer_id", ack.reviewer_id},
                   {"version", ack.version},
                   {"submitted_at", ack.submitted_at},
                   {"duplicate", ack.duplicate}});
      } catch (const ReviewError& e) {
        send_error(res, status_for(e.kind()), e.code(), e.what());
      } catch (const Error& e) {
        send_error(res, 500, "storage_error", e.what());
      }
    });

    server.Post("/review/unblind", [this](const httplib::Request& req, httplib::Response& res) {
      const auto auth = req.get_header_value("Authorization");
      const std::string expected = "Bearer " + options.admin_token;
      if (options.admin_token.empty() || auth != expected) {
        send_error(res, 401, "unauthorized", "unblinding requires the admin token");
        return;
      }
      {
        std::lock_guard lock(log_mutex);
        std::ofstream log(options.state_dir / "unblind.log", std::ios::app);
        log << utc_timestamp() << " unblind from " << req.remote_addr << "\n";
      }
      send_json(res, 200, to_json(unblind_aggregate(store, cases)));
    });

    if (!options.static_dir.empty()) {
      if (!server.set_mount_point("/", options.static_dir.string())) {
        throw IoError("static directory not found: " + options.static_dir.string());
      }
    }
  }

  std::vector<ReviewCase> cases;
  ReviewServiceOptions options;
  JudgmentStore store;
  httplib::Server server;
  std::mutex log_mutex;
  std::thread worker;
};

ReviewServer::ReviewServer(std::vector<ReviewCase> cases, ReviewServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(cases), std::move(options))) {
  impl_->routes();
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port) + " (address in use?)");
  }
  return bound;
}

void ReviewServer::run() { impl_->server.listen_after_bind(); }

void ReviewServer::start() {
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void ReviewServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

const JudgmentStore& ReviewServer::store() const { return impl_->store; }
const std::vector<ReviewCase>& ReviewServer::cases() const { return impl_->cases; }

}  // namespace rgg
