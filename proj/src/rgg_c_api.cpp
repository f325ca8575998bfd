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

#include "rgg/rgg.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include <json.hpp>

#include "rgg/atlas.hpp"
#include "rgg/error.hpp"
#include "rgg/pipeline.hpp"
#include "rgg/vector_index.hpp"

struct rgg_atlas {
  rgg::Atlas atlas;
};

struct rgg_index {
  rgg::VectorIndex index;
};

struct rgg_server {
  std::unique_ptr<rgg::ReviewServer> server;
  int port = 0;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

rgg_status fail(rgg_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

rgg_status status_of(rgg::ErrorKind kind) {
  switch (kind) {
    case rgg::ErrorKind::kValidation: return RGG_ERR_VALIDATION;
    case rgg::ErrorKind::kProvider: return RGG_ERR_PROVIDER;
    case rgg::ErrorKind::kNotFound: return RGG_ERR_NOT_FOUND;
    case rgg::ErrorKind::kIo: return RGG_ERR_IO;
  }
  return RGG_ERR_INTERNAL;
}

// Runs `body`, translating exceptions into a status and a thread-local message.
template <typename F>
rgg_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return RGG_OK;
  } catch (const rgg::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const json::exception& e) {
    return fail(RGG_ERR_VALIDATION, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(RGG_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(RGG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(RGG_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_request(const char* request_json) {
  try {
    return json::parse(request_json);
  } catch (const json::parse_error& e) {
    throw rgg::ValidationError(std::string("request is not valid JSON: ") + e.what());
  }
}

json retrieval_json(const rgg::RetrievalResult& r) {
  json neighbors = json::array();
  for (const auto& n : r.neighbors) {
    neighbors.push_back({{"record_id", n.record_id}, {"similarity", n.similarity}});
  }
  return {{"query_ref", r.query_ref},
          {"k_requested", r.k_requested},
          {"excluded_ids", r.excluded_ids},
          {"neighbors", std::move(neighbors)}};
}

template <typename Request, typename Command>
rgg_status run_command(const char* request_json, char** out_json, Command command) {
  if (request_json == nullptr || out_json == nullptr) {
    return fail(RGG_ERR_INVALID_ARGUMENT, "null argument");
  }
  *out_json = nullptr;
  return guarded([&] {
    const auto result = command(Request::from_json(parse_request(request_json)));
    *out_json = dup_string(result.dump(2));
  });
}

}  // namespace

extern "C" {

const char* rgg_version(void) { return "1.0.0"; }

const char* rgg_last_error(void) { return g_last_error.c_str(); }

const char* rgg_status_name(rgg_status status) {
  switch (status) {
    case RGG_OK: return "ok";
    case RGG_ERR_INTERNAL: return "internal";
    case RGG_ERR_VALIDATION: return "validation";
    case RGG_ERR_PROVIDER: return "provider";
    case RGG_ERR_NOT_FOUND: return "not_found";
    case RGG_ERR_IO: return "io";
    case RGG_ERR_INVALID_ARGUMENT: return "invalid_argument";
  }
  return "unknown";
}

void rgg_string_free(char* s) { std::free(s); }

rgg_status rgg_atlas_load(const char* dir, rgg_atlas** out) {
  if (dir == nullptr || out == nullptr) return fail(RGG_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new rgg_atlas{rgg::load_atlas(dir)}; });
}

size_t rgg_atlas_size(const rgg_atlas* atlas) { return atlas == nullptr ? 0 : atlas->atlas.size(); }

rgg_status rgg_atlas_validate(const rgg_atlas* atlas, char** out_json) {
  if (atlas == nullptr || out_json == nullptr) {
    return fail(RGG_ERR_INVALID_ARGUMENT, "null argument");
  }
  *out_json = nullptr;
  return guarded([&] {
    json out = json::array();
    for (const auto& v : rgg::validate(atlas->atlas)) {
      out.push_back({{"record_id", v.record_id}, {"backbone_id", v.backbone_id}, {"message", v.message}});
    }
    *out_json = dup_string(out.dump());
  });
}

void rgg_atlas_free(rgg_atlas* atlas) { delete atlas; }

rgg_status rgg_index_build(const rgg_atlas* atlas, const char* backbone_id, rgg_index** out) {
  if (atlas == nullptr || backbone_id == nullptr || out == nullptr) {
    return fail(RGG_ERR_INVALID_ARGUMENT, "null argument");
  }
  *out = nullptr;
  return guarded([&] { *out = new rgg_index{rgg::VectorIndex::build(atlas->atlas, backbone_id)}; });
}

size_t rgg_index_size(const rgg_index* index) { return index == nullptr ? 0 : index->index.size(); }

uint32_t rgg_index_dim(const rgg_index* index) { return index == nullptr ? 0 : index->index.dim(); }

rgg_status rgg_index_query_id(const rgg_index* index, const char* record_id, uint32_t k,
                              char** out_json) {
  if (index == nullptr || record_id == nullptr || out_json == nullptr) {
    return fail(RGG_ERR_INVALID_ARGUMENT, "null argument");
  }
  *out_json = nullptr;
  return guarded([&] {
    const std::string id(record_id);
    *out_json = dup_string(retrieval_json(index->index.top_k(std::string_view(id), k)).dump());
  });
}

rgg_status rgg_index_query_vector(const rgg_index* index, const float* values, size_t dim,
                                  uint32_t k, char** out_json) {
  if (index == nullptr || (values == nullptr && dim > 0) || out_json == nullptr) {
    return fail(RGG_ERR_INVALID_ARGUMENT, "null argument");
  }
  *out_json = nullptr;
  return guarded([&] {
    const std::span<const float> v(values, dim);
    *out_json = dup_string(retrieval_json(index->index.top_k(v, k)).dump());
  });
}

void rgg_index_free(rgg_index* index) { delete index; }

rgg_status rgg_build_atlas(const char* request_json, char** out_json) {
  return run_command<rgg::BuildAtlasRequest>(request_json, out_json, rgg::cmd_build_atlas);
}

rgg_status rgg_caption(const char* request_json, char** out_json) {
  return run_command<rgg::CaptionRequest>(request_json, out_json, rgg::cmd_caption);
}

rgg_status rgg_evaluate(const char* request_json, char** out_json) {
  return run_command<rgg::EvaluateRequest>(request_json, out_json, rgg::cmd_evaluate);
}

rgg_status rgg_review_sample(const char* request_json, char** out_json) {
  return run_command<rgg::ReviewSampleRequest>(request_json, out_json, rgg::cmd_review_sample);
}

rgg_status rgg_server_start(const char* request_json, rgg_server** out) {
  if (request_json == nullptr || out == nullptr) {
    return fail(RGG_ERR_INVALID_ARGUMENT, "null argument");
  }
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<rgg_server>();
    handle->server = rgg::cmd_serve(rgg::ServeRequest::from_json(parse_request(request_json)),
                                    &handle->port);
    handle->server->start();
    *out = handle.release();
  });
}

int rgg_server_port(const rgg_server* server) { return server == nullptr ? 0 : server->port; }

void rgg_server_stop(rgg_server* server) {
  if (server != nullptr && server->server) server->server->stop();
}

void rgg_server_free(rgg_server* server) { delete server; }

}  // extern "C"
