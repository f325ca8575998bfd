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

#ifndef RGG_RGG_H_
#define RGG_RGG_H_

/*
 * C interface to the retrieval-guided captioning engine.
 *
 * Every fallible call returns an rgg_status. On failure a message for the
 * calling thread is available from rgg_last_error() until the next call on
 * that thread. Strings returned through `char** out` are owned by the caller
 * and released with rgg_string_free(). Command functions take a JSON request
 * and produce a JSON result.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(RGG_BUILDING_LIBRARY)
#define RGG_API __attribute__((visibility("default")))
#else
#define RGG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rgg_status {
  RGG_OK = 0,
  RGG_ERR_INTERNAL = 1,
  RGG_ERR_VALIDATION = 2,
  RGG_ERR_PROVIDER = 3,
  RGG_ERR_NOT_FOUND = 4,
  RGG_ERR_IO = 5,
  RGG_ERR_INVALID_ARGUMENT = 6
} rgg_status;

typedef struct rgg_atlas rgg_atlas;
typedef struct rgg_index rgg_index;
typedef struct rgg_server rgg_server;

RGG_API const char* rgg_version(void);
RGG_API const char* rgg_last_error(void);
RGG_API const char* rgg_status_name(rgg_status status);
RGG_API void rgg_string_free(char* s);

/* Atlas handles. */
RGG_API rgg_status rgg_atlas_load(const char* dir, rgg_atlas** out);
RGG_API size_t rgg_atlas_size(const rgg_atlas* atlas);
/* JSON array of {record_id, backbone_id, message}; empty when valid. */
RGG_API rgg_status rgg_atlas_validate(const rgg_atlas* atlas, char** out_json);
RGG_API void rgg_atlas_free(rgg_atlas* atlas);

/* Exact cosine index over one backbone of an atlas. */
RGG_API rgg_status rgg_index_build(const rgg_atlas* atlas, const char* backbone_id,
                                   rgg_index** out);
RGG_API size_t rgg_index_size(const rgg_index* index);
RGG_API uint32_t rgg_index_dim(const rgg_index* index);
/* Results are {query_ref, k_requested, excluded_ids, neighbors[{record_id, similarity}]}. */
RGG_API rgg_status rgg_index_query_id(const rgg_index* index, const char* record_id, uint32_t k,
                                      char** out_json);
RGG_API rgg_status rgg_index_query_vector(const rgg_index* index, const float* values,
                                          size_t dim, uint32_t k, char** out_json);
RGG_API void rgg_index_free(rgg_index* index);

/* Pipeline commands. */
RGG_API rgg_status rgg_build_atlas(const char* request_json, char** out_json);
RGG_API rgg_status rgg_caption(const char* request_json, char** out_json);
RGG_API rgg_status rgg_evaluate(const char* request_json, char** out_json);
RGG_API rgg_status rgg_review_sample(const char* request_json, char** out_json);

/* Review service. start binds and serves on a background thread. */
RGG_API rgg_status rgg_server_start(const char* request_json, rgg_server** out);
RGG_API int rgg_server_port(const rgg_server* server);
RGG_API void rgg_server_stop(rgg_server* server);
RGG_API void rgg_server_free(rgg_server* server);

#ifdef __cplusplus
}
#endif

#endif /* RGG_RGG_H_ */
