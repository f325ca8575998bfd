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

#include "rgg/embed_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "rgg/error.hpp"
#include "rgg/support.hpp"
#include "rgg/vector_index.hpp"

namespace rgg {

using nlohmann::json;

std::string_view to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::kRemote: return "remote";
    case ProviderKind::kFile: return "file";
    case ProviderKind::kMock: return "mock";
  }
  return "?";
}

std::string_view to_string(Modality modality) {
  return modality == Modality::kImage ? "image" : "text";
}

ProviderKind parse_provider_kind(std::string_view text) {
  if (text == "remote") return ProviderKind::kRemote;
  if (text == "file") return ProviderKind::kFile;
  if (text == "mock") return ProviderKind::kMock;
  throw ValidationError("unknown provider kind '" + std::string(text) + "'");
}

Modality parse_modality(std::string_view text) {
  if (text == "image") return Modality::kImage;
  if (text == "text") return Modality::kText;
  throw ValidationError("unknown modality '" + std::string(text) + "'");
}

void check_spec(const ProviderSpec& spec) {
  if (spec.provider_id.empty()) throw ValidationError("provider spec: empty provider_id");
  if (spec.dim == 0) {
    throw ValidationError("provider '" + spec.provider_id + "': dim must be positive");
  }
  if (spec.kind != ProviderKind::kMock && spec.endpoint.empty()) {
    throw ValidationError("provider '" + spec.provider_id + "': " +
                          std::string(to_string(spec.kind)) + " provider needs an endpoint");
  }
}

// ---------------------------------------------------------------------------

EmbeddingProvider::EmbeddingProvider(ProviderSpec spec) : spec_(std::move(spec)) {
  check_spec(spec_);
}

EmbedResponse EmbeddingProvider::embed(const EmbedRequest& request) const {
  if (request.modality != spec_.modality) {
    throw ValidationError("provider '" + spec_.provider_id + "' embeds " +
                          std::string(to_string(spec_.modality)) + ", got a " +
                          std::string(to_string(request.modality)) + " request");
  }
  if (request.payload.empty() && spec_.kind != ProviderKind::kFile) {
    throw ValidationError("provider '" + spec_.provider_id + "': empty payload for item '" +
                          request.item_id + "'");
  }

  const auto start = std::chrono::steady_clock::now();
  auto values = compute(request);
  const auto elapsed = std::chrono::steady_clock::now() - start;

  if (values.size() != spec_.dim) {
    throw ProviderError(spec_.provider_id,
                        "contract violation: returned dim " + std::to_string(values.size()) +
                            ", declared dim " + std::to_string(spec_.dim),
                        false);
  }
  double sq = 0.0;
  for (float x : values) {
    if (!std::isfinite(x)) {
      throw ProviderError(spec_.provider_id, "contract violation: non-finite value", false);
    }
    sq += static_cast<double>(x) * x;
  }
  if (!(sq > 0.0)) {
    throw ProviderError(spec_.provider_id, "contract violation: zero vector", false);
  }

  EmbedResponse response;
  response.item_id = request.item_id;
  response.embedding = Embedding{spec_.provider_id, std::move(values)};
  response.latency_ms = std::chrono::duration<double, std::milli>(elapsed).count();
  return response;
}

// ---------------------------------------------------------------------------
// Mock
// ---------------------------------------------------------------------------

Embedding mock_embed(std::uint64_t seed, Modality modality, std::string_view payload,
                     std::uint32_t dim, std::string backbone_id) {
  if (dim == 0) throw ValidationError("mock_embed: dim must be positive");
  const std::uint64_t salt = modality == Modality::kImage ? 0x696d616765ULL : 0x74657874ULL;
  const std::uint64_t basis = splitmix64(seed ^ splitmix64(salt));

  std::vector<float> counts(dim, 0.0f);
  auto tokens = tokenize(payload);
  if (tokens.empty()) tokens.emplace_back("\x01empty");
  for (const auto& token : tokens) counts[fnv1a64(token, basis) % dim] += 1.0f;
  return Embedding{std::move(backbone_id), normalize(counts)};
}

MockProvider::MockProvider(ProviderSpec spec) : EmbeddingProvider(std::move(spec)) {}

std::vector<float> MockProvider::compute(const EmbedRequest& request) const {
  return mock_embed(spec().seed, spec().modality, request.payload, spec().dim).values;
}

// ---------------------------------------------------------------------------
// File
// ---------------------------------------------------------------------------

FileProvider::FileProvider(ProviderSpec spec) : EmbeddingProvider(std::move(spec)) {
  std::ifstream in(this->spec().endpoint, std::ios::binary);
  if (!in) throw IoError("provider '" + this->spec().provider_id + "': cannot open " +
                         this->spec().endpoint);
  auto table = read_embeddings(in);
  for (auto& row : table.rows) vectors_.emplace(std::move(row.id), std::move(row.values));
}

std::vector<float> FileProvider::compute(const EmbedRequest& request) const {
  auto it = vectors_.find(request.item_id);
  if (it == vectors_.end()) {
    throw NotFoundError("provider '" + spec().provider_id + "': no embedding for item '" +
                        request.item_id + "'");
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Remote
// ---------------------------------------------------------------------------

RemoteProvider::RemoteProvider(ProviderSpec spec) : EmbeddingProvider(std::move(spec)) {}

std::vector<float> RemoteProvider::compute(const EmbedRequest& request) const {
  const auto& s = spec();
  json body{{"id", request.item_id},
            {"modality", to_string(request.modality)},
            {"payload", request.modality == Modality::kImage ? base64_encode(request.payload)
                                                             : request.payload}};
  const auto reply = post_json(s.provider_id, s.endpoint, body, s.retry);
  if (!reply.is_object() || !reply.contains("values") || !reply["values"].is_array()) {
    throw ProviderError(s.provider_id, "contract violation: reply lacks a 'values' array", false);
  }
  if (reply.contains("id") && reply["id"] != request.item_id) {
    throw ProviderError(s.provider_id, "contract violation: reply id does not match request",
                        false);
  }
  std::vector<float> values;
  values.reserve(reply["values"].size());
  for (const auto& v : reply["values"]) {
    if (!v.is_number()) {
      throw ProviderError(s.provider_id, "contract violation: non-numeric value", false);
    }
    values.push_back(static_cast<float>(v.get<double>()));
  }
  return values;
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderSpec& spec) {
  switch (spec.kind) {
    case ProviderKind::kMock: return std::make_unique<MockProvider>(spec);
    case ProviderKind::kFile: return std::make_unique<FileProvider>(spec);
    case ProviderKind::kRemote: return std::make_unique<RemoteProvider>(spec);
  }
  throw ValidationError("unknown provider kind");
}

std::vector<BatchItem> batch_embed(const EmbeddingProvider& provider,
                                   const std::vector<EmbedRequest>& requests) {
  if (!requests.empty()) {
    const auto modality = requests.front().modality;
    for (const auto& r : requests) {
      if (r.modality != modality) throw ValidationError("batch_embed: mixed modalities");
    }
  }
  std::vector<BatchItem> out;
  out.reserve(requests.size());
  for (const auto& request : requests) {
    BatchItem item;
    try {
      item.response = provider.embed(request);
    } catch (const ProviderError& e) {
      if (e.retryable()) throw;
      item.error = e.what();
    } catch (const Error& e) {
      item.error = e.what();
    }
    out.push_back(std::move(item));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

std::string endpoint_env_var(std::string_view id) {
  std::string out = "RGG_ENDPOINT_";
  for (unsigned char c : id) {
    out.push_back(std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_');
  }
  return out;
}

ProviderRegistry ProviderRegistry::builtin() {
  ProviderRegistry reg;
  ProviderSpec text;
  text.provider_id = "mock-text";
  text.kind = ProviderKind::kMock;
  text.dim = 1024;
  text.modality = Modality::kText;
  text.seed = 7;
  reg.add(text);

  ProviderSpec image;
  image.provider_id = "mock-image";
  image.kind = ProviderKind::kMock;
  image.dim = 512;
  image.modality = Modality::kImage;
  image.seed = 11;
  reg.add(image);
  return reg;
}

ProviderRegistry ProviderRegistry::load(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("provider registry " + path.string() + ": " + e.what());
  }
  auto reg = builtin();
  try {
    for (const auto& p : doc.value("providers", json::array())) {
      ProviderSpec spec;
      spec.provider_id = p.at("provider_id").get<std::string>();
      spec.kind = parse_provider_kind(p.at("kind").get<std::string>());
      spec.modality = parse_modality(p.at("modality").get<std::string>());
      spec.dim = p.at("dim").get<std::uint32_t>();
      spec.endpoint = p.value("endpoint", "");
      spec.seed = p.value("seed", std::uint64_t{0});
      if (p.contains("timeout_ms")) {
        spec.retry.timeout = std::chrono::milliseconds(p["timeout_ms"].get<long>());
      }
      // Relative file paths resolve against the registry's directory.
      if (spec.kind == ProviderKind::kFile && std::filesystem::path(spec.endpoint).is_relative()) {
        spec.endpoint = (path.parent_path() / spec.endpoint).string();
      }
      check_spec(spec);
      reg.add(std::move(spec));
    }
    for (const auto& s : doc.value("summarizers", json::array())) {
      SummarizerSpec spec;
      spec.engine_id = s.at("engine_id").get<std::string>();
      spec.endpoint = s.at("endpoint").get<std::string>();
      spec.max_tokens = s.value("max_tokens", 256);
      spec.temperature = s.value("temperature", 0.0);
      reg.add(std::move(spec));
    }
  } catch (const json::exception& e) {
    throw ValidationError("provider registry " + path.string() + ": " + e.what());
  }
  return reg;
}

void ProviderRegistry::add(ProviderSpec spec) {
  auto id = spec.provider_id;
  providers_.insert_or_assign(std::move(id), std::move(spec));
}

void ProviderRegistry::add(SummarizerSpec spec) {
  auto id = spec.engine_id;
  summarizers_.insert_or_assign(std::move(id), std::move(spec));
}

const ProviderSpec& ProviderRegistry::provider(std::string_view provider_id) const {
  auto it = providers_.find(provider_id);
  if (it == providers_.end()) {
    throw NotFoundError("provider '" + std::string(provider_id) + "' is not in the registry");
  }
  return it->second;
}

const SummarizerSpec* ProviderRegistry::summarizer(std::string_view engine_id) const {
  auto it = summarizers_.find(engine_id);
  return it == summarizers_.end() ? nullptr : &it->second;
}

bool ProviderRegistry::has_provider(std::string_view provider_id) const {
  return providers_.find(provider_id) != providers_.end();
}

std::vector<std::string> ProviderRegistry::provider_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : providers_) out.push_back(id);
  return out;
}

void ProviderRegistry::apply_env_overrides() {
  for (auto& [id, spec] : providers_) {
    if (const char* v = std::getenv(endpoint_env_var(id).c_str()); v != nullptr && *v != '\0') {
      spec.endpoint = v;
    }
  }
  for (auto& [id, spec] : summarizers_) {
    if (const char* v = std::getenv(endpoint_env_var(id).c_str()); v != nullptr && *v != '\0') {
      spec.endpoint = v;
    }
  }
}

}  // namespace rgg
