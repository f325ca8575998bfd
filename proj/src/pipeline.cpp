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

#include "rgg/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "rgg/atlas.hpp"
#include "rgg/error.hpp"
#include "rgg/support.hpp"
#include "rgg/vector_index.hpp"

namespace rgg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return base.empty() || path.is_absolute() ? path : base / path;
}

json parse_jsonl_line(const std::string& line, const fs::path& path, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
  }
}

void check_run_id(const std::string& id) {
  const bool ok = !id.empty() && id != "." && id != ".." &&
                  std::all_of(id.begin(), id.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
                           c == '.';
                  });
  if (!ok) throw ValidationError("invalid run id '" + id + "' (use letters, digits, '-', '_', '.')");
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::unique_ptr<SummarizerEngine> make_engine(const RunConfig& c, const ProviderRegistry& registry) {
  if (c.engine == kExtractiveEngine) return std::make_unique<ExtractiveEngine>(c.budget);
  if (const auto* spec = registry.summarizer(c.engine)) {
    return std::make_unique<RemoteLlmEngine>(*spec);
  }
  throw NotFoundError("summarizer engine '" + c.engine + "' is not registered");
}

// Everything needed to caption queries under one RunConfig.
struct RunContext {
  RunConfig config;
  ProviderRegistry registry;
  Atlas atlas;
  VectorIndex index;
  std::unique_ptr<SummarizerEngine> engine;
  PromptTemplate prompt_template;

  explicit RunContext(const RunConfig& c) : config(c), registry(load_registry(c.registry)) {
    config.check();
    if (!registry.has_provider(config.scorer)) {
      throw NotFoundError("scorer provider '" + config.scorer + "' is not registered");
    }
    atlas = load_atlas(config.atlas);
    if (const auto issues = validate(atlas); !issues.empty()) {
      const auto& v = issues.front();
      throw ValidationError("atlas " + config.atlas.string() + " is invalid: " +
                            (v.record_id.empty() ? "" : "record '" + v.record_id + "': ") + v.message);
    }
    if (atlas.embeddings(config.backbone) == nullptr) {
      throw NotFoundError("backbone '" + config.backbone + "' is not in atlas " +
                          config.atlas.string() + " (available: " + join(atlas.backbones(), ", ") +
                          ")");
    }
    index = VectorIndex::build(atlas, config.backbone);
    engine = make_engine(config, registry);
    prompt_template = config.template_path.empty() ? PromptTemplate::builtin()
                                                   : PromptTemplate::load(config.template_path);
  }

  void require_covered(const std::string& record_id) const {
    if (!atlas.contains(record_id)) {
      throw NotFoundError("record '" + record_id + "' is not in atlas " + config.atlas.string());
    }
    if (!index.contains(record_id)) {
      throw NotFoundError("record '" + record_id + "' has no embedding under backbone '" +
                          config.backbone + "'");
    }
  }

  struct Outcome {
    RetrievalResult retrieval;
    GeneratedCaption caption;
    std::vector<std::string> warnings;
  };

  Outcome caption(const Query& query, std::size_t eligible) const {
    Outcome out;
    if (config.k > eligible) {
      out.warnings.push_back("k=" + std::to_string(config.k) + " exceeds the " +
                             std::to_string(eligible) + " eligible atlas entries under backbone '" +
                             config.backbone + "'; using all of them");
    }
    out.retrieval = index.top_k(query, config.k);
    if (out.retrieval.neighbors.empty()) {
      throw ValidationError("no neighbors available under backbone '" + config.backbone + "'");
    }
    const auto bundle = dedup_captions(make_bundle(out.retrieval, atlas));
    out.caption = summarize(bundle, *engine, {config.backbone, config.k, prompt_template});
    return out;
  }

  Outcome caption_record(const std::string& record_id) const {
    require_covered(record_id);
    return caption(std::string_view(record_id), index.size() - 1);
  }

  json describe(const Outcome& o) const {
    json neighbors = json::array();
    for (const auto& n : o.retrieval.neighbors) {
      neighbors.push_back({{"record_id", n.record_id}, {"similarity", n.similarity}});
    }
    const auto& p = o.caption.provenance;
    return {{"query_ref", o.caption.query_ref},
            {"caption", o.caption.text},
            {"neighbors", std::move(neighbors)},
            {"excluded_ids", o.retrieval.excluded_ids},
            {"prompt_checksum", o.caption.prompt_checksum},
            {"provenance",
             {{"backbone_id", p.backbone_id},
              {"summarizer_id", p.summarizer_id},
              {"template_id", p.template_id},
              {"template_checksum", prompt_template.checksum()},
              {"k", p.k},
              {"source_ids", p.source_ids}}},
            {"warnings", o.warnings},
            {"run", {{"config", config.to_json()}, {"config_checksum", config.checksum()}}}};
  }
};

std::vector<EvalRecord> score_all(const EmbeddingProvider& scorer, const std::string& scorer_id,
                                  const std::map<std::string, std::string>& generated,
                                  const Atlas& reference_atlas) {
  std::vector<EvalRecord> records;
  records.reserve(generated.size());
  for (const auto& [id, text] : generated) {
    EvalRecord r;
    r.query_ref = id;
    r.generated = text;
    r.reference = reference_atlas.find(id)->primary_caption();
    r.score = score_pair(scorer, r.generated, r.reference);
    r.scorer_provider = scorer_id;
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw ValidationError("run config must be a JSON object");
  RunConfig c;
  try {
    c.run_id = j.value("run_id", "");
    c.atlas = resolve(base, j.value("atlas", ""));
    c.backbone = j.value("backbone", "");
    c.k = j.value("k", kDefaultTopK);
    c.engine = j.value("engine", std::string(kExtractiveEngine));
    c.budget = j.value("budget", kDefaultSentenceBudget);
    c.template_path = resolve(base, j.value("template", ""));
    c.scorer = j.value("scorer", std::string(kDefaultScorer));
    c.seed = j.value("seed", std::uint64_t{0});
    c.out = resolve(base, j.value("out", ""));
    c.registry = resolve(base, j.value("registry", ""));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run config: ") + e.what());
  }
  return c;
}

json RunConfig::to_json() const {
  return {{"run_id", effective_run_id()},
          {"atlas", atlas.generic_string()},
          {"backbone", backbone},
          {"k", k},
          {"engine", engine},
          {"budget", budget},
          {"template", template_path.generic_string()},
          {"scorer", scorer},
          {"seed", seed},
          {"out", out.generic_string()},
          {"registry", registry.generic_string()}};
}

std::string RunConfig::checksum() const { return sha256_hex(to_json().dump()); }

void RunConfig::check() const {
  if (k < 1) throw ValidationError("k must be at least 1");
  if (atlas.empty()) throw ValidationError("run config: atlas path is required");
  if (backbone.empty()) throw ValidationError("run config: backbone is required");
  if (engine == kExtractiveEngine && budget < 1) {
    throw ValidationError("extractive budget must be at least 1");
  }
  check_run_id(effective_run_id());
}

ProviderRegistry load_registry(const fs::path& path) {
  fs::path chosen = path;
  if (chosen.empty()) {
    if (const char* env = std::getenv("RGG_PROVIDER_REGISTRY"); env != nullptr && *env != '\0') {
      chosen = env;
    }
  }
  auto registry = chosen.empty() ? ProviderRegistry::builtin() : ProviderRegistry::load(chosen);
  registry.apply_env_overrides();
  return registry;
}

// ---------------------------------------------------------------------------
// build-atlas
// ---------------------------------------------------------------------------

BuildAtlasRequest BuildAtlasRequest::from_json(const json& j) {
  BuildAtlasRequest r;
  try {
    r.manifest = j.at("manifest").get<std::string>();
    for (const auto& [backbone, path] : j.at("embeddings").items()) {
      r.embeddings[backbone] = path.get<std::string>();
    }
    r.out = j.at("out").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("build-atlas request: ") + e.what());
  }
  return r;
}

json cmd_build_atlas(const BuildAtlasRequest& request) {
  if (request.embeddings.empty()) throw ValidationError("build-atlas: no embedding files given");
  if (request.out.empty()) throw ValidationError("build-atlas: output directory is required");

  std::ifstream manifest(request.manifest, std::ios::binary);
  if (!manifest) throw IoError("cannot open manifest " + request.manifest.string());
  Atlas atlas = ingest_manifest(manifest);

  json coverage = json::array();
  for (const auto& [backbone, path] : request.embeddings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding file " + path.string());
    auto attached = attach_embeddings(std::move(atlas), backbone, in);
    atlas = std::move(attached.atlas);
    coverage.push_back({{"backbone_id", backbone},
                        {"covered", attached.coverage.covered},
                        {"missing_ids", attached.coverage.missing_ids}});
  }

  const auto violations = validate(atlas);
  if (!violations.empty()) {
    const auto& v = violations.front();
    std::string where = v.record_id.empty() ? "" : "record '" + v.record_id + "': ";
    throw ValidationError("atlas validation failed (" + std::to_string(violations.size()) +
                          " violations); first: " + where + v.message);
  }
  save_atlas(atlas, request.out);
  return {{"atlas", request.out.generic_string()},
          {"records", atlas.size()},
          {"backbones", atlas.backbones()},
          {"coverage", std::move(coverage)},
          {"manifest_checksum", atlas.meta().manifest_checksum}};
}

// ---------------------------------------------------------------------------
// caption
// ---------------------------------------------------------------------------

CaptionRequest CaptionRequest::from_json(const json& j) {
  CaptionRequest r;
  r.config = RunConfig::from_json(j.value("config", json::object()));
  r.record_id = j.value("record_id", "");
  r.image_path = j.value("image", "");
  return r;
}

json cmd_caption(const CaptionRequest& request) {
  if (request.record_id.empty() == request.image_path.empty()) {
    throw ValidationError("caption: give exactly one of a record id or an image path");
  }
  const RunContext ctx(request.config);
  if (!request.record_id.empty()) return ctx.describe(ctx.caption_record(request.record_id));

  // External image: encode with the provider registered under the backbone id.
  if (!ctx.registry.has_provider(ctx.config.backbone)) {
    throw NotFoundError("external image query needs a provider registered as '" +
                        ctx.config.backbone + "'");
  }
  const auto& spec = ctx.registry.provider(ctx.config.backbone);
  if (spec.modality != Modality::kImage) {
    throw ValidationError("provider '" + spec.provider_id +
                          "' is text-modality; external image queries need an image provider");
  }
  const auto provider = make_provider(spec);
  const auto response =
      provider->embed({std::string(kExternalQuery), Modality::kImage, read_file(request.image_path)});
  const auto& values = response.embedding.values;
  return ctx.describe(ctx.caption(std::span<const float>(values), ctx.index.size()));
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

EvaluateRequest EvaluateRequest::from_json(const json& j) {
  EvaluateRequest r;
  try {
    for (const auto& c : j.value("configs", json::array())) r.configs.push_back(RunConfig::from_json(c));
    r.baseline = j.at("baseline").get<std::string>();
    r.baseline_id = j.value("baseline_id", r.baseline_id);
    r.reference_atlas = j.value("reference_atlas", "");
    r.scorer = j.value("scorer", r.scorer);
    r.seed = j.value("seed", r.seed);
    r.resamples = j.value("resamples", r.resamples);
    r.ci_level = j.value("ci_level", r.ci_level);
    r.registry = j.value("registry", "");
    r.out = j.at("out").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("evaluate request: ") + e.what());
  }
  return r;
}

json cmd_evaluate(const EvaluateRequest& request) {
  if (request.out.empty()) throw ValidationError("evaluate: output directory is required");
  check_run_id(request.baseline_id);
  std::set<std::string> run_ids{request.baseline_id};
  for (const auto& c : request.configs) {
    if (c.scorer != request.scorer) {
      throw ValidationError("scorer mismatch: run '" + c.effective_run_id() + "' uses '" + c.scorer +
                            "' but the evaluation uses '" + request.scorer + "'");
    }
    if (!run_ids.insert(c.effective_run_id()).second) {
      throw ValidationError("duplicate run id '" + c.effective_run_id() + "'");
    }
  }

  const auto baseline_run = read_system_run(request.baseline_id, request.baseline);
  std::map<std::string, std::string> baseline_text(baseline_run.captions.begin(),
                                                   baseline_run.captions.end());
  if (baseline_text.empty()) throw ValidationError("baseline file has no captions");

  const fs::path ref_path = !request.reference_atlas.empty() ? request.reference_atlas
                            : request.configs.empty()        ? fs::path()
                                                             : request.configs.front().atlas;
  if (ref_path.empty()) throw ValidationError("evaluate: no reference atlas (set reference_atlas)");
  const Atlas reference = load_atlas(ref_path);
  for (const auto& [id, text] : baseline_text) {
    if (!reference.contains(id)) {
      throw ValidationError("id-set mismatch: baseline id '" + id + "' is not in reference atlas " +
                            ref_path.string());
    }
  }

  const auto registry = load_registry(request.registry);
  const auto& scorer_spec = registry.provider(request.scorer);
  if (scorer_spec.modality != Modality::kText) {
    throw ValidationError("scorer '" + request.scorer + "' must be a text provider");
  }
  const auto scorer = make_provider(scorer_spec);
  const EvalOptions options{request.ci_level, request.resamples};

  fs::create_directories(request.out);
  std::vector<EvalSummary> summaries;
  json comparisons = json::array();
  json run_configs = json::array();

  const auto base_records = score_all(*scorer, request.scorer, baseline_text, reference);
  summaries.push_back(evaluate_run(base_records, request.baseline_id, request.seed, options));
  {
    const auto dir = request.out / request.baseline_id;
    fs::create_directories(dir);
    write_file_atomic(dir / "scores.jsonl", scores_to_jsonl(base_records));
    write_json(dir / "summary.json", to_json(summaries.back()));
  }

  for (const auto& config : request.configs) {
    const RunContext ctx(config);
    for (const auto& [id, text] : baseline_text) {
      if (!ctx.index.contains(id)) {
        throw ValidationError("id-set mismatch: run '" + config.effective_run_id() +
                              "' (backbone '" + config.backbone + "') does not cover '" + id + "'");
      }
    }
    std::map<std::string, std::string> generated;
    std::string captions_jsonl;
    for (const auto& [id, text] : baseline_text) {
      const auto outcome = ctx.caption_record(id);
      generated[id] = outcome.caption.text;
      captions_jsonl += json{{"query_ref", id},
                             {"text", outcome.caption.text},
                             {"prompt_checksum", outcome.caption.prompt_checksum},
                             {"source_ids", outcome.caption.provenance.source_ids}}
                            .dump() +
                        "\n";
    }
    const auto records = score_all(*scorer, request.scorer, generated, reference);
    summaries.push_back(evaluate_run(records, config.effective_run_id(), config.seed, options));
    comparisons.push_back(to_json(compare(summaries.back(), summaries.front())));

    const auto dir = request.out / config.effective_run_id();
    fs::create_directories(dir);
    write_file_atomic(dir / "captions.jsonl", captions_jsonl);
    write_file_atomic(dir / "scores.jsonl", scores_to_jsonl(records));
    write_json(dir / "summary.json", to_json(summaries.back()));
    run_configs.push_back({{"config", config.to_json()},
                           {"config_checksum", config.checksum()},
                           {"summarizer_id", ctx.engine->id()},
                           {"template_id", ctx.prompt_template.template_id},
                           {"template_checksum", ctx.prompt_template.checksum()}});
  }

  const auto table = emit_table(summaries, request.baseline_id);
  write_file_atomic(request.out / "table.txt", table.text);
  write_json(request.out / "table.json", table.data);
  write_json(request.out / "comparisons.json", comparisons);

  json summaries_json = json::array();
  for (const auto& s : summaries) summaries_json.push_back(to_json(s));
  const json run{{"baseline",
                  {{"run_id", request.baseline_id},
                   {"path", request.baseline.generic_string()},
                   {"sha256", sha256_hex(read_file(request.baseline))}}},
                 {"reference_atlas", ref_path.generic_string()},
                 {"scorer", request.scorer},
                 {"seed", request.seed},
                 {"resamples", request.resamples},
                 {"ci_level", request.ci_level},
                 {"ci_method", kCiMethod},
                 {"n", baseline_text.size()},
                 {"runs", std::move(run_configs)}};
  write_json(request.out / "run.json", run);

  return {{"summaries", std::move(summaries_json)},
          {"comparisons", std::move(comparisons)},
          {"table", table.data},
          {"table_text", table.text},
          {"out", request.out.generic_string()}};
}

// ---------------------------------------------------------------------------
// review
// ---------------------------------------------------------------------------

SystemRun read_system_run(const std::string& system_id, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open captions file " + path.string());
  SystemRun run;
  run.system_id = system_id;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto j = parse_jsonl_line(line, path, lineno);
    if (!j.contains("query_ref") || !j.contains("text") || !j["query_ref"].is_string() ||
        !j["text"].is_string()) {
      throw ValidationError(path.string() + " line " + std::to_string(lineno) +
                            ": expected string fields query_ref and text");
    }
    const auto id = j["query_ref"].get<std::string>();
    if (!run.captions.emplace(id, j["text"].get<std::string>()).second) {
      throw ValidationError(path.string() + " line " + std::to_string(lineno) +
                            ": duplicate query_ref '" + id + "'");
    }
  }
  return run;
}

ReviewSampleRequest ReviewSampleRequest::from_json(const json& j) {
  ReviewSampleRequest r;
  try {
    const auto runs = j.value("runs", json::object());
    for (const auto& [id, path] : runs.items()) {
      r.runs[id] = path.get<std::string>();
    }
    r.n = j.value("n", r.n);
    r.seed = j.value("seed", r.seed);
    r.atlas = j.value("atlas", "");
    r.out = j.value("out", "");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("review-sample request: ") + e.what());
  }
  return r;
}

namespace {

std::vector<ReviewCase> sample_from(const ReviewSampleRequest& request) {
  if (request.runs.size() != 2) {
    throw ValidationError("review sampling needs exactly two runs, got " +
                          std::to_string(request.runs.size()));
  }
  const auto first = read_system_run(request.runs.begin()->first, request.runs.begin()->second);
  const auto second = read_system_run(request.runs.rbegin()->first, request.runs.rbegin()->second);
  std::map<std::string, std::string, std::less<>> image_uris;
  if (!request.atlas.empty()) {
    const auto atlas = load_atlas(request.atlas);
    for (const auto& rec : atlas.records()) image_uris[rec.record_id] = rec.image_uri;
  }
  return sample_cases(first, second, request.n, request.seed, image_uris);
}

}  // namespace

json cmd_review_sample(const ReviewSampleRequest& request) {
  if (request.out.empty()) throw ValidationError("review-sample: output directory is required");
  const auto cases = sample_from(request);
  fs::create_directories(request.out);
  const auto path = request.out / "cases.json";
  write_json(path, cases_to_json(cases));
  json ids = json::array();
  for (const auto& c : cases) ids.push_back(c.case_id);
  json systems = json::array();
  for (const auto& [id, p] : request.runs) systems.push_back(id);
  return {{"cases_file", path.generic_string()},
          {"n", cases.size()},
          {"seed", request.seed},
          {"systems", std::move(systems)},
          {"case_ids", std::move(ids)}};
}

ServeRequest ServeRequest::from_json(const json& j) {
  ServeRequest r;
  try {
    r.state_dir = j.at("state_dir").get<std::string>();
    r.cases = j.value("cases", "");
    if (j.contains("sample")) r.sample = ReviewSampleRequest::from_json(j["sample"]);
    r.host = j.value("host", r.host);
    r.port = j.value("port", r.port);
    r.admin_token = j.value("admin_token", "");
    r.static_dir = j.value("static_dir", "");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("serve request: ") + e.what());
  }
  return r;
}

std::unique_ptr<ReviewServer> cmd_serve(const ServeRequest& request, int* bound_port) {
  if (request.state_dir.empty()) throw ValidationError("serve: state directory is required");
  fs::create_directories(request.state_dir);
  const auto persisted = request.state_dir / "cases.json";

  std::vector<ReviewCase> cases;
  const auto load_cases = [](const fs::path& p) {
    try {
      return cases_from_json(json::parse(read_file(p)));
    } catch (const json::parse_error& e) {
      throw ValidationError("cases file " + p.string() + ": " + e.what());
    }
  };
  if (!request.cases.empty()) {
    cases = load_cases(request.cases);
  } else if (fs::exists(persisted)) {
    cases = load_cases(persisted);
  } else if (!request.sample.runs.empty()) {
    cases = sample_from(request.sample);
    write_json(persisted, cases_to_json(cases));
  } else {
    throw ValidationError("serve: no review cases (give a cases file or two run caption files)");
  }

  auto server = std::make_unique<ReviewServer>(
      std::move(cases), ReviewServiceOptions{request.state_dir, request.admin_token, request.static_dir});
  const int port = server->bind(request.host, request.port);
  if (bound_port != nullptr) *bound_port = port;
  return server;
}

}  // namespace rgg
