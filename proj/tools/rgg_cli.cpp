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

// rgg: command-line front end over the C API.
//
// Exit codes: 0 success, 2 validation failure, 3 provider/transport failure,
// 1 anything else.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rgg/rgg.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code(rgg_status status) {
  switch (status) {
    case RGG_OK: return 0;
    case RGG_ERR_VALIDATION:
    case RGG_ERR_NOT_FOUND:
    case RGG_ERR_INVALID_ARGUMENT: return 2;
    case RGG_ERR_PROVIDER: return 3;
    default: return 1;
  }
}

int report(rgg_status status) {
  std::cerr << "rgg: " << rgg_status_name(status) << " error: " << rgg_last_error() << "\n";
  return exit_code(status);
}

// Invokes a JSON command, prints warnings to stderr and the result to stdout.
int invoke(rgg_status (*fn)(const char*, char**), const json& request) {
  char* out = nullptr;
  const auto status = fn(request.dump().c_str(), &out);
  if (status != RGG_OK) return report(status);
  const auto result = json::parse(out);
  rgg_string_free(out);
  if (result.contains("warnings")) {
    for (const auto& w : result["warnings"]) std::cerr << "rgg: warning: " << w.get<std::string>() << "\n";
  }
  if (result.contains("table_text")) {
    std::cout << result["table_text"].get<std::string>();
  } else {
    std::cout << result.dump(2) << "\n";
  }
  return 0;
}

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).string(); }

// "key=value" pairs into a map; CLI11 validates presence.
std::map<std::string, std::string> split_pairs(const std::vector<std::string>& items,
                                               const std::string& what) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw CLI::ValidationError(what, "expected NAME=PATH, got '" + item + "'");
    }
    out[item.substr(0, eq)] = absolute(item.substr(eq + 1));
  }
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw CLI::ValidationError("--config", path + ": " + e.what());
  }
}

// Flags shared by caption and evaluate; unset flags leave the config alone.
struct RunFlags {
  std::string config;
  std::string run_id, atlas, backbone, engine, templ, scorer, out, registry;
  std::optional<std::uint32_t> k;
  std::optional<std::size_t> budget;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "run config file (JSON)");
    app->add_option("--run-id", run_id, "run identifier (default: backbone)");
    app->add_option("--atlas", atlas, "atlas directory");
    app->add_option("--backbone", backbone, "backbone provider id");
    app->add_option("--k", k, "neighbors to retrieve (default 3)")->check(CLI::PositiveNumber);
    app->add_option("--engine", engine, "summarizer engine id (default extractive)");
    app->add_option("--budget", budget, "extractive sentence budget (default 2)")
        ->check(CLI::PositiveNumber);
    app->add_option("--template", templ, "prompt template file");
    app->add_option("--scorer", scorer, "scorer provider id (default mock-text)");
    app->add_option("--seed", seed, "run seed");
    app->add_option("--out", out, "output directory");
    app->add_option("--registry", registry, "provider registry file (or RGG_PROVIDER_REGISTRY)");
  }

  // Config file paths are resolved against the file's directory.
  json merged(const json& file_config, const fs::path& base) const {
    json c = file_config;
    for (const char* key : {"atlas", "template", "out", "registry"}) {
      if (c.contains(key) && c[key].is_string() && !c[key].get<std::string>().empty() &&
          fs::path(c[key].get<std::string>()).is_relative()) {
        c[key] = (base / c[key].get<std::string>()).string();
      }
    }
    const auto set = [&](const char* key, const std::string& v, bool path = false) {
      if (!v.empty()) c[key] = path ? absolute(v) : v;
    };
    set("run_id", run_id);
    set("atlas", atlas, true);
    set("backbone", backbone);
    set("engine", engine);
    set("template", templ, true);
    set("scorer", scorer);
    set("out", out, true);
    set("registry", registry, true);
    if (k) c["k"] = *k;
    if (budget) c["budget"] = *budget;
    if (seed) c["seed"] = *seed;
    return c;
  }

  json resolve() const {
    if (config.empty()) return merged(json::object(), {});
    const auto file = read_json_file(config);
    return merged(file.is_object() && file.contains("runs") ? json::object() : file,
                  fs::absolute(config).parent_path());
  }
};

int serve(const json& request) {
  // Block the shutdown signals in every thread; the main thread waits for them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  rgg_server* server = nullptr;
  const auto status = rgg_server_start(request.dump().c_str(), &server);
  if (status != RGG_OK) return report(status);
  std::cerr << "rgg: review service listening on " << request.value("host", "127.0.0.1") << ":"
            << rgg_server_port(server) << "\n";
  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "rgg: shutting down\n";
  rgg_server_stop(server);
  rgg_server_free(server);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-guided caption generation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rgg_version()));

  // build-atlas
  auto* build = app.add_subcommand("build-atlas", "ingest a manifest and embedding files");
  std::string manifest, build_out;
  std::vector<std::string> embedding_args;
  build->add_option("--manifest", manifest, "manifest JSONL")->required()->check(CLI::ExistingFile);
  build->add_option("--embeddings", embedding_args, "BACKBONE=PATH, repeatable")->required();
  build->add_option("--out", build_out, "atlas directory")->required();

  // caption
  auto* caption = app.add_subcommand("caption", "caption one query");
  RunFlags caption_flags;
  caption_flags.attach(caption);
  std::string record_id, image;
  auto* by_id = caption->add_option("--record", record_id, "atlas record id to caption");
  auto* by_image = caption->add_option("--image", image, "external image file")->check(CLI::ExistingFile);
  by_id->excludes(by_image);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score runs against a baseline");
  RunFlags eval_flags;
  eval_flags.attach(evaluate);
  std::vector<std::string> backbones;
  std::string baseline, baseline_id = "baseline", reference_atlas;
  std::uint32_t resamples = 10000;
  double ci_level = 0.95;
  evaluate->add_option("--backbones", backbones, "evaluate one run per backbone")->delimiter(',');
  evaluate->add_option("--baseline", baseline, "baseline captions JSONL {query_ref, text}")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--baseline-id", baseline_id, "baseline row label");
  evaluate->add_option("--reference-atlas", reference_atlas, "atlas holding the references");
  evaluate->add_option("--resamples", resamples, "bootstrap resamples")->check(CLI::PositiveNumber);
  evaluate->add_option("--ci-level", ci_level, "confidence level")->check(CLI::Range(0.5, 0.999));

  // review-sample
  auto* sample = app.add_subcommand("review-sample", "draw blinded review cases from two runs");
  std::vector<std::string> sample_runs;
  std::size_t n_cases = 20;
  std::uint64_t sample_seed = 0;
  std::string sample_atlas, sample_out;
  sample->add_option("--run", sample_runs, "SYSTEM=CAPTIONS_JSONL, exactly two")->required()->expected(2);
  sample->add_option("--n", n_cases, "number of cases (default 20)");
  sample->add_option("--seed", sample_seed, "sampling seed");
  sample->add_option("--atlas", sample_atlas, "atlas for image locators");
  sample->add_option("--out", sample_out, "output directory")->required();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "host the review API and UI assets");
  std::string bind = "127.0.0.1:8080", state_dir, cases_file, static_dir, admin_token, serve_atlas;
  std::vector<std::string> serve_runs;
  std::size_t serve_n = 20;
  std::uint64_t serve_seed = 0;
  serve_cmd->add_option("--bind", bind, "HOST:PORT (port 0 picks a free port)");
  serve_cmd->add_option("--state", state_dir, "state directory (cases, judgments)")->required();
  serve_cmd->add_option("--cases", cases_file, "cases.json from review-sample");
  serve_cmd->add_option("--run", serve_runs, "SYSTEM=CAPTIONS_JSONL, to sample cases")->expected(2);
  serve_cmd->add_option("--n", serve_n, "cases to sample when none exist");
  serve_cmd->add_option("--seed", serve_seed, "sampling seed");
  serve_cmd->add_option("--atlas", serve_atlas, "atlas for image locators");
  serve_cmd->add_option("--ui", static_dir, "static UI asset directory");
  serve_cmd->add_option("--admin-token", admin_token, "token for /review/unblind (or RGG_ADMIN_TOKEN)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*build) {
      json emb = json::object();
      for (const auto& [backbone, path] : split_pairs(embedding_args, "--embeddings")) emb[backbone] = path;
      return invoke(rgg_build_atlas,
                    {{"manifest", absolute(manifest)}, {"embeddings", emb}, {"out", absolute(build_out)}});
    }
    if (*caption) {
      if (record_id.empty() == image.empty()) {
        std::cerr << "rgg: caption needs exactly one of --record or --image\n";
        return 2;
      }
      return invoke(rgg_caption,
                    {{"config", caption_flags.resolve()}, {"record_id", record_id}, {"image", absolute(image)}});
    }
    if (*evaluate) {
      json configs = json::array();
      const json base = eval_flags.resolve();
      if (!eval_flags.config.empty()) {
        const auto file = read_json_file(eval_flags.config);
        if (file.is_object() && file.contains("runs")) {
          const auto dir = fs::absolute(eval_flags.config).parent_path();
          for (const auto& r : file["runs"]) configs.push_back(eval_flags.merged(r, dir));
          if (baseline.empty() && file.contains("baseline")) {
            baseline = (dir / file["baseline"].get<std::string>()).string();
          }
        }
      }
      for (const auto& b : backbones) {
        json c = base;
        c["backbone"] = b;
        c["run_id"] = b;
        configs.push_back(c);
      }
      if (configs.empty() && base.contains("backbone")) configs.push_back(base);
      if (baseline.empty()) {
        std::cerr << "rgg: evaluate needs --baseline\n";
        return 2;
      }
      const std::string out = base.value("out", "");
      if (out.empty()) {
        std::cerr << "rgg: evaluate needs --out\n";
        return 2;
      }
      json request{{"configs", configs},
                   {"baseline", absolute(baseline)},
                   {"baseline_id", baseline_id},
                   {"reference_atlas", reference_atlas.empty() ? base.value("atlas", "") : absolute(reference_atlas)},
                   {"scorer", base.value("scorer", "mock-text")},
                   {"seed", base.value("seed", std::uint64_t{0})},
                   {"resamples", resamples},
                   {"ci_level", ci_level},
                   {"registry", base.value("registry", "")},
                   {"out", out}};
      return invoke(rgg_evaluate, request);
    }
    if (*sample) {
      json runs = json::object();
      for (const auto& [id, path] : split_pairs(sample_runs, "--run")) runs[id] = path;
      return invoke(rgg_review_sample, {{"runs", runs},
                                        {"n", n_cases},
                                        {"seed", sample_seed},
                                        {"atlas", absolute(sample_atlas)},
                                        {"out", absolute(sample_out)}});
    }
    if (*serve_cmd) {
      const auto colon = bind.rfind(':');
      if (colon == std::string::npos) {
        std::cerr << "rgg: --bind expects HOST:PORT\n";
        return 2;
      }
      int port = 0;
      try {
        port = std::stoi(bind.substr(colon + 1));
      } catch (const std::exception&) {
        std::cerr << "rgg: invalid port in --bind '" << bind << "'\n";
        return 2;
      }
      if (admin_token.empty()) {
        if (const char* env = std::getenv("RGG_ADMIN_TOKEN")) admin_token = env;
      }
      json runs = json::object();
      for (const auto& [id, path] : split_pairs(serve_runs, "--run")) runs[id] = path;
      return serve({{"state_dir", absolute(state_dir)},
                    {"cases", absolute(cases_file)},
                    {"sample", {{"runs", runs}, {"n", serve_n}, {"seed", serve_seed}, {"atlas", absolute(serve_atlas)}}},
                    {"host", bind.substr(0, colon)},
                    {"port", port},
                    {"admin_token", admin_token},
                    {"static_dir", absolute(static_dir)}});
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "rgg: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
