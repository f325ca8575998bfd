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

// Shared test helpers: scratch directories and a synthetic captioned corpus.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgg/atlas.hpp"
#include "rgg/embed_gateway.hpp"
#include "rgg/embedding_io.hpp"
#include "rgg/support.hpp"

namespace rgg::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "rgg-test-XXXXXX").string();
    if (mkdtemp(tmpl.data()) == nullptr) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Diagnostic classes with their own phrasing. Records of one class share an
// image "texture" (tokens fed to the mock image embedder) and draw caption
// sentences from the class pool, so retrieval carries caption signal.
struct ClassSpec {
  const char* name;
  std::vector<const char*> sentences;
  std::vector<const char*> texture;
};

inline const std::vector<ClassSpec>& corpus_classes() {
  static const std::vector<ClassSpec> classes = {
      {"ductal",
       {"Invasive ductal carcinoma with marked nuclear pleomorphism.",
        "Tumor cells form irregular glands and solid nests.",
        "Mitotic figures are frequent.", "Desmoplastic stroma surrounds the tumor nests."},
       {"nests", "glands", "pleomorphic", "desmoplasia", "hyperchromatic"}},
      {"lobular",
       {"Invasive lobular carcinoma with single-file infiltration.",
        "Discohesive cells show intracytoplasmic vacuoles.",
        "Nuclei are small and uniform.", "Targetoid growth around ducts is present."},
       {"singlefile", "discohesive", "vacuole", "targetoid", "uniform"}},
      {"colon",
       {"Normal colonic mucosa with abundant goblet cells.",
        "Crypts are evenly spaced and test-tube shaped.",
        "The lamina propria contains scattered lymphocytes.", "No dysplasia is identified."},
       {"crypts", "goblet", "mucosa", "lamina", "lymphocytes"}},
      {"adenoma",
       {"Tubular adenoma with low-grade dysplasia.",
        "Crypts are lined by elongated pencillate nuclei.",
        "Goblet cell depletion is noted.", "Surface maturation is reduced."},
       {"tubular", "pencillate", "depletion", "elongated", "dysplastic"}},
      {"melanoma",
       {"Malignant melanoma with prominent nucleoli.",
        "Atypical melanocytes show pagetoid spread.",
        "Melanin pigment is seen in tumor cells.", "The dermis is infiltrated by sheets of cells."},
       {"melanin", "pagetoid", "nucleoli", "sheets", "pigment"}},
      {"granuloma",
       {"Non-necrotizing granulomas with epithelioid histiocytes.",
        "Multinucleated giant cells are present.",
        "A rim of lymphocytes surrounds each granuloma.", "No caseous necrosis is seen."},
       {"epithelioid", "giant", "histiocytes", "granuloma", "rim"}},
      {"lymphoma",
       {"Diffuse large B-cell lymphoma with sheets of large cells.",
        "Nuclei are vesicular with prominent nucleoli.",
        "Apoptotic bodies are scattered throughout.", "Normal nodal architecture is effaced."},
       {"vesicular", "effaced", "apoptotic", "diffuse", "large"}},
      {"squamous",
       {"Invasive squamous cell carcinoma with keratin pearls.",
        "Intercellular bridges are visible.",
        "Dyskeratotic cells are present at the invasive front.", "Stroma shows a lymphocytic reaction."},
       {"keratin", "pearls", "bridges", "dyskeratosis", "squamous"}},
  };
  return classes;
}

struct SyntheticCorpus {
  std::string manifest;          // JSONL
  EmbeddingTable image;          // mock image embeddings
  std::vector<std::string> ids;  // manifest order
  std::vector<std::size_t> labels;
  std::vector<std::string> primary_captions;
};

inline constexpr std::uint32_t kCorpusImageDim = 512;
inline constexpr std::uint64_t kCorpusImageSeed = 11;

inline SyntheticCorpus make_corpus(std::size_t n, std::uint64_t seed) {
  const auto& classes = corpus_classes();
  static const std::vector<const char*> noise = {"field", "section", "stain", "focus", "slide",
                                                 "region", "edge", "fold", "artifact", "tile"};
  std::mt19937_64 rng(seed);
  SyntheticCorpus c;
  c.image.dim = kCorpusImageDim;
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<std::size_t>(rng() % classes.size());
    const auto& cls = classes[label];
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "rec-%04zu", i);
    const std::string id = idbuf;

    // Two distinct class sentences; the first always names the diagnosis.
    std::vector<std::size_t> pool(cls.sentences.size() - 1);
    for (std::size_t s = 0; s < pool.size(); ++s) pool[s] = s + 1;
    std::shuffle(pool.begin(), pool.end(), rng);
    std::string caption = std::string(cls.sentences[0]) + " " + cls.sentences[pool[0]];
    std::vector<std::string> captions{caption};
    if (rng() % 4 == 0) captions.push_back(cls.sentences[pool[1]]);

    std::string texture;
    for (const char* t : cls.texture) {
      if (rng() % 5 != 0) texture += std::string(t) + " ";
    }
    for (int k = 0; k < 3; ++k) texture += std::string(noise[rng() % noise.size()]) + " ";

    nlohmann::json rec{{"id", id},
                       {"image_uri", "slides/" + id + ".png"},
                       {"captions", captions},
                       {"meta", {{"split", "atlas"}}}};
    c.manifest += rec.dump() + "\n";
    c.image.rows.push_back(
        {id, mock_embed(kCorpusImageSeed, Modality::kImage, texture, kCorpusImageDim).values});
    c.ids.push_back(id);
    c.labels.push_back(label);
    c.primary_captions.push_back(caption);
  }
  return c;
}

// Writes manifest + embedding file for `corpus` into `dir`.
inline std::pair<std::filesystem::path, std::filesystem::path> write_corpus(
    const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  const auto manifest = dir / "manifest.jsonl";
  const auto emb = dir / "mock-image.emb";
  write_text(manifest, corpus.manifest);
  std::ofstream out(emb, std::ios::binary);
  write_embeddings(out, corpus.image);
  return {manifest, emb};
}

inline Atlas corpus_atlas(const SyntheticCorpus& corpus, const std::string& backbone = "mock-image") {
  std::istringstream manifest(corpus.manifest);
  return attach_embeddings(ingest_manifest(manifest), backbone, corpus.image).atlas;
}

}  // namespace rgg::testing
