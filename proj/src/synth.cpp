// SPDX-License-Identifier: Apache-2.0

#include "relscore/synth.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "relscore/evaluator.hpp"

namespace relscore {

void SynthConfig::validate() const {
  if (clusters < 2) throw ParameterError("gen-synth: need at least 2 clusters");
  if (feature_dim < 2) throw ParameterError("gen-synth: feature dim too small");
  if (n_train == 0 || n_dev == 0 || n_test == 0) {
    throw ParameterError("gen-synth: all splits must be non-empty");
  }
  if (detail_pool < 2) throw ParameterError("gen-synth: detail pool too small");
}

namespace {

const char* kFillers[] = {"the", "a", "is", "in", "on", "of", "and", "with"};
constexpr std::size_t kFillerCount = sizeof(kFillers) / sizeof(kFillers[0]);

struct Generator {
  const SynthConfig& config;
  Rng rng;
  std::vector<std::vector<double>> centroids;        // per cluster
  std::vector<std::vector<double>> detail_dirs;      // shared pool
  std::vector<std::vector<std::string>> cluster_vocab;
  std::vector<std::string> detail_vocab;
  std::size_t next_image = 0;

  explicit Generator(const SynthConfig& s) : config(s), rng(s.seed) {
    centroids.resize(config.clusters);
    for (auto& c : centroids) {
      c.resize(config.feature_dim);
      for (double& v : c) v = gaussian(rng, 0.0, config.centroid_scale);
    }
    detail_dirs.resize(config.detail_pool);
    for (auto& d : detail_dirs) {
      d.resize(config.feature_dim);
      for (double& v : d) v = gaussian(rng, 0.0, config.detail_scale);
    }
    cluster_vocab.resize(config.clusters);
    for (std::size_t c = 0; c < config.clusters; ++c) {
      for (std::size_t t = 0; t < config.cluster_tokens; ++t) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "w%zuc%zu", t, c);
        cluster_vocab[c].push_back(buf);
      }
    }
    for (std::size_t d = 0; d < config.detail_pool; ++d) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "dtl%zu", d);
      detail_vocab.push_back(buf);
    }
  }

  CaptionDataset make_split(std::size_t n, FeatureSet& features) {
    CaptionDataset ds;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t cluster = uniform_index(rng, config.clusters);
      std::size_t detail = uniform_index(rng, config.detail_pool);

      ImageFeature f;
      char idbuf[32];
      std::snprintf(idbuf, sizeof(idbuf), "img%06zu", next_image++);
      f.id = idbuf;
      f.x.resize(config.feature_dim);
      for (std::size_t d = 0; d < config.feature_dim; ++d) {
        f.x[d] = centroids[cluster][d] + detail_dirs[detail][d] +
                 gaussian(rng, 0.0, config.noise_sd);
      }
      features.add(f);

      // Caption: the detail word framing a few cluster words, with the odd
      // filler. The repeated detail token keeps its signal alive under
      // heavy embedding dropout.
      std::string text = detail_vocab[detail];
      std::size_t n_cluster_words = 3 + uniform_index(rng, 3);
      for (std::size_t w = 0; w < n_cluster_words; ++w) {
        text += " ";
        text += cluster_vocab[cluster][uniform_index(rng, config.cluster_tokens)];
        if (uniform01(rng) < 0.15) {
          text += " ";
          text += kFillers[uniform_index(rng, kFillerCount)];
        }
      }
      text += " ";
      text += detail_vocab[detail];
      ds.records.push_back({f.id, text});
    }
    return ds;
  }
};

}  // namespace

SynthData generate_synthetic(const SynthConfig& config) {
  config.validate();
  Generator gen(config);
  SynthData data;
  data.train = gen.make_split(config.n_train, data.features);
  data.dev = gen.make_split(config.n_dev, data.features);
  data.test = gen.make_split(config.n_test, data.features);
  return data;
}

namespace {

void write_captions(const CaptionDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write captions file: " + path);
  for (const CaptionRecord& rec : ds.records) {
    out << rec.image_id << "\t" << rec.text << "\n";
  }
  if (!out) throw IoError("failed writing captions file: " + path);
}

}  // namespace

void write_synthetic(const SynthData& data, const std::string& out_dir,
                     std::uint64_t pair_seed) {
  std::filesystem::create_directories(out_dir);
  auto path = [&](const char* name) { return out_dir + "/" + name; };
  write_captions(data.train, path("train.tsv"));
  write_captions(data.dev, path("dev.tsv"));
  write_captions(data.test, path("test.tsv"));
  write_features(data.features, path("features.tsv"));

  // Answers: one per test caption; pairs: that answer's image plus one
  // seeded random negative drawn from the test images.
  std::ofstream answers(path("answers.tsv"));
  if (!answers) throw IoError("cannot write answers file: " + path("answers.tsv"));
  std::vector<std::pair<std::string, std::string>> positives;
  FeatureSet test_features;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    const CaptionRecord& rec = data.test.records[i];
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "a%05zu", i);
    answers << idbuf << "\t" << rec.text << "\n";
    positives.emplace_back(idbuf, rec.image_id);
    test_features.add(*data.features.find(rec.image_id));
  }
  if (!answers) throw IoError("failed writing answers file");

  Rng rng(pair_seed);
  write_pairs(make_eval_pairs(positives, test_features, rng), path("pairs.tsv"));
}

}  // namespace relscore
