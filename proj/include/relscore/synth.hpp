// SPDX-License-Identifier: Apache-2.0
//
// Synthetic caption/feature generator so the harness needs no external
// datasets. Images are Gaussian features around cluster centroids, refined
// by a small shared pool of detail directions; captions name the cluster
// and the detail with cluster-conditioned vocabularies, so text carries
// enough signal to rank the true image above random distractors.

#pragma once

#include <cstdint>
#include <string>

#include "relscore/image.hpp"
#include "relscore/vocab.hpp"

namespace relscore {

struct SynthConfig {
  std::size_t clusters = 8;
  std::size_t feature_dim = 64;
  std::size_t n_train = 500;
  std::size_t n_dev = 100;
  std::size_t n_test = 100;
  std::uint64_t seed = 1;

  std::size_t detail_pool = 24;     // shared detail directions
  std::size_t cluster_tokens = 4;   // vocabulary size per cluster
  double centroid_scale = 1.0;
  double detail_scale = 1.2;
  double noise_sd = 0.03;

  void validate() const;
};

struct SynthData {
  CaptionDataset train;
  CaptionDataset dev;
  CaptionDataset test;
  FeatureSet features;  // all splits share one feature file
};

SynthData generate_synthetic(const SynthConfig& config);

// Writes train.tsv, dev.tsv, test.tsv, features.tsv, answers.tsv (one answer
// per test caption) and pairs.tsv (one rel + one seeded irr per answer).
void write_synthetic(const SynthData& data, const std::string& out_dir,
                     std::uint64_t pair_seed);

}  // namespace relscore
