// SPDX-License-Identifier: Apache-2.0
//
// Batch assembly, ADAM optimization, epoch loop with dev-set model
// selection, and the versioned checkpoint container.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relscore/image.hpp"
#include "relscore/model.hpp"
#include "relscore/scoring.hpp"
#include "relscore/vocab.hpp"

namespace relscore {

struct Hyperparams {
  ModelConfig model;
  std::size_t batch_size = 32;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 300;
  std::uint64_t seed = 1;
  int min_count = 2;

  void validate() const;
};

// Captions resolved against a vocabulary and feature set: sentence i is the
// positive pair of image pointer i.
struct PairedDataset {
  std::vector<Sentence> sentences;
  std::vector<const ImageFeature*> images;

  std::size_t size() const { return sentences.size(); }
  std::size_t distinct_images() const;

  static PairedDataset build(const CaptionDataset& captions,
                             const Vocabulary& vocab,
                             const FeatureSet& features);
};

// One random batch: B pairs with pairwise-distinct image ids.
TrainingBatch build_batch(const PairedDataset& data, std::size_t batch_size,
                          Rng& rng);

// A full pass over the shuffled dataset in chunks of B, greedily deferring
// records whose image already appears in the open chunk. Short leftovers
// are dropped for the epoch.
std::vector<TrainingBatch> plan_epoch(const PairedDataset& data,
                                      std::size_t batch_size, Rng& rng);

// Per-parameter first/second moment accumulators plus the shared step count.
struct AdamState {
  struct Slot {
    std::vector<double> m;
    std::vector<double> v;
  };
  std::vector<Slot> slots;
  long step = 0;

  static AdamState for_params(const std::vector<Parameter*>& params);
};

// One bias-corrected ADAM update from the gradients currently accumulated in
// the parameters. Gradients are not cleared here.
void adam_step(const std::vector<Parameter*>& params, AdamState& state,
               const Hyperparams& hp);

struct EpochStats {
  std::size_t epoch = 0;   // 1-based
  double loss = 0.0;       // mean batch loss
  double dev_metric = 0.0; // 1-of-6 ranking accuracy on dev, percent
};

struct TrainResult {
  ModelParams params;      // parameters from the best dev epoch
  std::vector<EpochStats> log;
  std::size_t best_epoch = 0;  // 0 = initialization
  double best_dev = 0.0;
};

// epoch<TAB>loss<TAB>dev_metric, one line per epoch.
std::string format_train_log(const std::vector<EpochStats>& log);

// Train with dev evaluation after every full pass; returns the parameters
// of the best dev epoch (ties keep the later, more-trained epoch). A
// non-empty pretrained_path overwrites matching embedding rows after the
// random initialization.
TrainResult train(const CaptionDataset& train_captions,
                  const CaptionDataset& dev_captions,
                  const FeatureSet& features, const Vocabulary& vocab,
                  const Hyperparams& hp, const std::string& pretrained_path = "");

struct SeedSweep {
  std::vector<TrainResult> runs;  // seeds hp.seed, hp.seed+1, ...
  double mean_best_dev = 0.0;
};

// Randomness affects both initialization and negative sampling, so headline
// numbers come from several seeds averaged.
SeedSweep train_seeds(const CaptionDataset& train_captions,
                      const CaptionDataset& dev_captions,
                      const FeatureSet& features, const Vocabulary& vocab,
                      Hyperparams hp, std::size_t n_seeds,
                      const std::string& pretrained_path = "");

// ---- checkpoint container ---------------------------------------------------
// Layout: magic "RELSCKPT", u32 version, hyperparameter block, dimension
// table, vocabulary, then each parameter as name/shape/little-endian f64
// values. Round-trips are exact.

void save_checkpoint(const std::string& path, const Hyperparams& hp,
                     const Vocabulary& vocab, ModelParams& params);

struct LoadedModel {
  Hyperparams hp;
  Vocabulary vocab;
  ModelParams params;
};

LoadedModel load_checkpoint(const std::string& path);

}  // namespace relscore
