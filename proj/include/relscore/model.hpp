// SPDX-License-Identifier: Apache-2.0
//
// The full relevance model: embeddings -> LSTM sentence vector u, gated
// image projection v, pairwise score and batch loss. The baseline
// configuration scores with cosine and trains with the margin hinge; the
// improved configuration scores with dot products and trains with the
// batch-softmax cross-entropy.

#pragma once

#include <cstdint>
#include <vector>

#include "relscore/image.hpp"
#include "relscore/lstm.hpp"
#include "relscore/scoring.hpp"
#include "relscore/tensor.hpp"
#include "relscore/vocab.hpp"

namespace relscore {

enum class LossKind { hinge, xent };

struct ModelConfig {
  std::size_t embed_dim = 300;
  std::size_t hidden_dim = 300;
  std::size_t feature_dim = 1024;
  LossKind loss = LossKind::xent;
  bool gating = true;
  double margin = 0.2;
  double dropout = 0.5;

  ScoreKind score_kind() const {
    return loss == LossKind::hinge ? ScoreKind::cosine : ScoreKind::dot;
  }
};

struct ModelParams {
  EmbeddingTable embed;
  LstmParams lstm;
  GateParams gate;

  // Stable iteration order for the optimizer and checkpoints.
  std::vector<Parameter*> all();
};

// Every parameter drawn N(0, 0.1^2) from the given generator, embeddings
// included (pretrained vectors may overwrite embedding rows afterwards).
ModelParams init_params(const ModelConfig& cfg, std::size_t vocab_size,
                        Rng& rng);
ModelParams init_params(const ModelConfig& cfg, std::size_t vocab_size,
                        std::uint64_t seed);

// Encode one sentence to its vector u on the given tape.
Tensor sentence_vector(Tape& tape, ModelParams& params, const ModelConfig& cfg,
                       const Sentence& sentence, Mode mode, Rng& rng);

struct BatchForward {
  Tensor score_matrix;               // C[j][i] = score(sentence j, image i)
  Tensor loss;
  std::vector<Tensor> sentence_vecs; // u_j in batch order
};

// Full forward pass over a batch: one dropout mask per embedding position
// and per image, gate conditioned on each scoring sentence, loss per the
// configured objective. gate_input_override substitutes the (gradient-
// stopped) sentence vectors fed to the gate; the finite-difference harness
// uses it to probe the exact function the backward pass differentiates.
BatchForward forward_batch(
    Tape& tape, ModelParams& params, const ModelConfig& cfg,
    const TrainingBatch& batch, Mode mode, Rng& rng,
    const std::vector<std::vector<double>>* gate_input_override = nullptr);

// Score one (sentence, image) pair in test mode (dropout scaled by 1-p).
double score_pair(ModelParams& params, const ModelConfig& cfg,
                  const Sentence& sentence, const ImageFeature& image);

// Score one image against a precomputed sentence vector; lets callers
// encode a sentence once and score several candidate images.
double score_with_vector(ModelParams& params, const ModelConfig& cfg,
                         const std::vector<double>& u,
                         const ImageFeature& image);

// Sentence vector values in test mode, for reuse across candidates.
std::vector<double> encode_sentence_values(ModelParams& params,
                                           const ModelConfig& cfg,
                                           const Sentence& sentence);

// Gate values sigma(u W_z + b_z) for one sentence, in (0,1).
std::vector<double> gate_values(ModelParams& params, const ModelConfig& cfg,
                                const Sentence& sentence);

}  // namespace relscore
