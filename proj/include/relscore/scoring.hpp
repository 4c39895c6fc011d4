// SPDX-License-Identifier: Apache-2.0
//
// Relevance scores (cosine, dot), the two training objectives (margin hinge,
// batch-softmax cross-entropy) and in-batch negative construction.
//
// Both losses consume a B x B score matrix C with C[j][i] = score of
// sentence j against image i: column i holds the positive pair on the
// diagonal and its in-batch negatives off it.

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "relscore/image.hpp"
#include "relscore/tensor.hpp"
#include "relscore/vocab.hpp"

namespace relscore {

enum class ScoreKind { cosine, dot };

// B aligned positive pairs with pairwise-distinct image ids. The negative
// set of pair i is implied: every other sentence j paired with image i.
struct TrainingBatch {
  std::vector<const Sentence*> sentences;
  std::vector<const ImageFeature*> images;

  std::size_t size() const { return sentences.size(); }
  // Enforces aligned sizes, B >= 2 and distinct image ids.
  void validate() const;
  // All (sentence j, image i) negative index pairs, j != i. With unique
  // images this is exactly B*B - B combinations.
  std::vector<std::pair<std::size_t, std::size_t>> negative_pairs() const;
};

// ---- plain scores (no gradients) -------------------------------------------

double score_cosine(const std::vector<double>& u, const std::vector<double>& v);
double score_dot(const std::vector<double>& u, const std::vector<double>& v);

// Probability of scores[positive] under the batch softmax over all entries,
// computed with max-subtraction. Result in (0, 1].
double batch_softmax(const std::vector<double>& scores, std::size_t positive);

// ---- tape score matrices and losses (training path) ------------------------

// Image projections independent of the sentence (gating off): v_rows[i] is
// the projection of image i, C[j][i] = score(u_rows[j], v_rows[i]).
Tensor score_matrix_shared(Tape& tape, const Tensor& u_rows,
                           const Tensor& v_rows, ScoreKind kind);

// Sentence-conditioned projections (gating on): v_per_image[i] is a [B,H]
// matrix whose row j is image i projected under sentence j's gate.
Tensor score_matrix_gated(Tape& tape, const Tensor& u_rows,
                          const std::vector<Tensor>& v_per_image,
                          ScoreKind kind);

// sum_i sum_{j != i} max(C[j][i] - C[i][i] + m, 0)
Tensor hinge_loss(Tape& tape, const Tensor& score_matrix, double margin);

// -sum_i log softmax_i with Z_i over column i; stabilized by subtracting the
// column max (a constant shift the softmax is invariant to).
Tensor cross_entropy_loss(Tape& tape, const Tensor& score_matrix);

}  // namespace relscore
