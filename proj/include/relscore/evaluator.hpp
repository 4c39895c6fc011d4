// SPDX-License-Identifier: Apache-2.0
//
// Evaluation protocols: leave-one-out threshold accuracy, average precision
// and precision@k over the irrelevant class, 1-of-6 image ranking, mean
// positive/negative scores, and gate-weight export.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "relscore/image.hpp"
#include "relscore/model.hpp"
#include "relscore/vocab.hpp"

namespace relscore {

enum class GoldLabel { relevant, irrelevant, unknown };

struct ScoredPair {
  std::string answer_id;
  std::string image_id;
  double score = 0.0;
  GoldLabel gold = GoldLabel::unknown;
};

struct EvalReport {
  double accuracy_pct = 0.0;
  double ap_pct = 0.0;
  double p_at_k_pct = 0.0;
  std::size_t k = 50;
  double mean_pos = 0.0;
  double mean_neg = 0.0;
  std::size_t pairs = 0;
};

// Leave-one-out threshold accuracy, percent. For each held-out pair the
// threshold maximizing accuracy on the rest (candidates: -inf, midpoints of
// adjacent distinct sorted scores, +inf; score >= threshold means relevant;
// accuracy ties keep the lowest threshold) classifies the held-out pair.
double loo_accuracy(const std::vector<ScoredPair>& pairs);

// Average precision of the irrelevant class, percent. Pairs are ranked by
// ascending score (most confidently irrelevant first), score ties broken by
// answer_id order.
double average_precision(const std::vector<ScoredPair>& pairs);

// Fraction of the k lowest-scored pairs that are gold-irrelevant, percent.
double precision_at_k(const std::vector<ScoredPair>& pairs, std::size_t k);

// (mean positive score, mean negative score); both classes must be present.
std::pair<double, double> mean_pos_neg(const std::vector<ScoredPair>& pairs);

// Hit iff scores[true_index] is the strictly highest candidate score; any
// tie with a distractor counts as a miss.
bool rank_hit(const std::vector<double>& scores, std::size_t true_index);

// One 1-of-6 ranking trial: the marked true image against five distractors.
// Candidate ids must be distinct.
bool rank_1of6(ModelParams& params, const ModelConfig& cfg,
               const Sentence& sentence,
               const std::vector<const ImageFeature*>& candidates,
               std::size_t true_index);

// n distinct images from the pool, excluding exclude_id.
std::vector<const ImageFeature*> sample_distractors(
    const std::vector<const ImageFeature*>& pool, const std::string& exclude_id,
    std::size_t n, Rng& rng);

// ---- model-level protocols --------------------------------------------------

// Mean of the per-sentence model scores against the image (test mode).
double score_answer(ModelParams& params, const ModelConfig& cfg,
                    const std::vector<Sentence>& sentences,
                    const ImageFeature& image);

// An answer: one id, one or more sentences.
struct Answer {
  std::string id;
  std::vector<std::string> sentences;
};

// Answers file: answer_id<TAB>sentence, multi-row answers share answer_id.
std::vector<Answer> load_answers(const std::string& path);

struct EvalPairRecord {
  std::string answer_id;
  std::string image_id;
  GoldLabel label = GoldLabel::unknown;
};

// Pairs file: answer_id<TAB>image_id<TAB>label with label in {rel, irr}.
// With require_label=false the label column may be absent.
std::vector<EvalPairRecord> load_pairs(const std::string& path,
                                       bool require_label);
void write_pairs(const std::vector<EvalPairRecord>& pairs,
                 const std::string& path);

// One relevant pair per positive plus one seeded random negative, never
// reusing the answer's own image.
std::vector<EvalPairRecord> make_eval_pairs(
    const std::vector<std::pair<std::string, std::string>>& positives,
    const FeatureSet& features, Rng& rng);

// Score every pair record with the model.
std::vector<ScoredPair> score_pairs(ModelParams& params, const ModelConfig& cfg,
                                    const Vocabulary& vocab,
                                    const std::vector<Answer>& answers,
                                    const std::vector<EvalPairRecord>& pairs,
                                    const FeatureSet& features);

// Full labeled-pair protocol: LOO accuracy, AP, P@k, mean pos/neg.
EvalReport evaluate_pairs(ModelParams& params, const ModelConfig& cfg,
                          const Vocabulary& vocab,
                          const std::vector<Answer>& answers,
                          const std::vector<EvalPairRecord>& pairs,
                          const FeatureSet& features, std::size_t k);

// 1-of-6 ranking accuracy (percent) over `trials` sentences sampled from the
// captions; distractors come from the split's own images.
double rank6_accuracy(ModelParams& params, const ModelConfig& cfg,
                      const Vocabulary& vocab, const CaptionDataset& captions,
                      const FeatureSet& features, std::size_t trials, Rng& rng);

// One row per sentence: sentence_id<TAB>g1 g2 ... gK. Single-sentence
// answers use the answer id; sentence s of a multi-sentence answer uses
// id#s (0-based).
void export_gates(ModelParams& params, const ModelConfig& cfg,
                  const Vocabulary& vocab, const std::vector<Answer>& answers,
                  const std::string& path);

std::string format_report(const EvalReport& report);   // aligned text table
std::string report_kv(const EvalReport& report);       // key=value lines

}  // namespace relscore
