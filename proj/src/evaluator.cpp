// SPDX-License-Identifier: Apache-2.0

#include "relscore/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace relscore {

namespace {

void require_both_classes(const std::vector<ScoredPair>& pairs,
                          const char* what) {
  bool has_rel = false, has_irr = false;
  for (const ScoredPair& p : pairs) {
    if (p.gold == GoldLabel::relevant) has_rel = true;
    if (p.gold == GoldLabel::irrelevant) has_irr = true;
    if (p.gold == GoldLabel::unknown) {
      throw DataError(std::string(what) + ": pair " + p.answer_id +
                      " has no gold label");
    }
    if (!std::isfinite(p.score)) {
      throw NumericError(std::string(what) + ": non-finite score for " +
                         p.answer_id);
    }
  }
  if (!has_rel || !has_irr) {
    throw DataError(std::string(what) + ": both label classes required");
  }
}

// Threshold candidates over a score set: -inf, midpoints between adjacent
// distinct sorted scores, +inf.
std::vector<double> threshold_candidates(std::vector<double> scores) {
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  std::vector<double> cands;
  cands.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
    cands.push_back(0.5 * (scores[i] + scores[i + 1]));
  }
  cands.push_back(std::numeric_limits<double>::infinity());
  return cands;
}

// Accuracy of "score >= threshold => relevant" over the given pairs.
double threshold_accuracy(const std::vector<const ScoredPair*>& pairs,
                          double threshold) {
  std::size_t correct = 0;
  for (const ScoredPair* p : pairs) {
    bool predicted_relevant = p->score >= threshold;
    bool is_relevant = p->gold == GoldLabel::relevant;
    if (predicted_relevant == is_relevant) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

// Ascending score with answer_id tie-breaking: the ranking used by AP and
// precision@k, most confidently irrelevant first. Stable, so full ties keep
// their input order.
std::vector<const ScoredPair*> ranked_ascending(
    const std::vector<ScoredPair>& pairs) {
  std::vector<const ScoredPair*> order;
  order.reserve(pairs.size());
  for (const ScoredPair& p : pairs) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(),
                   [](const ScoredPair* a, const ScoredPair* b) {
                     if (a->score != b->score) return a->score < b->score;
                     return a->answer_id < b->answer_id;
                   });
  return order;
}

}  // namespace

double loo_accuracy(const std::vector<ScoredPair>& pairs) {
  if (pairs.size() < 2) {
    throw ContractError("loo_accuracy: need at least 2 pairs");
  }
  require_both_classes(pairs, "loo_accuracy");
  std::size_t correct = 0;
  for (std::size_t held = 0; held < pairs.size(); ++held) {
    std::vector<const ScoredPair*> rest;
    std::vector<double> rest_scores;
    rest.reserve(pairs.size() - 1);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (i == held) continue;
      rest.push_back(&pairs[i]);
      rest_scores.push_back(pairs[i].score);
    }
    double best_threshold = -std::numeric_limits<double>::infinity();
    double best_acc = -1.0;
    for (double t : threshold_candidates(rest_scores)) {
      double acc = threshold_accuracy(rest, t);
      if (acc > best_acc) {  // ties keep the lowest threshold
        best_acc = acc;
        best_threshold = t;
      }
    }
    bool predicted_relevant = pairs[held].score >= best_threshold;
    bool is_relevant = pairs[held].gold == GoldLabel::relevant;
    if (predicted_relevant == is_relevant) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double average_precision(const std::vector<ScoredPair>& pairs) {
  if (pairs.empty()) throw ContractError("average_precision: no pairs");
  require_both_classes(pairs, "average_precision");
  std::vector<const ScoredPair*> order = ranked_ascending(pairs);
  std::size_t irrelevant_seen = 0;
  double precision_sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (order[rank]->gold == GoldLabel::irrelevant) {
      ++irrelevant_seen;
      precision_sum += static_cast<double>(irrelevant_seen) /
                       static_cast<double>(rank + 1);
    }
  }
  return 100.0 * precision_sum / static_cast<double>(irrelevant_seen);
}

double precision_at_k(const std::vector<ScoredPair>& pairs, std::size_t k) {
  if (k == 0) throw ParameterError("precision_at_k: k must be positive");
  if (pairs.size() < k) {
    throw ContractError("precision_at_k: " + std::to_string(pairs.size()) +
                        " pairs for k=" + std::to_string(k));
  }
  require_both_classes(pairs, "precision_at_k");
  std::vector<const ScoredPair*> order = ranked_ascending(pairs);
  std::size_t irrelevant = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (order[i]->gold == GoldLabel::irrelevant) ++irrelevant;
  }
  return 100.0 * static_cast<double>(irrelevant) / static_cast<double>(k);
}

std::pair<double, double> mean_pos_neg(const std::vector<ScoredPair>& pairs) {
  require_both_classes(pairs, "mean_pos_neg");
  double pos_sum = 0.0, neg_sum = 0.0;
  std::size_t pos_n = 0, neg_n = 0;
  for (const ScoredPair& p : pairs) {
    if (p.gold == GoldLabel::relevant) {
      pos_sum += p.score;
      ++pos_n;
    } else {
      neg_sum += p.score;
      ++neg_n;
    }
  }
  return {pos_sum / static_cast<double>(pos_n),
          neg_sum / static_cast<double>(neg_n)};
}

bool rank_hit(const std::vector<double>& scores, std::size_t true_index) {
  if (true_index >= scores.size()) {
    throw ContractError("rank_hit: true index out of range");
  }
  double true_score = scores[true_index];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == true_index) continue;
    if (scores[i] >= true_score) return false;
  }
  return true;
}

bool rank_1of6(ModelParams& params, const ModelConfig& cfg,
               const Sentence& sentence,
               const std::vector<const ImageFeature*>& candidates,
               std::size_t true_index) {
  if (candidates.size() != 6) {
    throw ContractError("rank_1of6: need 6 candidates, got " +
                        std::to_string(candidates.size()));
  }
  if (true_index >= candidates.size()) {
    throw ContractError("rank_1of6: true index out of range");
  }
  std::unordered_set<std::string> ids;
  for (const ImageFeature* c : candidates) {
    if (!ids.insert(c->id).second) {
      throw ContractError("rank_1of6: duplicate candidate id " + c->id);
    }
  }
  std::vector<double> u = encode_sentence_values(params, cfg, sentence);
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const ImageFeature* img : candidates) {
    scores.push_back(score_with_vector(params, cfg, u, *img));
  }
  return rank_hit(scores, true_index);
}

std::vector<const ImageFeature*> sample_distractors(
    const std::vector<const ImageFeature*>& pool, const std::string& exclude_id,
    std::size_t n, Rng& rng) {
  std::vector<const ImageFeature*> eligible;
  eligible.reserve(pool.size());
  for (const ImageFeature* f : pool) {
    if (f->id != exclude_id) eligible.push_back(f);
  }
  if (eligible.size() < n) {
    throw DataError("sample_distractors: need " + std::to_string(n) +
                    " distinct images, pool has " +
                    std::to_string(eligible.size()));
  }
  // Partial Fisher-Yates: the first n slots become the sample.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + uniform_index(rng, eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(n);
  return eligible;
}

double score_answer(ModelParams& params, const ModelConfig& cfg,
                    const std::vector<Sentence>& sentences,
                    const ImageFeature& image) {
  if (sentences.empty()) throw ContractError("score_answer: empty answer");
  double sum = 0.0;
  for (const Sentence& s : sentences) {
    sum += score_pair(params, cfg, s, image);
  }
  return sum / static_cast<double>(sentences.size());
}

std::vector<Answer> load_answers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read answers file: " + path);
  std::vector<Answer> answers;
  std::unordered_map<std::string, std::size_t> by_id;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      throw FormatError("answers file " + path + " line " +
                        std::to_string(lineno) +
                        ": expected answer_id<TAB>sentence");
    }
    std::string id = line.substr(0, tab);
    std::string text = line.substr(tab + 1);
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      by_id.emplace(id, answers.size());
      answers.push_back({id, {text}});
    } else {
      answers[it->second].sentences.push_back(text);
    }
  }
  return answers;
}

std::vector<EvalPairRecord> load_pairs(const std::string& path,
                                       bool require_label) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read pairs file: " + path);
  std::vector<EvalPairRecord> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string answer_id, image_id, label;
    std::getline(is, answer_id, '\t');
    std::getline(is, image_id, '\t');
    bool has_label = static_cast<bool>(std::getline(is, label, '\t'));
    if (answer_id.empty() || image_id.empty() || (require_label && !has_label)) {
      throw FormatError("pairs file " + path + " line " +
                        std::to_string(lineno) +
                        ": expected answer_id<TAB>image_id<TAB>label");
    }
    EvalPairRecord rec;
    rec.answer_id = answer_id;
    rec.image_id = image_id;
    if (has_label) {
      if (label == "rel") {
        rec.label = GoldLabel::relevant;
      } else if (label == "irr") {
        rec.label = GoldLabel::irrelevant;
      } else {
        throw FormatError("pairs file " + path + " line " +
                          std::to_string(lineno) + ": label '" + label +
                          "' is not rel|irr");
      }
    }
    pairs.push_back(std::move(rec));
  }
  return pairs;
}

void write_pairs(const std::vector<EvalPairRecord>& pairs,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write pairs file: " + path);
  for (const EvalPairRecord& p : pairs) {
    out << p.answer_id << "\t" << p.image_id;
    if (p.label != GoldLabel::unknown) {
      out << "\t" << (p.label == GoldLabel::relevant ? "rel" : "irr");
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing pairs file: " + path);
}

std::vector<EvalPairRecord> make_eval_pairs(
    const std::vector<std::pair<std::string, std::string>>& positives,
    const FeatureSet& features, Rng& rng) {
  if (features.size() < 2) {
    throw DataError("make_eval_pairs: need at least 2 images");
  }
  std::vector<EvalPairRecord> pairs;
  pairs.reserve(positives.size() * 2);
  for (const auto& [answer_id, image_id] : positives) {
    pairs.push_back({answer_id, image_id, GoldLabel::relevant});
    // Random image distinct from the answer's own.
    std::size_t pick;
    do {
      pick = uniform_index(rng, features.size());
    } while (features.at(pick).id == image_id);
    pairs.push_back({answer_id, features.at(pick).id, GoldLabel::irrelevant});
  }
  return pairs;
}

std::vector<ScoredPair> score_pairs(ModelParams& params, const ModelConfig& cfg,
                                    const Vocabulary& vocab,
                                    const std::vector<Answer>& answers,
                                    const std::vector<EvalPairRecord>& pairs,
                                    const FeatureSet& features) {
  std::unordered_map<std::string, std::vector<Sentence>> encoded;
  for (const Answer& a : answers) {
    std::vector<Sentence> ss;
    ss.reserve(a.sentences.size());
    for (const std::string& text : a.sentences) ss.push_back(vocab.encode(text));
    encoded.emplace(a.id, std::move(ss));
  }
  std::vector<ScoredPair> scored;
  scored.reserve(pairs.size());
  for (const EvalPairRecord& rec : pairs) {
    auto it = encoded.find(rec.answer_id);
    if (it == encoded.end()) {
      throw DataError("pairs reference unknown answer id: " + rec.answer_id);
    }
    const ImageFeature& img = features.require(rec.image_id);
    ScoredPair sp;
    sp.answer_id = rec.answer_id;
    sp.image_id = rec.image_id;
    sp.score = score_answer(params, cfg, it->second, img);
    sp.gold = rec.label;
    scored.push_back(std::move(sp));
  }
  return scored;
}

EvalReport evaluate_pairs(ModelParams& params, const ModelConfig& cfg,
                          const Vocabulary& vocab,
                          const std::vector<Answer>& answers,
                          const std::vector<EvalPairRecord>& pairs,
                          const FeatureSet& features, std::size_t k) {
  std::vector<ScoredPair> scored =
      score_pairs(params, cfg, vocab, answers, pairs, features);
  EvalReport report;
  report.pairs = scored.size();
  report.k = k;
  report.accuracy_pct = loo_accuracy(scored);
  report.ap_pct = average_precision(scored);
  report.p_at_k_pct = precision_at_k(scored, k);
  auto [pos, neg] = mean_pos_neg(scored);
  report.mean_pos = pos;
  report.mean_neg = neg;
  return report;
}

double rank6_accuracy(ModelParams& params, const ModelConfig& cfg,
                      const Vocabulary& vocab, const CaptionDataset& captions,
                      const FeatureSet& features, std::size_t trials, Rng& rng) {
  if (captions.size() == 0) throw DataError("rank6_accuracy: empty captions");
  if (trials == 0) throw ParameterError("rank6_accuracy: trials must be positive");

  std::vector<Sentence> sentences;
  std::vector<const ImageFeature*> images;
  sentences.reserve(captions.size());
  for (const CaptionRecord& rec : captions.records) {
    sentences.push_back(vocab.encode(rec.text));
    images.push_back(&features.require(rec.image_id));
  }
  std::vector<const ImageFeature*> pool;
  {
    std::unordered_set<std::string> seen;
    for (const ImageFeature* f : images) {
      if (seen.insert(f->id).second) pool.push_back(f);
    }
  }

  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::size_t idx = uniform_index(rng, sentences.size());
    std::vector<const ImageFeature*> candidates;
    candidates.push_back(images[idx]);
    for (const ImageFeature* d :
         sample_distractors(pool, images[idx]->id, 5, rng)) {
      candidates.push_back(d);
    }
    if (rank_1of6(params, cfg, sentences[idx], candidates, 0)) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(trials);
}

void export_gates(ModelParams& params, const ModelConfig& cfg,
                  const Vocabulary& vocab, const std::vector<Answer>& answers,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write gates file: " + path);
  char buf[32];
  for (const Answer& a : answers) {
    for (std::size_t s = 0; s < a.sentences.size(); ++s) {
      Sentence sent = vocab.encode(a.sentences[s]);
      std::vector<double> z = gate_values(params, cfg, sent);
      if (a.sentences.size() == 1) {
        out << a.id;
      } else {
        out << a.id << "#" << s;
      }
      for (std::size_t g = 0; g < z.size(); ++g) {
        std::snprintf(buf, sizeof(buf), "%c%.6f", g == 0 ? '\t' : ' ', z[g]);
        out << buf;
      }
      out << "\n";
    }
  }
  if (!out) throw IoError("failed writing gates file: " + path);
}

std::string format_report(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "metric        value\n"
                "-----------   --------\n"
                "accuracy      %8.2f\n"
                "ap            %8.2f\n"
                "p@%-3zu         %8.2f\n"
                "mean_pos      %8.4f\n"
                "mean_neg      %8.4f\n"
                "pairs         %8zu\n",
                r.accuracy_pct, r.ap_pct, r.k, r.p_at_k_pct, r.mean_pos,
                r.mean_neg, r.pairs);
  return buf;
}

std::string report_kv(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "accuracy=%.4f\nap=%.4f\np_at_k=%.4f\nk=%zu\nmean_pos=%.6f\n"
                "mean_neg=%.6f\npairs=%zu\n",
                r.accuracy_pct, r.ap_pct, r.p_at_k_pct, r.k, r.mean_pos,
                r.mean_neg, r.pairs);
  return buf;
}

}  // namespace relscore
