// SPDX-License-Identifier: Apache-2.0
//
// Tokenized-text handling: vocabulary with reserved markers, embedding table
// and embedding-level dropout, plus the caption file format.

#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "relscore/tensor.hpp"

namespace relscore {

// A sentence as embedding indices, wrapped in start/end markers.
struct Sentence {
  std::vector<std::size_t> ids;
};

// Lowercase, split on whitespace, and peel leading/trailing ASCII
// punctuation into separate tokens ("dog." -> "dog", ".").
std::vector<std::string> tokenize(const std::string& text);

class Vocabulary {
 public:
  static constexpr const char* kUnknown = "<unk>";
  static constexpr const char* kStart = "<s>";
  static constexpr const char* kEnd = "</s>";

  // Reserved tokens take indices 0..2; corpus tokens with count >= min_count
  // follow, ordered by descending count with lexicographic tie-breaking.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                          int min_count);

  std::size_t size() const { return tokens_.size(); }
  int min_count() const { return min_count_; }

  // Index of a token, or the unknown index if absent.
  std::size_t lookup(const std::string& token) const;
  bool contains(const std::string& token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }

  std::size_t unknown_id() const { return 0; }
  std::size_t start_id() const { return 1; }
  std::size_t end_id() const { return 2; }

  // Lowercase + tokenize + wrap in markers + map to indices.
  Sentence encode(const std::string& text) const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  // Rebuild from an explicit index-ordered token list (checkpoint loading).
  static Vocabulary from_tokens(std::vector<std::string> tokens, int min_count);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  int min_count_ = 1;
};

// |V| x d matrix of word embeddings. Rows are initialized N(0, 0.1^2) before
// any pretrained overwrite; reserved-token rows train like any other.
struct EmbeddingTable {
  Parameter weights;
  bool trainable = true;

  EmbeddingTable() = default;
  EmbeddingTable(std::size_t vocab_size, std::size_t dim)
      : weights("embeddings", {vocab_size, dim}) {}

  std::size_t vocab_size() const { return weights.rows(); }
  std::size_t dim() const { return weights.cols(); }
};

// Row lookups followed by per-position dropout. Lookups are differentiable
// into the table rows when the table is trainable.
std::vector<Tensor> embed_sequence(Tape& tape, const Sentence& s,
                                   EmbeddingTable& table, double p, Mode mode,
                                   Rng& rng);

// Word-per-line text vectors: token followed by d reals; an optional leading
// header line with two integers is skipped. Overwrites matching rows and
// returns how many rows were initialized.
std::size_t load_pretrained(const std::string& path, const Vocabulary& vocab,
                            EmbeddingTable& table);

// Caption file: one record per line, image_id<TAB>sentence text.
struct CaptionRecord {
  std::string image_id;
  std::string text;
};

struct CaptionDataset {
  std::vector<CaptionRecord> records;
  std::size_t size() const { return records.size(); }
};

CaptionDataset load_captions(const std::string& path);

// Vocabulary over the tokenized caption texts.
Vocabulary build_vocab(const CaptionDataset& dataset, int min_count);

}  // namespace relscore
