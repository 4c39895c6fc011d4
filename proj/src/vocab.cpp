// SPDX-License-Identifier: Apache-2.0

#include "relscore/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace relscore {

namespace {

bool is_ascii_punct(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u);
}

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream is(lowercase(text));
  std::string chunk;
  while (is >> chunk) {
    // Peel leading punctuation.
    std::size_t begin = 0;
    while (begin < chunk.size() && is_ascii_punct(chunk[begin])) {
      tokens.push_back(std::string(1, chunk[begin]));
      ++begin;
    }
    // Collect trailing punctuation, emitted after the core in original order.
    std::size_t end = chunk.size();
    std::vector<char> trail;
    while (end > begin && is_ascii_punct(chunk[end - 1])) {
      trail.push_back(chunk[end - 1]);
      --end;
    }
    if (end > begin) tokens.push_back(chunk.substr(begin, end - begin));
    for (auto it = trail.rbegin(); it != trail.rend(); ++it) {
      tokens.push_back(std::string(1, *it));
    }
  }
  return tokens;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             int min_count) {
  if (min_count < 1) {
    throw ParameterError("build_vocab: min_count must be >= 1, got " +
                         std::to_string(min_count));
  }
  if (corpus.empty()) throw DataError("build_vocab: empty corpus");

  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) ++counts[tok];
  }

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : counts) {
    if (n >= static_cast<std::size_t>(min_count)) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.min_count_ = min_count;
  v.tokens_ = {kUnknown, kStart, kEnd};
  for (const auto& [tok, n] : kept) {
    // A corpus genuinely containing a reserved token keeps its reserved slot.
    if (tok == kUnknown || tok == kStart || tok == kEnd) continue;
    v.tokens_.push_back(tok);
  }
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.index_[v.tokens_[i]] = i;
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, int min_count) {
  if (tokens.size() < 3 || tokens[0] != kUnknown || tokens[1] != kStart ||
      tokens[2] != kEnd) {
    throw FormatError("vocabulary: reserved tokens missing or out of order");
  }
  Vocabulary v;
  v.min_count_ = min_count;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], i).second) {
      throw FormatError("vocabulary: duplicate token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

std::size_t Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? unknown_id() : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return index_.count(token) > 0;
}

Sentence Vocabulary::encode(const std::string& text) const {
  std::vector<std::string> tokens = tokenize(text);
  if (tokens.empty()) {
    throw ContractError("encode_sentence: empty or whitespace-only input");
  }
  Sentence s;
  s.ids.reserve(tokens.size() + 2);
  s.ids.push_back(start_id());
  for (const auto& tok : tokens) s.ids.push_back(lookup(tok));
  s.ids.push_back(end_id());
  return s;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file: " + path);
  out << "#min_count\t" << min_count_ << "\n";
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out << tokens_[i] << "\t" << i << "\n";
  }
  if (!out) throw IoError("failed writing vocabulary file: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary file: " + path);
  std::string line;
  int min_count = 1;
  std::vector<std::string> tokens;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError("vocabulary file " + path + " line " +
                        std::to_string(lineno) + ": missing tab");
    }
    std::string left = line.substr(0, tab);
    std::string right = line.substr(tab + 1);
    if (left == "#min_count") {
      min_count = std::stoi(right);
      continue;
    }
    std::size_t idx = static_cast<std::size_t>(std::stoul(right));
    if (idx != tokens.size()) {
      throw FormatError("vocabulary file " + path + " line " +
                        std::to_string(lineno) + ": index " + right +
                        " out of order");
    }
    tokens.push_back(left);
  }
  return from_tokens(std::move(tokens), min_count);
}

std::vector<Tensor> embed_sequence(Tape& tape, const Sentence& s,
                                   EmbeddingTable& table, double p, Mode mode,
                                   Rng& rng) {
  std::vector<Tensor> out;
  out.reserve(s.ids.size());
  for (std::size_t id : s.ids) {
    if (id >= table.vocab_size()) {
      throw ContractError("embed_sequence: index " + std::to_string(id) +
                          " out of range for table with " +
                          std::to_string(table.vocab_size()) + " rows");
    }
    Tensor row = table.trainable
                     ? tape.leaf_row(table.weights, id)
                     : tape.constant({table.dim()},
                                     std::vector<double>(
                                         table.weights.value.begin() + id * table.dim(),
                                         table.weights.value.begin() + (id + 1) * table.dim()));
    out.push_back(dropout(row, p, mode, rng));
  }
  return out;
}

std::size_t load_pretrained(const std::string& path, const Vocabulary& vocab,
                            EmbeddingTable& table) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read pretrained vectors: " + path);
  const std::size_t dim = table.dim();
  std::string line;
  std::size_t lineno = 0;
  std::size_t matched = 0;
  std::vector<bool> touched(table.vocab_size(), false);
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::vector<std::string> fields;
    std::string f;
    while (is >> f) fields.push_back(f);
    if (fields.empty()) continue;
    if (first_content_line && fields.size() == 2) {
      // Optional "count dim" header.
      char* end1 = nullptr;
      char* end2 = nullptr;
      std::strtol(fields[0].c_str(), &end1, 10);
      std::strtol(fields[1].c_str(), &end2, 10);
      if (*end1 == '\0' && *end2 == '\0') {
        first_content_line = false;
        continue;
      }
    }
    first_content_line = false;
    if (fields.size() != dim + 1) {
      throw FormatError("pretrained vectors " + path + " line " +
                        std::to_string(lineno) + ": expected " +
                        std::to_string(dim) + " values, found " +
                        std::to_string(fields.size() - 1));
    }
    const std::string& tok = fields[0];
    if (!vocab.contains(tok)) continue;
    std::size_t row = vocab.lookup(tok);
    for (std::size_t j = 0; j < dim; ++j) {
      char* end = nullptr;
      double v = std::strtod(fields[j + 1].c_str(), &end);
      if (end == fields[j + 1].c_str() || *end != '\0') {
        throw FormatError("pretrained vectors " + path + " line " +
                          std::to_string(lineno) + ": bad number '" +
                          fields[j + 1] + "'");
      }
      table.weights.value[row * dim + j] = v;
    }
    if (!touched[row]) {
      touched[row] = true;
      ++matched;
    }
  }
  return matched;
}

CaptionDataset load_captions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read captions file: " + path);
  CaptionDataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      throw FormatError("captions file " + path + " line " +
                        std::to_string(lineno) +
                        ": expected image_id<TAB>sentence");
    }
    ds.records.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return ds;
}

Vocabulary build_vocab(const CaptionDataset& dataset, int min_count) {
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(dataset.size());
  for (const auto& rec : dataset.records) corpus.push_back(tokenize(rec.text));
  return Vocabulary::build(corpus, min_count);
}

}  // namespace relscore
