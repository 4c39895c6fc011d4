// SPDX-License-Identifier: Apache-2.0

#include "relscore/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "relscore/evaluator.hpp"

namespace relscore {

void Hyperparams::validate() const {
  if (batch_size < 2) {
    throw ParameterError("batch size must be >= 2 so negatives exist, got " +
                         std::to_string(batch_size));
  }
  if (!(model.dropout >= 0.0 && model.dropout < 1.0)) {
    throw ParameterError("dropout must be in [0,1), got " +
                         std::to_string(model.dropout));
  }
  if (model.loss == LossKind::hinge && model.margin <= 0.0) {
    throw ParameterError("margin must be positive, got " +
                         std::to_string(model.margin));
  }
  if (learning_rate <= 0.0) {
    throw ParameterError("learning rate must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ParameterError("ADAM betas must be in [0,1)");
  }
  if (epsilon <= 0.0) throw ParameterError("ADAM epsilon must be positive");
  if (min_count < 1) throw ParameterError("min_count must be >= 1");
}

std::size_t PairedDataset::distinct_images() const {
  std::unordered_set<std::string> ids;
  for (const ImageFeature* f : images) ids.insert(f->id);
  return ids.size();
}

PairedDataset PairedDataset::build(const CaptionDataset& captions,
                                   const Vocabulary& vocab,
                                   const FeatureSet& features) {
  PairedDataset data;
  data.sentences.reserve(captions.size());
  data.images.reserve(captions.size());
  for (const CaptionRecord& rec : captions.records) {
    data.sentences.push_back(vocab.encode(rec.text));
    data.images.push_back(&features.require(rec.image_id));
  }
  return data;
}

namespace {

TrainingBatch make_batch(const PairedDataset& data,
                         const std::vector<std::size_t>& indices) {
  TrainingBatch batch;
  batch.sentences.reserve(indices.size());
  batch.images.reserve(indices.size());
  for (std::size_t idx : indices) {
    batch.sentences.push_back(&data.sentences[idx]);
    batch.images.push_back(data.images[idx]);
  }
  batch.validate();
  return batch;
}

}  // namespace

TrainingBatch build_batch(const PairedDataset& data, std::size_t batch_size,
                          Rng& rng) {
  if (batch_size < 2) {
    throw ParameterError("build_batch: batch size must be >= 2");
  }
  if (data.distinct_images() < batch_size) {
    throw DataError("build_batch: dataset has " +
                    std::to_string(data.distinct_images()) +
                    " distinct images, need " + std::to_string(batch_size));
  }
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  std::vector<std::size_t> taken;
  std::unordered_set<std::string> ids;
  for (std::size_t idx : order) {
    if (taken.size() == batch_size) break;
    if (ids.insert(data.images[idx]->id).second) taken.push_back(idx);
  }
  return make_batch(data, taken);
}

std::vector<TrainingBatch> plan_epoch(const PairedDataset& data,
                                      std::size_t batch_size, Rng& rng) {
  if (batch_size < 2) {
    throw ParameterError("plan_epoch: batch size must be >= 2");
  }
  if (data.distinct_images() < batch_size) {
    throw DataError("plan_epoch: dataset has " +
                    std::to_string(data.distinct_images()) +
                    " distinct images, need " + std::to_string(batch_size));
  }
  std::vector<std::size_t> pending(data.size());
  for (std::size_t i = 0; i < pending.size(); ++i) pending[i] = i;
  shuffle(pending, rng);

  std::vector<TrainingBatch> batches;
  while (!pending.empty()) {
    std::vector<std::size_t> taken;
    std::vector<std::size_t> deferred;
    std::unordered_set<std::string> ids;
    for (std::size_t idx : pending) {
      if (taken.size() < batch_size && ids.insert(data.images[idx]->id).second) {
        taken.push_back(idx);
      } else {
        deferred.push_back(idx);
      }
    }
    if (taken.size() < batch_size) break;  // leftover tail dropped this epoch
    batches.push_back(make_batch(data, taken));
    pending = std::move(deferred);
  }
  return batches;
}

AdamState AdamState::for_params(const std::vector<Parameter*>& params) {
  AdamState state;
  state.slots.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.slots[i].m.assign(params[i]->size(), 0.0);
    state.slots[i].v.assign(params[i]->size(), 0.0);
  }
  return state;
}

void adam_step(const std::vector<Parameter*>& params, AdamState& state,
               const Hyperparams& hp) {
  if (state.slots.size() != params.size()) {
    throw ContractError("adam_step: state has " +
                        std::to_string(state.slots.size()) + " slots for " +
                        std::to_string(params.size()) + " parameters");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    AdamState::Slot& slot = state.slots[k];
    if (slot.m.size() != p.size()) {
      throw ContractError("adam_step: slot size mismatch for " + p.name);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      double g = p.grad[i];
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient in " + p.name);
      }
      slot.m[i] = hp.beta1 * slot.m[i] + (1.0 - hp.beta1) * g;
      slot.v[i] = hp.beta2 * slot.v[i] + (1.0 - hp.beta2) * g * g;
      double m_hat = slot.m[i] / bc1;
      double v_hat = slot.v[i] / bc2;
      p.value[i] -= hp.learning_rate * m_hat / (std::sqrt(v_hat) + hp.epsilon);
      if (!std::isfinite(p.value[i])) {
        throw NumericError("adam_step: non-finite value in " + p.name);
      }
    }
  }
}

std::string format_train_log(const std::vector<EpochStats>& log) {
  std::string out;
  char buf[128];
  for (const EpochStats& e : log) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.6f\t%.4f\n", e.epoch, e.loss,
                  e.dev_metric);
    out += buf;
  }
  return out;
}

namespace {

struct DevTrial {
  const Sentence* sentence;
  std::vector<const ImageFeature*> candidates;  // candidate 0 is the true image
};

std::vector<const ImageFeature*> split_image_pool(const PairedDataset& data) {
  std::vector<const ImageFeature*> pool;
  std::unordered_set<std::string> seen;
  for (const ImageFeature* f : data.images) {
    if (seen.insert(f->id).second) pool.push_back(f);
  }
  return pool;
}

// Two fixed distractor draws per dev record, sampled once so the metric is
// comparable across epochs.
std::vector<DevTrial> make_dev_trials(const PairedDataset& dev, Rng& rng) {
  std::vector<const ImageFeature*> pool = split_image_pool(dev);
  std::vector<DevTrial> trials;
  trials.reserve(2 * dev.size());
  for (int round = 0; round < 2; ++round) {
    for (std::size_t i = 0; i < dev.size(); ++i) {
      DevTrial t;
      t.sentence = &dev.sentences[i];
      t.candidates.push_back(dev.images[i]);
      for (const ImageFeature* d :
           sample_distractors(pool, dev.images[i]->id, 5, rng)) {
        t.candidates.push_back(d);
      }
      trials.push_back(std::move(t));
    }
  }
  return trials;
}

double dev_accuracy(ModelParams& params, const ModelConfig& cfg,
                    const std::vector<DevTrial>& trials) {
  if (trials.empty()) return 0.0;
  std::unordered_map<const Sentence*, std::vector<double>> u_cache;
  std::size_t hits = 0;
  for (const DevTrial& t : trials) {
    auto it = u_cache.find(t.sentence);
    if (it == u_cache.end()) {
      it = u_cache.emplace(t.sentence,
                           encode_sentence_values(params, cfg, *t.sentence))
               .first;
    }
    std::vector<double> scores;
    scores.reserve(t.candidates.size());
    for (const ImageFeature* img : t.candidates) {
      scores.push_back(score_with_vector(params, cfg, it->second, *img));
    }
    if (rank_hit(scores, 0)) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(trials.size());
}

}  // namespace

TrainResult train(const CaptionDataset& train_captions,
                  const CaptionDataset& dev_captions,
                  const FeatureSet& features, const Vocabulary& vocab,
                  const Hyperparams& hp, const std::string& pretrained_path) {
  hp.validate();
  if (train_captions.size() == 0) throw DataError("train: empty training set");
  if (dev_captions.size() == 0) throw DataError("train: empty dev set");

  PairedDataset train_data = PairedDataset::build(train_captions, vocab, features);
  PairedDataset dev_data = PairedDataset::build(dev_captions, vocab, features);

  Rng rng(hp.seed);
  ModelParams params = init_params(hp.model, vocab.size(), rng);
  if (!pretrained_path.empty()) {
    load_pretrained(pretrained_path, vocab, params.embed);
  }
  AdamState adam = AdamState::for_params(params.all());
  std::vector<DevTrial> dev_trials = make_dev_trials(dev_data, rng);

  TrainResult result;
  result.params = params;
  result.best_epoch = 0;
  double best_dev = -1.0;

  std::vector<Parameter*> all = params.all();
  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    std::vector<TrainingBatch> batches = plan_epoch(train_data, hp.batch_size, rng);
    if (batches.empty()) {
      throw DataError("train: no full batch of size " +
                      std::to_string(hp.batch_size));
    }
    double loss_sum = 0.0;
    for (const TrainingBatch& batch : batches) {
      for (Parameter* p : all) p->zero_grad();
      Tape tape;
      BatchForward fwd =
          forward_batch(tape, params, hp.model, batch, Mode::train, rng);
      loss_sum += fwd.loss.value();
      tape.backward(fwd.loss);
      adam_step(all, adam, hp);
    }
    double dev = dev_accuracy(params, hp.model, dev_trials);
    result.log.push_back(
        {epoch, loss_sum / static_cast<double>(batches.size()), dev});
    if (dev >= best_dev) {  // ties keep the later, more-trained epoch
      best_dev = dev;
      result.params = params;
      result.best_epoch = epoch;
      result.best_dev = dev;
    }
  }
  return result;
}

SeedSweep train_seeds(const CaptionDataset& train_captions,
                      const CaptionDataset& dev_captions,
                      const FeatureSet& features, const Vocabulary& vocab,
                      Hyperparams hp, std::size_t n_seeds,
                      const std::string& pretrained_path) {
  if (n_seeds == 0) throw ParameterError("train_seeds: need at least one seed");
  SeedSweep sweep;
  sweep.runs.reserve(n_seeds);
  double total = 0.0;
  for (std::size_t k = 0; k < n_seeds; ++k) {
    Hyperparams run_hp = hp;
    run_hp.seed = hp.seed + k;
    sweep.runs.push_back(train(train_captions, dev_captions, features, vocab,
                               run_hp, pretrained_path));
    total += sweep.runs.back().best_dev;
  }
  sweep.mean_best_dev = total / static_cast<double>(n_seeds);
  return sweep;
}

// ---- checkpoint io ----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'E', 'L', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 8);
}

void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  put_bytes(out, s.data(), s.size());
}

void get_bytes(std::istream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError("checkpoint: truncated file");
  }
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  get_bytes(in, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  get_bytes(in, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  return std::bit_cast<double>(get_u64(in));
}

std::string get_string(std::istream& in) {
  std::uint32_t n = get_u32(in);
  std::string s(n, '\0');
  if (n) get_bytes(in, s.data(), n);
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Hyperparams& hp,
                     const Vocabulary& vocab, ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  put_bytes(out, kMagic, 8);
  put_u32(out, kVersion);

  put_u64(out, hp.model.embed_dim);
  put_u64(out, hp.model.hidden_dim);
  put_u64(out, hp.model.feature_dim);
  out.put(hp.model.loss == LossKind::hinge ? 0 : 1);
  out.put(hp.model.gating ? 1 : 0);
  put_f64(out, hp.model.margin);
  put_f64(out, hp.model.dropout);
  put_u64(out, hp.batch_size);
  put_f64(out, hp.learning_rate);
  put_f64(out, hp.beta1);
  put_f64(out, hp.beta2);
  put_f64(out, hp.epsilon);
  put_u64(out, hp.epochs);
  put_u64(out, hp.seed);
  put_u32(out, static_cast<std::uint32_t>(hp.min_count));

  put_u64(out, vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) put_string(out, vocab.token(i));

  std::vector<Parameter*> all = params.all();
  put_u32(out, static_cast<std::uint32_t>(all.size()));
  for (Parameter* p : all) {
    put_string(out, p->name);
    put_u32(out, static_cast<std::uint32_t>(p->shape.size()));
    for (std::size_t d : p->shape) put_u64(out, d);
    for (double v : p->value) put_f64(out, v);
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  char magic[8];
  get_bytes(in, magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw FormatError("checkpoint " + path + ": bad magic");
  }
  std::uint32_t version = get_u32(in);
  if (version != kVersion) {
    throw FormatError("checkpoint " + path + ": unsupported version " +
                      std::to_string(version));
  }

  LoadedModel m;
  m.hp.model.embed_dim = get_u64(in);
  m.hp.model.hidden_dim = get_u64(in);
  m.hp.model.feature_dim = get_u64(in);
  int loss_byte = in.get();
  int gating_byte = in.get();
  if (loss_byte == EOF || gating_byte == EOF) {
    throw FormatError("checkpoint: truncated file");
  }
  m.hp.model.loss = loss_byte == 0 ? LossKind::hinge : LossKind::xent;
  m.hp.model.gating = gating_byte != 0;
  m.hp.model.margin = get_f64(in);
  m.hp.model.dropout = get_f64(in);
  m.hp.batch_size = get_u64(in);
  m.hp.learning_rate = get_f64(in);
  m.hp.beta1 = get_f64(in);
  m.hp.beta2 = get_f64(in);
  m.hp.epsilon = get_f64(in);
  m.hp.epochs = get_u64(in);
  m.hp.seed = get_u64(in);
  m.hp.min_count = static_cast<int>(get_u32(in));

  std::uint64_t vocab_size = get_u64(in);
  std::vector<std::string> tokens;
  tokens.reserve(vocab_size);
  for (std::uint64_t i = 0; i < vocab_size; ++i) tokens.push_back(get_string(in));
  m.vocab = Vocabulary::from_tokens(std::move(tokens), m.hp.min_count);

  m.params.embed = EmbeddingTable(m.vocab.size(), m.hp.model.embed_dim);
  m.params.lstm = LstmParams(m.hp.model.embed_dim, m.hp.model.hidden_dim);
  m.params.gate = GateParams(m.hp.model.hidden_dim, m.hp.model.feature_dim);

  std::vector<Parameter*> all = m.params.all();
  std::uint32_t count = get_u32(in);
  if (count != all.size()) {
    throw FormatError("checkpoint " + path + ": expected " +
                      std::to_string(all.size()) + " parameters, found " +
                      std::to_string(count));
  }
  for (Parameter* p : all) {
    std::string name = get_string(in);
    if (name != p->name) {
      throw FormatError("checkpoint " + path + ": expected parameter " +
                        p->name + ", found " + name);
    }
    std::uint32_t rank = get_u32(in);
    Shape shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) shape[i] = get_u64(in);
    if (shape != p->shape) {
      throw FormatError("checkpoint " + path + ": parameter " + p->name +
                        " has shape " + shape_str(shape) + ", expected " +
                        shape_str(p->shape));
    }
    for (double& v : p->value) v = get_f64(in);
  }
  return m;
}

}  // namespace relscore
