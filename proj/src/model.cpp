// SPDX-License-Identifier: Apache-2.0

#include "relscore/model.hpp"

namespace relscore {

std::vector<Parameter*> ModelParams::all() {
  std::vector<Parameter*> out;
  out.push_back(&embed.weights);
  for (Parameter* p : lstm.all()) out.push_back(p);
  for (Parameter* p : gate.all()) out.push_back(p);
  return out;
}

ModelParams init_params(const ModelConfig& cfg, std::size_t vocab_size,
                        Rng& rng) {
  if (vocab_size == 0) throw ContractError("init_params: empty vocabulary");
  ModelParams p;
  p.embed = EmbeddingTable(vocab_size, cfg.embed_dim);
  p.lstm = LstmParams(cfg.embed_dim, cfg.hidden_dim);
  p.gate = GateParams(cfg.hidden_dim, cfg.feature_dim);
  for (Parameter* param : p.all()) param->fill_gaussian(rng, 0.1);
  return p;
}

ModelParams init_params(const ModelConfig& cfg, std::size_t vocab_size,
                        std::uint64_t seed) {
  Rng rng(seed);
  return init_params(cfg, vocab_size, rng);
}

Tensor sentence_vector(Tape& tape, ModelParams& params, const ModelConfig& cfg,
                       const Sentence& sentence, Mode mode, Rng& rng) {
  std::vector<Tensor> seq =
      embed_sequence(tape, sentence, params.embed, cfg.dropout, mode, rng);
  return lstm_encode(tape, seq, params.lstm);
}

BatchForward forward_batch(
    Tape& tape, ModelParams& params, const ModelConfig& cfg,
    const TrainingBatch& batch, Mode mode, Rng& rng,
    const std::vector<std::vector<double>>* gate_input_override) {
  batch.validate();
  const std::size_t b = batch.size();

  LstmWorkspace lstm_ws = LstmWorkspace::leaves(tape, params.lstm);
  GateWorkspace gate_ws = GateWorkspace::leaves(tape, params.gate);

  // Sentence vectors, one embedding dropout mask per token position.
  std::vector<Tensor> u_vecs;
  u_vecs.reserve(b);
  for (const Sentence* s : batch.sentences) {
    std::vector<Tensor> seq =
        embed_sequence(tape, *s, params.embed, cfg.dropout, mode, rng);
    u_vecs.push_back(lstm_encode(tape, seq, lstm_ws));
  }
  Tensor u_rows = stack_rows(u_vecs);

  // One dropout mask per image per batch, shared across pairings.
  std::vector<Tensor> x_dropped;
  x_dropped.reserve(b);
  for (const ImageFeature* img : batch.images) {
    if (img->x.size() != cfg.feature_dim) {
      throw DimensionError("forward_batch: image " + img->id + " has " +
                           std::to_string(img->x.size()) +
                           " dims, model expects " +
                           std::to_string(cfg.feature_dim));
    }
    Tensor x = tape.constant({cfg.feature_dim}, img->x);
    x_dropped.push_back(dropout(x, cfg.dropout, mode, rng));
  }

  Tensor scores;
  if (cfg.gating) {
    // Gate rows per sentence; the gradient path into u is cut here, so the
    // override (when present) replaces a constant with a constant.
    Tensor gate_in;
    if (gate_input_override) {
      if (gate_input_override->size() != b) {
        throw ContractError("forward_batch: gate override has " +
                            std::to_string(gate_input_override->size()) +
                            " rows for batch of " + std::to_string(b));
      }
      std::vector<double> flat;
      flat.reserve(b * cfg.hidden_dim);
      for (const auto& row : *gate_input_override) {
        if (row.size() != cfg.hidden_dim) {
          throw DimensionError("forward_batch: gate override row width " +
                               std::to_string(row.size()) + ", expected " +
                               std::to_string(cfg.hidden_dim));
        }
        flat.insert(flat.end(), row.begin(), row.end());
      }
      gate_in = tape.constant({b, cfg.hidden_dim}, std::move(flat));
    } else {
      gate_in = stop_gradient(u_rows);
    }
    Tensor z_rows = sigmoid(
        add_colwise(matmul(gate_in, gate_ws.w_z), gate_ws.b_z));

    // For image i: rows j of v_block are image i projected under sentence
    // j's gate.
    std::vector<Tensor> v_per_image;
    v_per_image.reserve(b);
    for (std::size_t i = 0; i < b; ++i) {
      Tensor gated = scale_cols(z_rows, x_dropped[i]);
      v_per_image.push_back(tanh(matmul(gated, gate_ws.w_x)));
    }
    scores = score_matrix_gated(tape, u_rows, v_per_image, cfg.score_kind());
  } else {
    std::vector<Tensor> v_vecs;
    v_vecs.reserve(b);
    for (std::size_t i = 0; i < b; ++i) {
      v_vecs.push_back(tanh(vecmat(x_dropped[i], gate_ws.w_x)));
    }
    Tensor v_rows = stack_rows(v_vecs);
    scores = score_matrix_shared(tape, u_rows, v_rows, cfg.score_kind());
  }

  Tensor loss = cfg.loss == LossKind::hinge
                    ? hinge_loss(tape, scores, cfg.margin)
                    : cross_entropy_loss(tape, scores);
  return BatchForward{scores, loss, std::move(u_vecs)};
}

std::vector<double> encode_sentence_values(ModelParams& params,
                                           const ModelConfig& cfg,
                                           const Sentence& sentence) {
  Tape tape(/*grad_enabled=*/false);
  Rng rng(0);  // test mode draws nothing
  Tensor u = sentence_vector(tape, params, cfg, sentence, Mode::test, rng);
  return u.values();
}

double score_with_vector(ModelParams& params, const ModelConfig& cfg,
                         const std::vector<double>& u,
                         const ImageFeature& image) {
  if (image.x.size() != cfg.feature_dim) {
    throw DimensionError("score: image " + image.id + " has " +
                         std::to_string(image.x.size()) +
                         " dims, model expects " +
                         std::to_string(cfg.feature_dim));
  }
  Tape tape(/*grad_enabled=*/false);
  Rng rng(0);
  GateWorkspace ws = GateWorkspace::leaves(tape, params.gate);
  Tensor u_t = tape.constant({cfg.hidden_dim}, u);
  Tensor x = tape.constant({cfg.feature_dim}, image.x);
  Tensor x_dropped = dropout(x, cfg.dropout, Mode::test, rng);
  Tensor v;
  if (cfg.gating) {
    Tensor z = compute_gate(tape, u_t, ws);
    v = project_gated(tape, x_dropped, z, ws.w_x);
  } else {
    v = tanh(vecmat(x_dropped, ws.w_x));
  }
  return cfg.score_kind() == ScoreKind::cosine
             ? score_cosine(u_t.values(), v.values())
             : score_dot(u_t.values(), v.values());
}

double score_pair(ModelParams& params, const ModelConfig& cfg,
                  const Sentence& sentence, const ImageFeature& image) {
  return score_with_vector(params, cfg,
                           encode_sentence_values(params, cfg, sentence),
                           image);
}

std::vector<double> gate_values(ModelParams& params, const ModelConfig& cfg,
                                const Sentence& sentence) {
  Tape tape(/*grad_enabled=*/false);
  Rng rng(0);
  GateWorkspace ws = GateWorkspace::leaves(tape, params.gate);
  Tensor u = sentence_vector(tape, params, cfg, sentence, Mode::test, rng);
  Tensor z = compute_gate(tape, u, ws);
  return z.values();
}

}  // namespace relscore
