// SPDX-License-Identifier: Apache-2.0

#include "relscore/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace relscore {

void TrainingBatch::validate() const {
  if (sentences.size() != images.size()) {
    throw ContractError("batch: " + std::to_string(sentences.size()) +
                        " sentences vs " + std::to_string(images.size()) +
                        " images");
  }
  if (size() < 2) {
    throw ParameterError("batch: size must be >= 2 so negatives exist, got " +
                         std::to_string(size()));
  }
  std::unordered_set<std::string> ids;
  for (const ImageFeature* f : images) {
    if (!ids.insert(f->id).second) {
      throw DataError("batch: duplicate image id " + f->id);
    }
  }
}

std::vector<std::pair<std::size_t, std::size_t>> TrainingBatch::negative_pairs()
    const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(size() * size() - size());
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < size(); ++j) {
      if (j == i) continue;
      // Images are unique within a batch, so excluding the aligned index is
      // exactly excluding pairs that share the positive's image.
      out.emplace_back(j, i);
    }
  }
  return out;
}

double score_dot(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size()) {
    throw DimensionError("score_dot: dimensions " + std::to_string(u.size()) +
                         " vs " + std::to_string(v.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double score_cosine(const std::vector<double>& u, const std::vector<double>& v) {
  double dot = score_dot(u, v);
  double nu = std::sqrt(score_dot(u, u));
  double nv = std::sqrt(score_dot(v, v));
  if (nu == 0.0 || nv == 0.0) {
    throw NumericError("score_cosine: zero-norm vector");
  }
  return dot / (nu * nv);
}

double batch_softmax(const std::vector<double>& scores, std::size_t positive) {
  if (positive >= scores.size()) {
    throw ContractError("batch_softmax: positive index " +
                        std::to_string(positive) + " out of range");
  }
  double mx = scores[0];
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError("batch_softmax: non-finite score");
    mx = std::max(mx, s);
  }
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  return std::exp(scores[positive] - mx) / z;
}

namespace {

Tensor row_norms(Tape& tape, const Tensor& rows, const char* what) {
  Tensor norms = sqrt(row_sums(mul(rows, rows)));
  for (double n : norms.values()) {
    if (n == 0.0) {
      throw NumericError(std::string("cosine score: zero-norm ") + what);
    }
  }
  (void)tape;
  return norms;
}

}  // namespace

Tensor score_matrix_shared(Tape& tape, const Tensor& u_rows,
                           const Tensor& v_rows, ScoreKind kind) {
  Tensor dots = matmul(u_rows, transpose(v_rows));
  if (kind == ScoreKind::dot) return dots;
  Tensor nu = row_norms(tape, u_rows, "sentence vector");
  Tensor nv = row_norms(tape, v_rows, "image vector");
  std::size_t b = u_rows.shape()[0];
  Tensor ones_u = tape.constant({b}, std::vector<double>(b, 1.0));
  Tensor ones_v = tape.constant({v_rows.shape()[0]},
                                std::vector<double>(v_rows.shape()[0], 1.0));
  return scale_cols(scale_rows(dots, div(ones_u, nu)), div(ones_v, nv));
}

Tensor score_matrix_gated(Tape& tape, const Tensor& u_rows,
                          const std::vector<Tensor>& v_per_image,
                          ScoreKind kind) {
  const std::size_t b = u_rows.shape()[0];
  Tensor nu = kind == ScoreKind::cosine
                  ? row_norms(tape, u_rows, "sentence vector")
                  : Tensor();
  std::vector<Tensor> columns;  // columns[i][j] = score(u_j, v_{j,i})
  columns.reserve(v_per_image.size());
  for (const Tensor& v_rows : v_per_image) {
    if (v_rows.shape() != u_rows.shape()) {
      throw DimensionError("score_matrix_gated: projected block " +
                           shape_str(v_rows.shape()) +
                           " does not match sentence rows " +
                           shape_str(u_rows.shape()));
    }
    Tensor d = row_sums(mul(u_rows, v_rows));
    if (kind == ScoreKind::cosine) {
      Tensor nv = row_norms(tape, v_rows, "image vector");
      d = div(d, mul(nu, nv));
    }
    columns.push_back(d);
  }
  if (columns.size() != b) {
    throw DimensionError("score_matrix_gated: " +
                         std::to_string(columns.size()) + " images for " +
                         std::to_string(b) + " sentences");
  }
  // Rows of the stack are per-image columns, so transpose into C[j][i].
  return transpose(stack_rows(columns));
}

Tensor hinge_loss(Tape& tape, const Tensor& score_matrix, double margin) {
  if (margin <= 0.0) {
    throw ParameterError("hinge_loss: margin must be positive, got " +
                         std::to_string(margin));
  }
  if (score_matrix.shape().size() != 2 ||
      score_matrix.shape()[0] != score_matrix.shape()[1]) {
    throw DimensionError("hinge_loss: score matrix must be square, got " +
                         shape_str(score_matrix.shape()));
  }
  const std::size_t b = score_matrix.shape()[0];
  if (b < 2) throw ContractError("hinge_loss: empty negative set (B < 2)");
  Tensor margins =
      relu(add_scalar(sub_colwise(score_matrix, diag(score_matrix)), margin));
  // Zero out the diagonal (the positive itself is not a negative).
  std::vector<double> mask(b * b, 1.0);
  for (std::size_t i = 0; i < b; ++i) mask[i * b + i] = 0.0;
  return sum(mul(margins, tape.constant({b, b}, std::move(mask))));
}

Tensor cross_entropy_loss(Tape& tape, const Tensor& score_matrix) {
  if (score_matrix.shape().size() != 2 ||
      score_matrix.shape()[0] != score_matrix.shape()[1]) {
    throw DimensionError("cross_entropy_loss: score matrix must be square, got " +
                         shape_str(score_matrix.shape()));
  }
  const std::size_t b = score_matrix.shape()[0];
  if (b < 2) throw ContractError("cross_entropy_loss: empty negative set (B < 2)");
  for (double s : score_matrix.values()) {
    if (!std::isfinite(s)) {
      throw NumericError("cross_entropy_loss: non-finite score");
    }
  }
  // Column maxima as plain constants: the softmax is invariant to the shift,
  // so treating them as non-differentiated is exact.
  const auto& c = score_matrix.values();
  std::vector<double> colmax(b);
  for (std::size_t i = 0; i < b; ++i) {
    double mx = c[i];
    for (std::size_t j = 1; j < b; ++j) mx = std::max(mx, c[j * b + i]);
    colmax[i] = mx;
  }
  Tensor shifted =
      sub_colwise(score_matrix, tape.constant({b}, std::move(colmax)));
  Tensor log_z = log(col_sums(exp(shifted)));
  // loss_i = log Z_i - (C[i][i] - colmax_i)
  return sum(sub(log_z, diag(shifted)));
}

}  // namespace relscore
