// SPDX-License-Identifier: Apache-2.0
//
// LSTM sentence composition: the final hidden state over the embedded token
// sequence (boundary markers included) is the sentence vector u.

#pragma once

#include <vector>

#include "relscore/tensor.hpp"

namespace relscore {

// Standard LSTM without peepholes. Each gate block maps input d->H and
// recurrent H->H with one bias vector per gate.
struct LstmParams {
  // input gate, forget gate, output gate, cell candidate
  Parameter w_i, u_i, b_i;
  Parameter w_f, u_f, b_f;
  Parameter w_o, u_o, b_o;
  Parameter w_g, u_g, b_g;

  LstmParams() = default;
  LstmParams(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const { return w_i.rows(); }
  std::size_t hidden_dim() const { return w_i.cols(); }

  std::vector<Parameter*> all();
};

struct LstmState {
  Tensor h;
  Tensor c;
};

// Leaves for one tape, so each parameter matrix is materialized once per
// forward pass rather than once per token.
struct LstmWorkspace {
  Tensor w_i, u_i, b_i, w_f, u_f, b_f, w_o, u_o, b_o, w_g, u_g, b_g;
  static LstmWorkspace leaves(Tape& tape, LstmParams& params);
};

// i,f,o = sigmoid(w*W + h*U + b), g = tanh(...), c = f*c_prev + i*g,
// h = o*tanh(c).
LstmState lstm_step(Tape& tape, const Tensor& input, const LstmState& prev,
                    const LstmWorkspace& ws);

// Iterate lstm_step from the zero state; returns u = h_N.
Tensor lstm_encode(Tape& tape, const std::vector<Tensor>& sequence,
                   const LstmWorkspace& ws);
Tensor lstm_encode(Tape& tape, const std::vector<Tensor>& sequence,
                   LstmParams& params);

}  // namespace relscore
