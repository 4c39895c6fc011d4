// SPDX-License-Identifier: Apache-2.0

#include "relscore/lstm.hpp"

namespace relscore {

LstmParams::LstmParams(std::size_t input_dim, std::size_t hidden_dim)
    : w_i("lstm.w_i", {input_dim, hidden_dim}),
      u_i("lstm.u_i", {hidden_dim, hidden_dim}),
      b_i("lstm.b_i", {hidden_dim}),
      w_f("lstm.w_f", {input_dim, hidden_dim}),
      u_f("lstm.u_f", {hidden_dim, hidden_dim}),
      b_f("lstm.b_f", {hidden_dim}),
      w_o("lstm.w_o", {input_dim, hidden_dim}),
      u_o("lstm.u_o", {hidden_dim, hidden_dim}),
      b_o("lstm.b_o", {hidden_dim}),
      w_g("lstm.w_g", {input_dim, hidden_dim}),
      u_g("lstm.u_g", {hidden_dim, hidden_dim}),
      b_g("lstm.b_g", {hidden_dim}) {}

std::vector<Parameter*> LstmParams::all() {
  return {&w_i, &u_i, &b_i, &w_f, &u_f, &b_f,
          &w_o, &u_o, &b_o, &w_g, &u_g, &b_g};
}

LstmWorkspace LstmWorkspace::leaves(Tape& tape, LstmParams& p) {
  return LstmWorkspace{
      tape.leaf(p.w_i), tape.leaf(p.u_i), tape.leaf(p.b_i),
      tape.leaf(p.w_f), tape.leaf(p.u_f), tape.leaf(p.b_f),
      tape.leaf(p.w_o), tape.leaf(p.u_o), tape.leaf(p.b_o),
      tape.leaf(p.w_g), tape.leaf(p.u_g), tape.leaf(p.b_g)};
}

namespace {

Tensor gate_preact(const Tensor& input, const Tensor& h_prev, const Tensor& w,
                   const Tensor& u, const Tensor& b) {
  return add(add(vecmat(input, w), vecmat(h_prev, u)), b);
}

}  // namespace

LstmState lstm_step(Tape& tape, const Tensor& input, const LstmState& prev,
                    const LstmWorkspace& ws) {
  if (input.shape().size() != 1 || input.shape()[0] != ws.w_i.shape()[0]) {
    throw DimensionError("lstm_step: input shape " + shape_str(input.shape()) +
                         " does not match gate weights " +
                         shape_str(ws.w_i.shape()));
  }
  if (prev.h.shape().size() != 1 || prev.h.shape()[0] != ws.u_i.shape()[0]) {
    throw DimensionError("lstm_step: hidden state shape " +
                         shape_str(prev.h.shape()) +
                         " does not match recurrent weights " +
                         shape_str(ws.u_i.shape()));
  }
  Tensor i = sigmoid(gate_preact(input, prev.h, ws.w_i, ws.u_i, ws.b_i));
  Tensor f = sigmoid(gate_preact(input, prev.h, ws.w_f, ws.u_f, ws.b_f));
  Tensor o = sigmoid(gate_preact(input, prev.h, ws.w_o, ws.u_o, ws.b_o));
  Tensor g = tanh(gate_preact(input, prev.h, ws.w_g, ws.u_g, ws.b_g));
  Tensor c = add(mul(f, prev.c), mul(i, g));
  Tensor h = mul(o, tanh(c));
  (void)tape;
  return LstmState{h, c};
}

Tensor lstm_encode(Tape& tape, const std::vector<Tensor>& sequence,
                   const LstmWorkspace& ws) {
  if (sequence.empty()) throw ContractError("lstm_encode: empty sequence");
  const std::size_t hidden = ws.u_i.shape()[0];
  LstmState state{tape.zeros({hidden}), tape.zeros({hidden})};
  for (const Tensor& input : sequence) {
    state = lstm_step(tape, input, state, ws);
  }
  return state.h;
}

Tensor lstm_encode(Tape& tape, const std::vector<Tensor>& sequence,
                   LstmParams& params) {
  return lstm_encode(tape, sequence, LstmWorkspace::leaves(tape, params));
}

}  // namespace relscore
