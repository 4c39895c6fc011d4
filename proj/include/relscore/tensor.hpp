// SPDX-License-Identifier: Apache-2.0
//
// Dense-array value type with tape-based reverse-mode differentiation.
// The op set covers exactly what the relevance model needs: linear maps,
// pointwise nonlinearities, a few row/column reductions, stacking, dropout
// and a gradient stop. Everything is double precision.

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "relscore/errors.hpp"
#include "relscore/rng.hpp"

namespace relscore {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

// Train/test switch for dropout semantics.
enum class Mode { train, test };

// A named trainable array. Gradients accumulate here across backward passes
// until zero_grad() is called; the optimizer consumes them in between.
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;

  Parameter() = default;
  Parameter(std::string name_, Shape shape_);

  std::size_t size() const { return value.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }
  void zero_grad();
  void fill_gaussian(Rng& rng, double stddev);
};

class Tape;

// Lightweight handle to a node owned by a Tape.
class Tensor {
 public:
  Tensor() = default;

  const Shape& shape() const;
  const std::vector<double>& values() const;
  const std::vector<double>& grad() const;
  bool tracked() const;
  std::size_t size() const;

  // Scalar convenience accessors.
  double value() const;              // requires size() == 1
  double at(std::size_t i) const;    // flat row-major index

  Tape* tape() const { return tape_; }
  std::size_t index() const { return index_; }

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

// One executed operation. Inputs always precede outputs on the tape, so a
// reverse sweep visits every node after all of its consumers.
struct TapeNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // allocated only when tracked
  bool tracked = false;
  std::function<void(Tape&)> backward;  // empty for constants
};

// A single-threaded unit of work: one tape owns the nodes of one forward
// pass. Parameters referenced through leaf()/leaf_row() receive their
// gradients when backward() runs. Distinct tapes are independent.
class Tape {
 public:
  // grad_enabled=false builds an evaluation-only tape: leaves are not
  // tracked, no gradient buffers are allocated and backward() is an error.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Shape shape, std::vector<double> values);
  Tensor scalar(double v);
  Tensor zeros(Shape shape);

  // Tracked view of a whole parameter; backward adds into p.grad.
  Tensor leaf(Parameter& p);
  // Tracked view of one row of a rank-2 parameter (embedding lookup).
  // Backward scatters only into that row.
  Tensor leaf_row(Parameter& p, std::size_t row);

  // Reverse sweep from a scalar loss. Every tracked node's gradient slot is
  // filled; parameter gradients accumulate into Parameter::grad.
  void backward(const Tensor& loss);

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  TapeNode& node(std::size_t i) { return nodes_[i]; }
  const TapeNode& node(std::size_t i) const { return nodes_[i]; }

  // Internal: append a node, returning its handle.
  Tensor emplace(Shape shape, std::vector<double> values, bool tracked,
                 std::function<void(Tape&)> backward);

 private:
  std::vector<TapeNode> nodes_;
  bool grad_enabled_ = true;
};

// Total number of exp() inputs clamped to the overflow bound so far in this
// process; a diagnostic for tests and logs.
long exp_clamp_count();

// ---- operations ----------------------------------------------------------

// Matrix product a[m,k] * b[k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
// Row vector times matrix: v[k] * m[k,n] -> [n].
Tensor vecmat(const Tensor& v, const Tensor& m);
Tensor transpose(const Tensor& m);

// Pointwise on identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& t);
Tensor tanh(const Tensor& t);
Tensor sigmoid(const Tensor& t);
Tensor exp(const Tensor& t);  // inputs clamped to |x| <= 80, with a warning
Tensor log(const Tensor& t);  // non-positive input is a numeric-domain error
Tensor sqrt(const Tensor& t);
Tensor relu(const Tensor& t);

Tensor add_scalar(const Tensor& t, double c);
Tensor mul_scalar(const Tensor& t, double c);

// Reductions and matrix/vector broadcasts used by the batch losses.
Tensor sum(const Tensor& t);                          // -> scalar [1]
Tensor row_sums(const Tensor& m);                     // [r,c] -> [r]
Tensor col_sums(const Tensor& m);                     // [r,c] -> [c]
Tensor diag(const Tensor& m);                         // [n,n] -> [n]
Tensor sub_colwise(const Tensor& m, const Tensor& v); // out[r][c] = m[r][c] - v[c]
Tensor add_colwise(const Tensor& m, const Tensor& v); // out[r][c] = m[r][c] + v[c]
Tensor scale_rows(const Tensor& m, const Tensor& v);  // out[r][c] = m[r][c] * v[r]
Tensor scale_cols(const Tensor& m, const Tensor& v);  // out[r][c] = m[r][c] * v[c]

// Stack rank-1 tensors of equal length d into an [n,d] matrix.
Tensor stack_rows(const std::vector<Tensor>& rows);

// Identical forward values; the backward pass propagates exactly zero into t.
Tensor stop_gradient(const Tensor& t);

// Classic dropout. Train mode zeroes each component with probability p and
// keeps the rest at their original value; test mode scales everything by
// (1-p). The backward pass reuses the same mask. Test mode never draws from
// the generator.
Tensor dropout(const Tensor& t, double p, Mode mode, Rng& rng);

}  // namespace relscore
