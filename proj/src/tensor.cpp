// SPDX-License-Identifier: Apache-2.0

#include "relscore/tensor.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <sstream>
#include <utility>

namespace relscore {

namespace {

// Overflow guard for exp(): unbounded dot products feed the softmax, so
// inputs beyond this bound are clamped instead of producing inf.
constexpr double kExpClampBound = 80.0;

std::atomic<long> g_exp_clamp_count{0};

void warn_exp_clamp() {
  static std::atomic<bool> warned{false};
  bool expected = false;
  if (warned.compare_exchange_strong(expected, true)) {
    std::cerr << "relscore: exp() input clamped to +/-" << kExpClampBound
              << "; further clamps are counted silently\n";
  }
}

void require_same_tape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw ContractError(std::string(op) + ": operands belong to different tapes");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.shape().size() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_str(t.shape()));
  }
}

void require_rank1(const Tensor& t, const char* op) {
  if (t.shape().size() != 1) {
    throw DimensionError(std::string(op) + ": expected a vector, got shape " +
                         shape_str(t.shape()));
  }
}

bool out_tracked(const Tape& tape, std::initializer_list<const Tensor*> ins) {
  if (!tape.grad_enabled()) return false;
  for (const Tensor* t : ins) {
    if (t->tracked()) return true;
  }
  return false;
}

// Pointwise unary op with derivative expressed in terms of input and output
// values: dy/dx = dfn(x, y).
template <typename F, typename DF>
Tensor unary_op(const Tensor& t, const char* /*name*/, F fn, DF dfn) {
  Tape& tape = *t.tape();
  const auto& x = t.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i]);

  bool tracked = out_tracked(tape, {&t});
  Tensor result = tape.emplace(t.shape(), std::move(out), tracked, nullptr);
  if (tracked) {
    std::size_t ti = t.index();
    std::size_t oi = result.index();
    tape.node(oi).backward = [ti, oi, dfn](Tape& tp) {
      TapeNode& in = tp.node(ti);
      const TapeNode& o = tp.node(oi);
      if (!in.tracked) return;
      for (std::size_t i = 0; i < o.values.size(); ++i) {
        in.grad[i] += o.grad[i] * dfn(in.values[i], o.values[i]);
      }
    };
  }
  return result;
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << ")";
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

long exp_clamp_count() { return g_exp_clamp_count.load(); }

Parameter::Parameter(std::string name_, Shape shape_)
    : name(std::move(name_)), shape(std::move(shape_)) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("parameter " + name + ": zero dimension");
  }
  value.assign(shape_numel(shape), 0.0);
  grad.assign(value.size(), 0.0);
}

void Parameter::zero_grad() { grad.assign(grad.size(), 0.0); }

void Parameter::fill_gaussian(Rng& rng, double stddev) {
  for (double& v : value) v = gaussian(rng, 0.0, stddev);
}

const Shape& Tensor::shape() const { return tape_->node(index_).shape; }
const std::vector<double>& Tensor::values() const { return tape_->node(index_).values; }
const std::vector<double>& Tensor::grad() const {
  const TapeNode& n = tape_->node(index_);
  if (!n.tracked) throw ContractError("grad(): tensor is not tracked");
  return n.grad;
}
bool Tensor::tracked() const { return tape_->node(index_).tracked; }
std::size_t Tensor::size() const { return tape_->node(index_).values.size(); }

double Tensor::value() const {
  if (size() != 1) {
    throw ContractError("value(): tensor has shape " + shape_str(shape()) +
                        ", expected a scalar");
  }
  return values()[0];
}

double Tensor::at(std::size_t i) const { return values().at(i); }

Tensor Tape::emplace(Shape shape, std::vector<double> values, bool tracked,
                     std::function<void(Tape&)> backward) {
  if (values.size() != shape_numel(shape)) {
    throw DimensionError("tape node: value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
  }
  TapeNode n;
  n.shape = std::move(shape);
  n.values = std::move(values);
  n.tracked = tracked && grad_enabled_;
  if (n.tracked) n.grad.assign(n.values.size(), 0.0);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::constant(Shape shape, std::vector<double> values) {
  return emplace(std::move(shape), std::move(values), false, nullptr);
}

Tensor Tape::scalar(double v) { return constant({1}, {v}); }

Tensor Tape::zeros(Shape shape) {
  std::vector<double> v(shape_numel(shape), 0.0);
  return constant(std::move(shape), std::move(v));
}

Tensor Tape::leaf(Parameter& p) {
  Tensor t = emplace(p.shape, p.value, grad_enabled_, nullptr);
  if (grad_enabled_) {
    std::size_t oi = t.index();
    Parameter* pp = &p;
    node(oi).backward = [oi, pp](Tape& tp) {
      const TapeNode& o = tp.node(oi);
      for (std::size_t i = 0; i < o.grad.size(); ++i) pp->grad[i] += o.grad[i];
    };
  }
  return t;
}

Tensor Tape::leaf_row(Parameter& p, std::size_t row) {
  if (p.shape.size() != 2) {
    throw DimensionError("leaf_row: parameter " + p.name + " has shape " +
                         shape_str(p.shape) + ", expected a matrix");
  }
  if (row >= p.rows()) {
    throw ContractError("leaf_row: row " + std::to_string(row) +
                        " out of range for parameter " + p.name + " with " +
                        std::to_string(p.rows()) + " rows");
  }
  std::size_t cols = p.cols();
  std::vector<double> v(p.value.begin() + row * cols,
                        p.value.begin() + (row + 1) * cols);
  Tensor t = emplace({cols}, std::move(v), grad_enabled_, nullptr);
  if (grad_enabled_) {
    std::size_t oi = t.index();
    Parameter* pp = &p;
    node(oi).backward = [oi, pp, row, cols](Tape& tp) {
      const TapeNode& o = tp.node(oi);
      for (std::size_t i = 0; i < cols; ++i) {
        pp->grad[row * cols + i] += o.grad[i];
      }
    };
  }
  return t;
}

void Tape::backward(const Tensor& loss) {
  if (!grad_enabled_) {
    throw ContractError("backward: tape was built with gradients disabled");
  }
  if (nodes_.empty()) throw ContractError("backward: empty tape");
  if (loss.tape() != this) throw ContractError("backward: loss from another tape");
  if (loss.size() != 1) {
    throw ContractError("backward: loss has shape " + shape_str(loss.shape()) +
                        ", expected a scalar");
  }
  TapeNode& ln = node(loss.index());
  if (!ln.tracked) return;  // loss does not depend on any parameter
  ln.grad[0] = 1.0;
  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    TapeNode& n = nodes_[i];
    if (n.tracked && n.backward) n.backward(*this);
  }
}

// ---- linear maps ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_same_tape(a, b, "matmul");
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: inner dimensions disagree, " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tape& tape = *a.tape();
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      double arow = av[r * k + kk];
      if (arow == 0.0) continue;
      const double* brow = &bv[kk * n];
      double* orow = &out[r * n];
      for (std::size_t c = 0; c < n; ++c) orow[c] += arow * brow[c];
    }
  }
  bool tracked = out_tracked(tape, {&a, &b});
  Tensor result = tape.emplace({m, n}, std::move(out), tracked, nullptr);
  if (tracked) {
    std::size_t ai = a.index(), bi = b.index(), oi = result.index();
    tape.node(oi).backward = [ai, bi, oi, m, k, n](Tape& tp) {
      TapeNode& an = tp.node(ai);
      TapeNode& bn = tp.node(bi);
      const TapeNode& on = tp.node(oi);
      if (an.tracked) {
        // dA = dC * B^T
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            double acc = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
              acc += on.grad[r * n + c] * bn.values[kk * n + c];
            }
            an.grad[r * k + kk] += acc;
          }
        }
      }
      if (bn.tracked) {
        // dB = A^T * dC
        for (std::size_t kk = 0; kk < k; ++kk) {
          for (std::size_t c = 0; c < n; ++c) {
            double acc = 0.0;
            for (std::size_t r = 0; r < m; ++r) {
              acc += an.values[r * k + kk] * on.grad[r * n + c];
            }
            bn.grad[kk * n + c] += acc;
          }
        }
      }
    };
  }
  return result;
}

Tensor vecmat(const Tensor& v, const Tensor& m) {
  require_same_tape(v, m, "vecmat");
  require_rank1(v, "vecmat");
  require_rank2(m, "vecmat");
  if (v.shape()[0] != m.shape()[0]) {
    throw DimensionError("vecmat: dimensions disagree, " + shape_str(v.shape()) +
                         " vs " + shape_str(m.shape()));
  }
  Tape& tape = *v.tape();
  const std::size_t k = m.shape()[0], n = m.shape()[1];
  const auto& vv = v.values();
  const auto& mv = m.values();
  std::vector<double> out(n, 0.0);
  for (std::size_t kk = 0; kk < k; ++kk) {
    double s = vv[kk];
    if (s == 0.0) continue;
    const double* row = &mv[kk * n];
    for (std::size_t c = 0; c < n; ++c) out[c] += s * row[c];
  }
  bool tracked = out_tracked(tape, {&v, &m});
  Tensor result = tape.emplace({n}, std::move(out), tracked, nullptr);
  if (tracked) {
    std::size_t vi = v.index(), mi = m.index(), oi = result.index();
    tape.node(oi).backward = [vi, mi, oi, k, n](Tape& tp) {
      TapeNode& vn = tp.node(vi);
      TapeNode& mn = tp.node(mi);
      const TapeNode& on = tp.node(oi);
      if (vn.tracked) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          double acc = 0.0;
          for (std::size_t c = 0; c < n; ++c) {
            acc += on.grad[c] * mn.values[kk * n + c];
          }
          vn.grad[kk] += acc;
        }
      }
      if (mn.tracked) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          double s = vn.values[kk];
          if (s == 0.0) continue;
          for (std::size_t c = 0; c < n; ++c) {
            mn.grad[kk * n + c] += s * on.grad[c];
          }
        }
      }
    };
  }
  return result;
}

Tensor transpose(const Tensor& m) {
  require_rank2(m, "transpose");
  Tape& tape = *m.tape();
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  const auto& mv = m.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = mv[i * c + j];
  }
  bool tracked = out_tracked(tape, {&m});
  Tensor result = tape.emplace({c, r}, std::move(out), tracked, nullptr);
  if (tracked) {
    std::size_t mi = m.index(), oi = result.index();
    tape.node(oi).backward = [mi, oi, r, c](Tape& tp) {
      TapeNode& mn = tp.node(mi);
      const TapeNode& on = tp.node(oi);
      if (!mn.tracked) return;
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          mn.grad[i * c + j] += on.grad[j * r + i];
        }
      }
    };
  }
  return result;
}

// ---- pointwise binary -----------------------------------------------------

namespace {

template <typename F, typename DA, typename DB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, F fn,
                 DA da, DB db) {
  require_same_tape(a, b, name);
  require_same_shape(a, b, name);
  Tape& tape = *a.tape();
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fn(av[i], bv[i]);
  bool tracked = out_tracked(tape, {&a, &b});
  Tensor result = tape.emplace(a.shape(), std::move(out), tracked, nullptr);
  if (tracked) {
    std::size_t ai = a.index(), bi = b.index(), oi = result.index();
    tape.node(oi).backward = [ai, bi, oi, da, db](Tape& tp) {
      TapeNode& an = tp.node(ai);
      TapeNode& bn = tp.node(bi);
      const TapeNode& on = tp.node(oi);
      for (std::size_t i = 0; i < on.values.size(); ++i) {
        double g = on.grad[i];
        if (g == 0.0) continue;
        if (an.tracked) an.grad[i] += g * da(an.values[i], bn.values[i]);
        if (bn.tracked) bn.grad[i] += g * db(an.values[i], bn.values[i]);
      }
    };
  }
  return result;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

// ---- pointwise unary ------------------------------------------------------

Tensor neg(const Tensor& t) {
  return unary_op(
      t, "neg", [](double x) { return -x; },
      [](double, double) { return -1.0; });
}

Tensor tanh(const Tensor& t) {
  return unary_op(
      t, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& t) {
  return unary_op(
      t, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& t) {
  return unary_op(
      t, "exp",
      [](double x) {
        if (x > kExpClampBound || x < -kExpClampBound) {
          g_exp_clamp_count.fetch_add(1);
          warn_exp_clamp();
          x = x > 0 ? kExpClampBound : -kExpClampBound;
        }
        return std::exp(x);
      },
      // Derivative uses the clamped output; beyond the bound the forward is
      // constant, so a zero derivative would also be defensible, but keeping
      // exp(clamped) preserves the usual softmax algebra.
      [](double, double y) { return y; });
}

Tensor log(const Tensor& t) {
  const auto& x = t.values();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0)) {
      throw NumericError("log: non-positive input " + std::to_string(x[i]) +
                         " at index " + std::to_string(i));
    }
  }
  return unary_op(
      t, "log", [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& t) {
  const auto& x = t.values();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0.0) {
      throw NumericError("sqrt: negative input " + std::to_string(x[i]) +
                         " at index " + std::to_string(i));
    }
  }
  return unary_op(
      t, "sqrt", [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor relu(const Tensor& t) {
  return unary_op(
      t, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor add_scalar(const Tensor& t, double c) {
  return unary_op(
      t, "add_scalar", [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& t, double c) {
  return unary_op(
      t, "mul_scalar", [c](double x) { return x * c; },
      [c](double, double) { return c; });
}

// ---- reductions and broadcasts --------------------------------------------

Tensor sum(const Tensor& t) {
  Tape& tape = *t.tape();
  double s = 0.0;
  for (double v : t.values()) s += v;
  bool tracked = out_tracked(tape, {&t});
  Tensor result = tape.emplace({1}, {s}, tracked, nullptr);
  if (tracked) {
    std::size_t ti = t.index(), oi = result.index();
    tape.node(oi).backward = [ti, oi](Tape& tp) {
      TapeNode& in = tp.node(ti);
      double g = tp.node(oi).grad[0];
      for (double& gi : in.grad) gi += g;
    };
  }
  return result;
}

Tensor row_sums(const Tensor& m) {
  require_rank2(m, "row_sums");
  Tape& tape = *m.tape();
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  const auto& mv = m.values();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i] += mv[i * c + j];
  }
  bool tracked = out_tracked(tape, {&m});
  Tensor result = tape.emplace({r}, std::move(out), tracked, nullptr);
  if (tracked) {
    std::size_t mi = m.index(), oi = result.index();
    tape.node(oi).backward = [mi, oi, r, c](Tape& tp) {
      TapeNode& mn = tp.node(mi);
      const TapeNode& on = tp.node(oi);
      for (std::size_t i = 0; i < r; ++i) {
        double g = on.grad[i];
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < c; ++j) mn.grad[i * c + j] += g;
      }
    };
  }
  return result;
}

Tensor col_sums(const Tensor& m) {
  require_rank2(m, "col_sums");
  Tape& tape = *m.tape();
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  const auto& mv = m.values();
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j] += mv[i * c + j];
  }
  bool tracked = out_tracked(tape, {&m});
  Tensor result = tape.emplace({c}, std::move(out), tracked, nullptr);
  if (tracked) {
    std::size_t mi = m.index(), oi = result.index();
    tape.node(oi).backward = [mi, oi, r, c](Tape& tp) {
      TapeNode& mn = tp.node(mi);
      const TapeNode& on = tp.node(oi);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) mn.grad[i * c + j] += on.grad[j];
      }
    };
  }
  return result;
}

Tensor diag(const Tensor& m) {
  require_rank2(m, "diag");
  if (m.shape()[0] != m.shape()[1]) {
    throw DimensionError("diag: matrix is not square, " + shape_str(m.shape()));
  }
  Tape& tape = *m.tape();
  const std::size_t n = m.shape()[0];
  const auto& mv = m.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = mv[i * n + i];
  bool tracked = out_tracked(tape, {&m});
  Tensor result = tape.emplace({n}, std::move(out), tracked, nullptr);
  if (tracked) {
    std::size_t mi = m.index(), oi = result.index();
    tape.node(oi).backward = [mi, oi, n](Tape& tp) {
      TapeNode& mn = tp.node(mi);
      const TapeNode& on = tp.node(oi);
      for (std::size_t i = 0; i < n; ++i) mn.grad[i * n + i] += on.grad[i];
    };
  }
  return result;
}

namespace {

// Shared core for the {add,sub}_colwise and scale_{rows,cols} broadcasts.
enum class BroadcastKind { add_col, sub_col, scale_row, scale_col };

Tensor broadcast_op(const Tensor& m, const Tensor& v, BroadcastKind kind,
                    const char* name) {
  require_same_tape(m, v, name);
  require_rank2(m, name);
  require_rank1(v, name);
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  const std::size_t expect = (kind == BroadcastKind::scale_row) ? r : c;
  if (v.shape()[0] != expect) {
    throw DimensionError(std::string(name) + ": vector length " +
                         shape_str(v.shape()) + " does not match matrix " +
                         shape_str(m.shape()));
  }
  Tape& tape = *m.tape();
  const auto& mv = m.values();
  const auto& vv = v.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double x = mv[i * c + j];
      switch (kind) {
        case BroadcastKind::add_col: out[i * c + j] = x + vv[j]; break;
        case BroadcastKind::sub_col: out[i * c + j] = x - vv[j]; break;
        case BroadcastKind::scale_row: out[i * c + j] = x * vv[i]; break;
        case BroadcastKind::scale_col: out[i * c + j] = x * vv[j]; break;
      }
    }
  }
  bool tracked = out_tracked(tape, {&m, &v});
  Tensor result = tape.emplace({r, c}, std::move(out), tracked, nullptr);
  if (tracked) {
    std::size_t mi = m.index(), vi = v.index(), oi = result.index();
    tape.node(oi).backward = [mi, vi, oi, r, c, kind](Tape& tp) {
      TapeNode& mn = tp.node(mi);
      TapeNode& vn = tp.node(vi);
      const TapeNode& on = tp.node(oi);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          double g = on.grad[i * c + j];
          if (g == 0.0) continue;
          switch (kind) {
            case BroadcastKind::add_col:
              if (mn.tracked) mn.grad[i * c + j] += g;
              if (vn.tracked) vn.grad[j] += g;
              break;
            case BroadcastKind::sub_col:
              if (mn.tracked) mn.grad[i * c + j] += g;
              if (vn.tracked) vn.grad[j] -= g;
              break;
            case BroadcastKind::scale_row:
              if (mn.tracked) mn.grad[i * c + j] += g * vn.values[i];
              if (vn.tracked) vn.grad[i] += g * mn.values[i * c + j];
              break;
            case BroadcastKind::scale_col:
              if (mn.tracked) mn.grad[i * c + j] += g * vn.values[j];
              if (vn.tracked) vn.grad[j] += g * mn.values[i * c + j];
              break;
          }
        }
      }
    };
  }
  return result;
}

}  // namespace

Tensor sub_colwise(const Tensor& m, const Tensor& v) {
  return broadcast_op(m, v, BroadcastKind::sub_col, "sub_colwise");
}

Tensor add_colwise(const Tensor& m, const Tensor& v) {
  return broadcast_op(m, v, BroadcastKind::add_col, "add_colwise");
}

Tensor scale_rows(const Tensor& m, const Tensor& v) {
  return broadcast_op(m, v, BroadcastKind::scale_row, "scale_rows");
}

Tensor scale_cols(const Tensor& m, const Tensor& v) {
  return broadcast_op(m, v, BroadcastKind::scale_col, "scale_cols");
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows given");
  Tape& tape = *rows[0].tape();
  const std::size_t d = rows[0].size();
  bool tracked = false;
  for (const Tensor& r : rows) {
    require_same_tape(rows[0], r, "stack_rows");
    require_rank1(r, "stack_rows");
    if (r.size() != d) {
      throw DimensionError("stack_rows: row shape " + shape_str(r.shape()) +
                           " differs from " + shape_str(rows[0].shape()));
    }
    tracked = tracked || r.tracked();
  }
  tracked = tracked && tape.grad_enabled();
  const std::size_t n = rows.size();
  std::vector<double> out(n * d);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    idx[i] = rows[i].index();
    const auto& rv = rows[i].values();
    std::copy(rv.begin(), rv.end(), out.begin() + i * d);
  }
  Tensor result = tape.emplace({n, d}, std::move(out), tracked, nullptr);
  if (tracked) {
    std::size_t oi = result.index();
    tape.node(oi).backward = [idx, oi, d](Tape& tp) {
      const TapeNode& on = tp.node(oi);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        TapeNode& rn = tp.node(idx[i]);
        if (!rn.tracked) continue;
        for (std::size_t j = 0; j < d; ++j) rn.grad[j] += on.grad[i * d + j];
      }
    };
  }
  return result;
}

Tensor stop_gradient(const Tensor& t) {
  Tape& tape = *t.tape();
  // Forward values are bit-identical; the node is untracked, so nothing
  // ever flows back into t.
  return tape.emplace(t.shape(), t.values(), false, nullptr);
}

Tensor dropout(const Tensor& t, double p, Mode mode, Rng& rng) {
  if (mode == Mode::train) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ParameterError("dropout: probability " + std::to_string(p) +
                           " outside [0,1]");
    }
  } else {
    if (!(p >= 0.0 && p < 1.0)) {
      throw ParameterError("dropout: probability " + std::to_string(p) +
                           " outside [0,1) in test mode");
    }
  }
  Tape& tape = *t.tape();
  const auto& x = t.values();
  std::vector<double> out(x.size());
  std::vector<double> mask;  // per-component multiplier, reused backward
  if (mode == Mode::train) {
    mask.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask[i] = (uniform01(rng) < p) ? 0.0 : 1.0;
      out[i] = x[i] * mask[i];
    }
  } else {
    mask.assign(x.size(), 1.0 - p);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask[i];
  }
  bool tracked = out_tracked(tape, {&t});
  Tensor result = tape.emplace(t.shape(), std::move(out), tracked, nullptr);
  if (tracked) {
    std::size_t ti = t.index(), oi = result.index();
    tape.node(oi).backward = [ti, oi, mask](Tape& tp) {
      TapeNode& in = tp.node(ti);
      const TapeNode& on = tp.node(oi);
      for (std::size_t i = 0; i < mask.size(); ++i) {
        in.grad[i] += on.grad[i] * mask[i];
      }
    };
  }
  return result;
}

}  // namespace relscore
