#include "rcd/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>

#include "rcd/error.hpp"
#include "rcd/kernels.hpp"

namespace rcd {

std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Tanh: return "tanh";
    case OpKind::Relu: return "relu";
    case OpKind::Softmax: return "softmax";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Transpose: return "transpose";
    case OpKind::Sum: return "sum";
    case OpKind::Log: return "log";
    case OpKind::LayerNorm: return "layer_norm";
  }
  return "?";
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) { return record(OpKind::Leaf, {}, std::move(value)); }

Var Tape::variable(Tensor value) {
  Var v = record(OpKind::Leaf, {}, std::move(value));
  nodes_[v.id()].requires_grad = true;
  return v;
}

Var Tape::param(const Tensor& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Var v = variable(p);
  bound_.emplace(&p, v.id());
  return v;
}

Var Tape::record(OpKind op, std::vector<std::size_t> inputs, Tensor value, Tensor saved,
                 double attr, std::size_t begin, std::size_t end) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite result from ") + std::string(to_string(op)));
  }
  Node n;
  n.op = op;
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [&](std::size_t i) { return nodes_[i].requires_grad; });
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  n.saved = std::move(saved);
  n.attr = attr;
  n.begin = begin;
  n.end = end;
  nodes_.push_back(std::move(n));
  has_grads_ = false;
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (loss.tape() != this || loss.id() >= nodes_.size()) {
    throw Error("backward: loss is not recorded on this tape");
  }
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + lv.shape_string());
  }
  grads_.assign(nodes_.size(), Tensor());
  for (std::size_t i = 0; i <= loss.id(); ++i) {
    if (nodes_[i].requires_grad) grads_[i] = Tensor(nodes_[i].value.rows(), nodes_[i].value.cols());
  }
  if (nodes_[loss.id()].requires_grad) grads_[loss.id()](0, 0) = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || n.op == OpKind::Leaf) continue;
    backprop_node(id, grads_);
  }
  has_grads_ = true;
}

Tensor Tape::grad(Var v) const {
  const Tensor& val = nodes_.at(v.id()).value;
  if (!has_grads_ || v.id() >= grads_.size() || grads_[v.id()].empty()) {
    return Tensor(val.rows(), val.cols());
  }
  return grads_[v.id()];
}

Tensor Tape::grad(const Tensor& p) const {
  auto it = bound_.find(&p);
  if (it == bound_.end()) return Tensor(p.rows(), p.cols());
  return grad(Var(const_cast<Tape*>(this), it->second));
}

namespace {

void accumulate(Tensor& dst, const Tensor& src, double factor = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
}

// Gradient for an operand that was broadcast as one row over `g`'s rows.
void accumulate_broadcast(Tensor& dst, const Tensor& g, double factor) {
  if (dst.same_shape(g)) {
    accumulate(dst, g, factor);
    return;
  }
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) dst(0, c) += factor * g(r, c);
}

Tape& tape_of(std::initializer_list<Var> vars, const char* op) {
  Tape* t = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) throw Error(std::string(op) + ": invalid variable");
    if (t && v.tape() != t) throw Error(std::string(op) + ": operands on different tapes");
    t = v.tape();
  }
  return *t;
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

bool broadcastable(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) || (b.rows() == 1 && b.cols() == a.cols());
}

template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

void Tape::backprop_node(std::size_t id, std::vector<Tensor>& grads) const {
  const Node& n = nodes_[id];
  const Tensor& g = grads[id];
  auto in = [&](std::size_t k) -> const Node& { return nodes_[n.inputs[k]]; };
  auto gin = [&](std::size_t k) -> Tensor* {
    return in(k).requires_grad ? &grads[n.inputs[k]] : nullptr;
  };

  switch (n.op) {
    case OpKind::Leaf:
      break;
    case OpKind::MatMul: {
      if (Tensor* ga = gin(0)) kernels::matmul_nt_acc(g, in(1).value, *ga);
      if (Tensor* gb = gin(1)) kernels::matmul_tn_acc(in(0).value, g, *gb);
      break;
    }
    case OpKind::Add:
    case OpKind::Sub: {
      if (Tensor* ga = gin(0)) accumulate(*ga, g);
      if (Tensor* gb = gin(1)) accumulate_broadcast(*gb, g, n.op == OpKind::Add ? 1.0 : -1.0);
      break;
    }
    case OpKind::Mul: {
      const Tensor& a = in(0).value;
      const Tensor& b = in(1).value;
      if (Tensor* ga = gin(0))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b[i];
      if (Tensor* gb = gin(1))
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a[i];
      break;
    }
    case OpKind::Scale: {
      if (Tensor* ga = gin(0)) accumulate(*ga, g, n.attr);
      break;
    }
    case OpKind::Sigmoid: {
      if (Tensor* ga = gin(0))
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value[i];
          (*ga)[i] += g[i] * y * (1.0 - y);
        }
      break;
    }
    case OpKind::Tanh: {
      if (Tensor* ga = gin(0))
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value[i];
          (*ga)[i] += g[i] * (1.0 - y * y);
        }
      break;
    }
    case OpKind::Relu: {
      if (Tensor* ga = gin(0)) {
        const Tensor& x = in(0).value;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (x[i] > 0.0) (*ga)[i] += g[i];
      }
      break;
    }
    case OpKind::Softmax: {
      if (Tensor* ga = gin(0)) {
        const Tensor& y = n.value;
        for (std::size_t r = 0; r < y.rows(); ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
          for (std::size_t c = 0; c < y.cols(); ++c) (*ga)(r, c) += y(r, c) * (g(r, c) - dot);
        }
      }
      break;
    }
    case OpKind::Concat: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t w = in(k).value.cols();
        if (Tensor* gk = gin(k))
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < w; ++c) (*gk)(r, c) += g(r, offset + c);
        offset += w;
      }
      break;
    }
    case OpKind::Slice: {
      if (Tensor* ga = gin(0))
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) (*ga)(r, n.begin + c) += g(r, c);
      break;
    }
    case OpKind::Transpose: {
      if (Tensor* ga = gin(0))
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) (*ga)(c, r) += g(r, c);
      break;
    }
    case OpKind::Sum: {
      if (Tensor* ga = gin(0))
        for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g[0];
      break;
    }
    case OpKind::Log: {
      if (Tensor* ga = gin(0)) {
        const Tensor& x = in(0).value;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (x[i] > n.attr) (*ga)[i] += g[i] / x[i];
      }
      break;
    }
    case OpKind::LayerNorm: {
      // saved holds xhat in columns [0, c) and 1/std in column c.
      const Tensor& s = n.saved;
      const Tensor& gain = in(1).value;
      const std::size_t rows = g.rows(), cols = g.cols();
      Tensor* gx = gin(0);
      Tensor* gg = gin(1);
      Tensor* gb = gin(2);
      for (std::size_t r = 0; r < rows; ++r) {
        double sum_d = 0.0, sum_dx = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          const double xhat = s(r, c);
          if (gg) (*gg)(0, c) += g(r, c) * xhat;
          if (gb) (*gb)(0, c) += g(r, c);
          const double d = g(r, c) * gain(0, c);
          sum_d += d;
          sum_dx += d * xhat;
        }
        if (gx) {
          const double inv_std = s(r, cols);
          const double nc = static_cast<double>(cols);
          for (std::size_t c = 0; c < cols; ++c) {
            const double d = g(r, c) * gain(0, c);
            (*gx)(r, c) += inv_std / nc * (nc * d - sum_d - s(r, c) * sum_dx);
          }
        }
      }
      break;
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of({a, b}, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) shape_fail("matmul", av, bv);
  Tensor out(av.rows(), bv.cols());
  kernels::matmul(av, bv, out);
  return t.record(OpKind::MatMul, {a.id(), b.id()}, std::move(out));
}

namespace {
Var add_sub(Var a, Var b, bool subtract) {
  const char* name = subtract ? "sub" : "add";
  Tape& t = tape_of({a, b}, name);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!broadcastable(av, bv)) shape_fail(name, av, bv);
  Tensor out = av;
  const double sign = subtract ? -1.0 : 1.0;
  for (std::size_t r = 0; r < av.rows(); ++r) {
    const std::size_t br = bv.rows() == 1 ? 0 : r;
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) += sign * bv(br, c);
  }
  return t.record(subtract ? OpKind::Sub : OpKind::Add, {a.id(), b.id()}, std::move(out));
}
}  // namespace

Var add(Var a, Var b) { return add_sub(a, b, false); }
Var sub(Var a, Var b) { return add_sub(a, b, true); }

Var mul(Var a, Var b) {
  Tape& t = tape_of({a, b}, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) shape_fail("mul", av, bv);
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return t.record(OpKind::Mul, {a.id(), b.id()}, std::move(out));
}

Var scale(Var a, double c) {
  Tape& t = tape_of({a}, "scale");
  return t.record(OpKind::Scale, {a.id()}, map(a.value(), [c](double x) { return c * x; }), {}, c);
}

Var sigmoid(Var a) {
  Tape& t = tape_of({a}, "sigmoid");
  return t.record(OpKind::Sigmoid, {a.id()}, map(a.value(), logistic));
}

Var tanh(Var a) {
  Tape& t = tape_of({a}, "tanh");
  return t.record(OpKind::Tanh, {a.id()}, map(a.value(), [](double x) { return std::tanh(x); }));
}

Var relu(Var a) {
  Tape& t = tape_of({a}, "relu");
  return t.record(OpKind::Relu, {a.id()},
                  map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }));
}

Var softmax(Var a) {
  Tape& t = tape_of({a}, "softmax");
  const Tensor& x = a.value();
  if (x.cols() == 0) throw ShapeError("softmax: empty rows");
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mx = x(r, 0);
    for (std::size_t c = 1; c < x.cols(); ++c) mx = std::max(mx, x(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      out(r, c) = std::exp(x(r, c) - mx);
      z += out(r, c);
    }
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) /= z;
  }
  return t.record(OpKind::Softmax, {a.id()}, std::move(out));
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape& t = *parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw Error("concat: operands on different tapes");
    if (p.rows() != rows) shape_fail("concat", parts.front().value(), p.value());
    cols += p.cols();
    ids.push_back(p.id());
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out(r, offset + c) = v(r, c);
    offset += v.cols();
  }
  return t.record(OpKind::Concat, std::move(ids), std::move(out));
}

Var slice(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of({a}, "slice");
  const Tensor& x = a.value();
  if (begin > end || end > x.cols()) {
    throw ShapeError("slice: columns [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + x.shape_string());
  }
  Tensor out(x.rows(), end - begin);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = x(r, c);
  return t.record(OpKind::Slice, {a.id()}, std::move(out), {}, 0.0, begin, end);
}

Var transpose(Var a) {
  Tape& t = tape_of({a}, "transpose");
  const Tensor& x = a.value();
  Tensor out(x.cols(), x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(c, r) = x(r, c);
  return t.record(OpKind::Transpose, {a.id()}, std::move(out));
}

Var sum(Var a) {
  Tape& t = tape_of({a}, "sum");
  double s = 0.0;
  for (double x : a.value().values()) s += x;
  return t.record(OpKind::Sum, {a.id()}, Tensor(1, 1, s));
}

Var log(Var a, double floor) {
  Tape& t = tape_of({a}, "log");
  return t.record(OpKind::Log, {a.id()},
                  map(a.value(), [floor](double x) { return std::log(std::max(x, floor)); }), {},
                  floor);
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = tape_of({x, gain, bias}, "layer_norm");
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (cols == 0) throw ShapeError("layer_norm: empty rows");
  if (gain.rows() != 1 || gain.cols() != cols) shape_fail("layer_norm", xv, gain.value());
  if (bias.rows() != 1 || bias.cols() != cols) shape_fail("layer_norm", xv, bias.value());
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor out(rows, cols);
  Tensor saved(rows, cols + 1);
  const double nc = static_cast<double>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += xv(r, c);
    mean /= nc;
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = xv(r, c) - mean;
      var += d * d;
    }
    var /= nc;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const double xhat = (xv(r, c) - mean) * inv_std;
      saved(r, c) = xhat;
      out(r, c) = xhat * gv(0, c) + bv(0, c);
    }
    saved(r, cols) = inv_std;
  }
  return t.record(OpKind::LayerNorm, {x.id(), gain.id(), bias.id()}, std::move(out),
                  std::move(saved), eps);
}

}  // namespace rcd
