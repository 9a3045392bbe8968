#pragma once

// Reverse-mode automatic differentiation over rank-2 tensors.
//
// A Tape records every operation applied to its variables in execution order;
// backward() walks the record in exact reverse. Parameters are bound to the
// tape by address with Tape::param(), so a tensor used several times in one
// forward pass is a single leaf whose gradient accumulates all uses.

#include <cstddef>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rcd/tensor.hpp"

namespace rcd {

enum class OpKind {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  Sigmoid,
  Tanh,
  Relu,
  Softmax,
  Concat,
  Slice,
  Transpose,
  Sum,
  Log,
  LayerNorm,
};

std::string_view to_string(OpKind k);

class Tape;

// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Non-differentiable input.
  Var constant(Tensor value);
  // Differentiable input owned by the tape.
  Var variable(Tensor value);
  // Binds an external parameter tensor. Repeated calls with the same tensor
  // return the same leaf. The tensor must outlive the tape and stay unmodified
  // while the tape is in use.
  Var param(const Tensor& p);

  Var record(OpKind op, std::vector<std::size_t> inputs, Tensor value, Tensor saved = {},
             double attr = 0.0, std::size_t begin = 0, std::size_t end = 0);

  // Fills gradients of `loss` (a 1x1 value on this tape) for every node.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  // Gradient of the last backward() loss w.r.t. this node (zeros if unreachable).
  Tensor grad(Var v) const;
  // Gradient w.r.t. a bound parameter; zeros of the parameter's shape if the
  // parameter was never bound on this tape.
  Tensor grad(const Tensor& p) const;

  std::size_t size() const { return nodes_.size(); }
  OpKind op(std::size_t id) const { return nodes_.at(id).op; }
  std::span<const std::size_t> inputs(std::size_t id) const { return nodes_.at(id).inputs; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

 private:
  struct Node {
    OpKind op = OpKind::Leaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor saved;
    double attr = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;
    bool requires_grad = false;
  };

  void backprop_node(std::size_t id, std::vector<Tensor>& grads) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::unordered_map<const Tensor*, std::size_t> bound_;
  bool has_grads_ = false;
};

// Operations. All inputs must live on the same tape.

Var matmul(Var a, Var b);
// a + b; b may also be a single row broadcast over a's rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
// Elementwise product of equal shapes.
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
// Row-wise softmax, max-subtracted.
Var softmax(Var a);
// Concatenation along columns.
Var concat(std::span<const Var> parts);
// Columns [begin, end).
Var slice(Var a, std::size_t begin, std::size_t end);
Var transpose(Var a);
// Sum of all entries as a 1x1 value.
Var sum(Var a);
// Natural log of max(a, floor); entries below the floor get zero gradient.
Var log(Var a, double floor = 0.0);
// Per row: (x - mean) / sqrt(var + eps) * gain + bias, with gain and bias 1 x cols.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

inline constexpr double kLayerNormEps = 1e-5;

// Numerically stable scalar logistic function.
double logistic(double x);

}  // namespace rcd
