// Reverse-mode automatic differentiation over dense row-major tensors.
//
// A Tape records every operation of one forward pass. After backward() each
// recorded node holds dL/d(node); leaves created with Tape::leaf() are the
// differentiable inputs. A tape is single-threaded and single-use: call
// reset() (or build a new tape) before recording the next step.
//
//   Tape tape;
//   Var x = tape.leaf(Tensor::vector({1.0, -2.0, 3.0}));
//   Var loss = reduce_sum(hadamard(x, x));
//   tape.backward(loss);
//   tape.grad(x);  // [2, -4, 6]

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tkgat {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense 64-bit tensor value. Rank 0 is a scalar holding one element.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double at(std::size_t row, std::size_t col) const { return values_[row * shape_[1] + col]; }
  double& at(std::size_t row, std::size_t col) { return values_[row * shape_[1] + col]; }

  /// Value of a single-element tensor.
  double item() const;

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const;
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class OpKind : std::uint8_t {
  kLeaf,
  kConstant,
  kMatMul,
  kExp,
  kRelu,
  kLeakyRelu,
  kHadamard,
  kHadamardRowBroadcast,
  kConcat,
  kSoftmax,
  kSumAll,
  kSumAxis,
  kAdd,
  kAddScalarBroadcast,
  kSub,
  kScale,
  kTranspose,
  kReshape,
  kStack,
  kRow,
};

/// The computation record: an append-only list of operations in the order
/// they were executed, so every node's inputs precede it.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Tensor value);
  /// Non-differentiable input; its gradient is computed but never needed.
  Var constant(Tensor value);

  const Tensor& value(Var v) const;
  /// dL/dv from the last backward(). Throws StateError before backward().
  const Tensor& grad(Var v) const;

  /// Propagates d(loss)/d(loss) = 1 back through the record. The loss must be
  /// a single-element tensor. A second call without reset() throws.
  void backward(Var loss);
  bool has_backward() const { return backward_done_; }

  /// Drops every recorded node. Vars from before the reset become invalid.
  void reset();

  std::size_t size() const { return nodes_.size(); }
  OpKind op(Var v) const { return nodes_.at(v.id()).op; }

  // Recording entry points used by the free functions below.
  Var record(OpKind op, std::vector<std::size_t> inputs, Tensor value,
             double param = 0.0, std::size_t index = 0);

 private:
  struct Node {
    OpKind op;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    double param = 0.0;      // slope for leaky_relu, factor for scale
    std::size_t index = 0;   // axis for sum, row for row()
  };

  void propagate(std::size_t id, std::vector<Tensor>& grads) const;
  void check_owned(Var v) const;

  // deque keeps references to earlier values valid while recording.
  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

// ---- differentiable operations ----

/// [m x n] * [n x p] -> [m x p].
Var matmul(Var a, Var b);

Var exp(Var x);
Var relu(Var x);
/// slope must lie in (0, 1). Derivative at exactly 0 is the slope.
Var leaky_relu(Var x, double slope = 0.2);

/// Elementwise product. If b has rank 1 and a has rank 2 with a.dim(1) ==
/// b.dim(0), b is applied to every row of a.
Var hadamard(Var a, Var b);

/// Joins two rank-1 tensors of equal length.
Var concat_pair(Var a, Var b);

/// Softmax over a non-empty rank-1 tensor, computed with max subtraction.
Var softmax_vec(Var x);

/// Sum of every element, as a scalar.
Var reduce_sum(Var x);
/// Sum along one axis; the axis is removed from the shape.
Var reduce_sum(Var x, std::size_t axis);

/// Elementwise sum. b may also be a scalar, broadcast over a.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double factor);
Var transpose(Var x);
Var reshape(Var x, Shape shape);
/// Stacks equal-shape tensors along a new leading axis.
Var stack(std::span<const Var> parts);
/// Row `r` of a matrix as a rank-1 tensor.
Var row(Var x, std::size_t r);

// ---- verification ----

/// f records a scalar loss on the given tape from the given parameter vars.
using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients of f against central differences with
/// step h. Relative error per entry is |analytic - numeric| / max(1, |numeric|).
GradCheckResult grad_check(const ScalarFunction& f, const std::vector<Tensor>& params,
                           double h = 1e-6);

}  // namespace tkgat
