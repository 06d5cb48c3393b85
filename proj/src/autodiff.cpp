#include "tkgat/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tkgat/errors.hpp"

namespace tkgat {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

// ---- Tensor ----

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_size(shape_) != values_.size()) {
    throw DimensionError("tensor shape " + shape_to_string(shape_) + " needs " +
                         std::to_string(shape_size(shape_)) + " values, got " +
                         std::to_string(values_.size()));
  }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  std::vector<double> values(shape_size(shape), value);
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_to_string(shape_));
  }
  return values_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

// ---- Var ----

Tape& Var::tape() const {
  if (tape_ == nullptr) throw StateError("use of an unbound Var");
  return *tape_;
}

const Tensor& Var::value() const { return tape().value(*this); }

// ---- Tape ----

void Tape::check_owned(Var v) const {
  if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
    throw StateError("Var does not belong to this tape");
  }
}

Var Tape::record(OpKind op, std::vector<std::size_t> inputs, Tensor value, double param,
                 std::size_t index) {
  if (backward_done_) throw StateError("cannot record onto a tape after backward(); reset it first");
  nodes_.push_back(Node{op, std::move(inputs), std::move(value), Tensor{}, param, index});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) { return record(OpKind::kLeaf, {}, std::move(value)); }

Var Tape::constant(Tensor value) { return record(OpKind::kConstant, {}, std::move(value)); }

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id()].value;
}

const Tensor& Tape::grad(Var v) const {
  check_owned(v);
  if (!backward_done_) throw StateError("grad() requested before backward()");
  return nodes_[v.id()].grad;
}

void Tape::reset() {
  nodes_.clear();
  backward_done_ = false;
}

void Tape::backward(Var loss) {
  check_owned(loss);
  if (backward_done_) throw StateError("backward() already ran on this tape; reset it first");
  if (nodes_[loss.id()].value.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_to_string(nodes_[loss.id()].value.shape()));
  }

  std::vector<Tensor> grads;
  grads.reserve(nodes_.size());
  for (const auto& node : nodes_) grads.push_back(Tensor::zeros(node.value.shape()));
  grads[loss.id()][0] = 1.0;

  // Nodes recorded after the loss cannot influence it.
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    if (nodes_[id].inputs.empty()) continue;
    propagate(id, grads);
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) nodes_[id].grad = std::move(grads[id]);
  backward_done_ = true;
}

namespace {

void accumulate(Tensor& into, std::span<const double> g) {
  auto dst = into.values();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

}  // namespace

void Tape::propagate(std::size_t id, std::vector<Tensor>& grads) const {
  const Node& node = nodes_[id];
  const auto g = grads[id].values();
  const auto& in = node.inputs;

  switch (node.op) {
    case OpKind::kLeaf:
    case OpKind::kConstant:
      break;

    case OpKind::kMatMul: {
      const Tensor& a = nodes_[in[0]].value;
      const Tensor& b = nodes_[in[1]].value;
      const std::size_t m = a.dim(0), n = a.dim(1), p = b.dim(1);
      auto ga = grads[in[0]].values();
      auto gb = grads[in[1]].values();
      const auto av = a.values();
      const auto bv = b.values();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
          const double gij = g[i * p + j];
          if (gij == 0.0) continue;
          for (std::size_t t = 0; t < n; ++t) {
            ga[i * n + t] += gij * bv[t * p + j];
            gb[t * p + j] += av[i * n + t] * gij;
          }
        }
      }
      break;
    }

    case OpKind::kExp: {
      auto ga = grads[in[0]].values();
      const auto y = node.value.values();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      break;
    }

    case OpKind::kRelu: {
      auto ga = grads[in[0]].values();
      const auto x = nodes_[in[0]].value.values();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += x[i] > 0.0 ? g[i] : 0.0;
      break;
    }

    case OpKind::kLeakyRelu: {
      auto ga = grads[in[0]].values();
      const auto x = nodes_[in[0]].value.values();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += x[i] > 0.0 ? g[i] : node.param * g[i];
      break;
    }

    case OpKind::kHadamard: {
      auto ga = grads[in[0]].values();
      auto gb = grads[in[1]].values();
      const auto a = nodes_[in[0]].value.values();
      const auto b = nodes_[in[1]].value.values();
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * b[i];
        gb[i] += g[i] * a[i];
      }
      break;
    }

    case OpKind::kHadamardRowBroadcast: {
      auto ga = grads[in[0]].values();
      auto gb = grads[in[1]].values();
      const auto a = nodes_[in[0]].value.values();
      const auto b = nodes_[in[1]].value.values();
      const std::size_t cols = b.size();
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * b[i % cols];
        gb[i % cols] += g[i] * a[i];
      }
      break;
    }

    case OpKind::kConcat: {
      auto ga = grads[in[0]].values();
      auto gb = grads[in[1]].values();
      const std::size_t split = ga.size();
      for (std::size_t i = 0; i < split; ++i) ga[i] += g[i];
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[split + i];
      break;
    }

    case OpKind::kSoftmax: {
      auto ga = grads[in[0]].values();
      const auto y = node.value.values();
      double dot = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
      for (std::size_t i = 0; i < y.size(); ++i) ga[i] += y[i] * (g[i] - dot);
      break;
    }

    case OpKind::kSumAll: {
      auto ga = grads[in[0]].values();
      for (auto& v : ga) v += g[0];
      break;
    }

    case OpKind::kSumAxis: {
      const Shape& shape = nodes_[in[0]].value.shape();
      const std::size_t axis = node.index;
      std::size_t outer = 1, inner = 1;
      for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
      for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
      const std::size_t len = shape[axis];
      auto ga = grads[in[0]].values();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t l = 0; l < len; ++l)
          for (std::size_t i = 0; i < inner; ++i) ga[(o * len + l) * inner + i] += g[o * inner + i];
      break;
    }

    case OpKind::kAdd:
      accumulate(grads[in[0]], g);
      accumulate(grads[in[1]], g);
      break;

    case OpKind::kAddScalarBroadcast: {
      accumulate(grads[in[0]], g);
      double total = 0.0;
      for (double v : g) total += v;
      grads[in[1]][0] += total;
      break;
    }

    case OpKind::kSub: {
      accumulate(grads[in[0]], g);
      auto gb = grads[in[1]].values();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      break;
    }

    case OpKind::kScale: {
      auto ga = grads[in[0]].values();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += node.param * g[i];
      break;
    }

    case OpKind::kTranspose: {
      const Tensor& x = nodes_[in[0]].value;
      const std::size_t r = x.dim(0), c = x.dim(1);
      auto ga = grads[in[0]].values();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
      break;
    }

    case OpKind::kReshape:
      accumulate(grads[in[0]], g);
      break;

    case OpKind::kStack: {
      std::size_t offset = 0;
      for (std::size_t part : in) {
        auto gp = grads[part].values();
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
        offset += gp.size();
      }
      break;
    }

    case OpKind::kRow: {
      auto ga = grads[in[0]].values();
      const std::size_t cols = g.size();
      for (std::size_t c = 0; c < cols; ++c) ga[node.index * cols + c] += g[c];
      break;
    }
  }
}

// ---- operations ----

namespace {

Tape& common_tape(Var a, Var b) {
  Tape& t = a.tape();
  if (&b.tape() != &t) throw StateError("operands recorded on different tapes");
  return t;
}

DimensionError shape_error(const char* op, const Shape& a, const Shape& b) {
  return DimensionError(std::string(op) + ": incompatible shapes " + shape_to_string(a) + " and " +
                        shape_to_string(b));
}

template <typename Fn>
Var unary(Var x, OpKind op, Fn fn, double param = 0.0) {
  const Tensor& in = x.value();
  std::vector<double> out(in.size());
  const auto v = in.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(v[i]);
  return x.tape().record(op, {x.id()}, Tensor(in.shape(), std::move(out)), param);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw shape_error("matmul", av.shape(), bv.shape());
  }
  const std::size_t m = av.dim(0), n = av.dim(1), p = bv.dim(1);
  std::vector<double> out(m * p, 0.0);
  const auto x = av.values();
  const auto y = bv.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double xik = x[i * n + k];
      for (std::size_t j = 0; j < p; ++j) out[i * p + j] += xik * y[k * p + j];
    }
  return t.record(OpKind::kMatMul, {a.id(), b.id()}, Tensor({m, p}, std::move(out)));
}

Var exp(Var x) {
  return unary(x, OpKind::kExp, [](double v) { return std::exp(v); });
}

Var relu(Var x) {
  return unary(x, OpKind::kRelu, [](double v) { return v > 0.0 ? v : 0.0; });
}

Var leaky_relu(Var x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw ContractError("leaky_relu slope must lie in (0, 1), got " + std::to_string(slope));
  }
  return unary(
      x, OpKind::kLeakyRelu, [slope](double v) { return v > 0.0 ? v : slope * v; }, slope);
}

Var hadamard(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const auto x = av.values();
  const auto y = bv.values();
  if (av.shape() == bv.shape()) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    return t.record(OpKind::kHadamard, {a.id(), b.id()}, Tensor(av.shape(), std::move(out)));
  }
  if (av.rank() == 2 && bv.rank() == 1 && av.dim(1) == bv.dim(0)) {
    const std::size_t cols = bv.dim(0);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i % cols];
    return t.record(OpKind::kHadamardRowBroadcast, {a.id(), b.id()},
                    Tensor(av.shape(), std::move(out)));
  }
  throw shape_error("hadamard", av.shape(), bv.shape());
}

Var concat_pair(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 1 || bv.rank() != 1 || av.size() != bv.size()) {
    throw shape_error("concat_pair", av.shape(), bv.shape());
  }
  std::vector<double> out(av.values().begin(), av.values().end());
  out.insert(out.end(), bv.values().begin(), bv.values().end());
  return t.record(OpKind::kConcat, {a.id(), b.id()}, Tensor::vector(std::move(out)));
}

Var softmax_vec(Var x) {
  const Tensor& in = x.value();
  if (in.rank() != 1) throw DimensionError("softmax_vec expects rank 1, got " + shape_to_string(in.shape()));
  if (in.size() == 0) throw ContractError("softmax_vec of an empty vector");
  const auto v = in.values();
  const double peak = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - peak);
    total += out[i];
  }
  for (auto& o : out) o /= total;
  return x.tape().record(OpKind::kSoftmax, {x.id()}, Tensor::vector(std::move(out)));
}

Var reduce_sum(Var x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return x.tape().record(OpKind::kSumAll, {x.id()}, Tensor::scalar(total));
}

Var reduce_sum(Var x, std::size_t axis) {
  const Tensor& in = x.value();
  const Shape& shape = in.shape();
  if (axis >= shape.size()) {
    throw DimensionError("reduce_sum: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  const std::size_t len = shape[axis];
  Shape out_shape = shape;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(outer * inner, 0.0);
  const auto v = in.values();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += v[(o * len + l) * inner + i];
  return x.tape().record(OpKind::kSumAxis, {x.id()}, Tensor(std::move(out_shape), std::move(out)),
                         0.0, axis);
}

Var add(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const auto x = av.values();
  const auto y = bv.values();
  if (av.shape() == bv.shape()) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    return t.record(OpKind::kAdd, {a.id(), b.id()}, Tensor(av.shape(), std::move(out)));
  }
  if (bv.rank() == 0) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[0];
    return t.record(OpKind::kAddScalarBroadcast, {a.id(), b.id()}, Tensor(av.shape(), std::move(out)));
  }
  throw shape_error("add", av.shape(), bv.shape());
}

Var sub(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) throw shape_error("sub", av.shape(), bv.shape());
  const auto x = av.values();
  const auto y = bv.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return t.record(OpKind::kSub, {a.id(), b.id()}, Tensor(av.shape(), std::move(out)));
}

Var scale(Var x, double factor) {
  return unary(x, OpKind::kScale, [factor](double v) { return factor * v; }, factor);
}

Var transpose(Var x) {
  const Tensor& in = x.value();
  if (in.rank() != 2) throw DimensionError("transpose expects rank 2, got " + shape_to_string(in.shape()));
  const std::size_t r = in.dim(0), c = in.dim(1);
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in.at(i, j);
  return x.tape().record(OpKind::kTranspose, {x.id()}, Tensor({c, r}, std::move(out)));
}

Var reshape(Var x, Shape shape) {
  const Tensor& in = x.value();
  if (shape_size(shape) != in.size()) {
    throw shape_error("reshape", in.shape(), shape);
  }
  std::vector<double> values(in.values().begin(), in.values().end());
  return x.tape().record(OpKind::kReshape, {x.id()}, Tensor(std::move(shape), std::move(values)));
}

Var stack(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("stack of zero tensors");
  Tape& t = parts.front().tape();
  const Shape& part_shape = parts.front().value().shape();
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  std::vector<double> out;
  out.reserve(parts.size() * shape_size(part_shape));
  for (const Var& p : parts) {
    if (&p.tape() != &t) throw StateError("operands recorded on different tapes");
    const Tensor& v = p.value();
    if (v.shape() != part_shape) throw shape_error("stack", part_shape, v.shape());
    out.insert(out.end(), v.values().begin(), v.values().end());
    ids.push_back(p.id());
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), part_shape.begin(), part_shape.end());
  return t.record(OpKind::kStack, std::move(ids), Tensor(std::move(shape), std::move(out)));
}

Var row(Var x, std::size_t r) {
  const Tensor& in = x.value();
  if (in.rank() != 2 || r >= in.dim(0)) {
    throw DimensionError("row " + std::to_string(r) + " of shape " + shape_to_string(in.shape()));
  }
  const std::size_t c = in.dim(1);
  const auto v = in.values();
  std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(r * c),
                          v.begin() + static_cast<std::ptrdiff_t>((r + 1) * c));
  return x.tape().record(OpKind::kRow, {x.id()}, Tensor::vector(std::move(out)), 0.0, r);
}

// ---- grad_check ----

namespace {

double evaluate(const ScalarFunction& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.leaf(p));
  const Var out = f(tape, vars);
  return out.value().item();
}

}  // namespace

GradCheckResult grad_check(const ScalarFunction& f, const std::vector<Tensor>& params, double h) {
  if (!(h > 0.0)) throw ContractError("grad_check step must be positive");

  const double first = evaluate(f, params);
  const double second = evaluate(f, params);
  if (first != second && !(std::isnan(first) && std::isnan(second))) {
    throw ContractError("grad_check: function is not deterministic");
  }

  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.leaf(p));
  tape.backward(f(tape, vars));

  GradCheckResult result;
  std::vector<Tensor> probe = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor& analytic = tape.grad(vars[p]);
    for (std::size_t e = 0; e < params[p].size(); ++e) {
      const double original = params[p][e];
      probe[p][e] = original + h;
      const double up = evaluate(f, probe);
      probe[p][e] = original - h;
      const double down = evaluate(f, probe);
      probe[p][e] = original;

      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[e] - numeric) / std::max(1.0, std::abs(numeric));
      if (err > result.max_relative_error || std::isnan(err)) {
        result = {std::isnan(err) ? std::numeric_limits<double>::infinity() : err, p, e, analytic[e],
                  numeric};
      }
    }
  }
  return result;
}

}  // namespace tkgat
