#include "stopnav/numeric/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "stopnav/error.hpp"
#include "stopnav/rng.hpp"

namespace stopnav::numeric {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

constexpr std::uint32_t kNone = UINT32_MAX;

[[noreturn]] void shape_error(OpKind op, const std::string& what) {
  throw Error(ErrorCode::shape_mismatch, std::string(to_string(op)) + ": " + what);
}

double sigmoid_of(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string_view to_string(OpKind op) noexcept {
  switch (op) {
    case OpKind::constant: return "constant";
    case OpKind::parameter: return "parameter";
    case OpKind::affine: return "affine";
    case OpKind::matvec: return "matvec";
    case OpKind::matvec_transposed: return "matvec_transposed";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::stack: return "stack";
    case OpKind::add: return "add";
    case OpKind::scale: return "scale";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::relu: return "relu";
    case OpKind::softmax: return "softmax";
    case OpKind::log: return "log";
    case OpKind::sum: return "sum";
    case OpKind::pick: return "pick";
    case OpKind::embedding: return "embedding";
    case OpKind::lstm_cell: return "lstm_cell";
    case OpKind::conv2d: return "conv2d";
  }
  return "unknown";
}

Tape::Tape(const ParamStore& params) : params_(&params), param_nodes_(params.size(), kNone) {
  nodes_.reserve(1024);
  values_.reserve(1 << 16);
}

void Tape::clear() {
  nodes_.clear();
  values_.clear();
  grads_.clear();
  aux_.clear();
  lists_.clear();
  param_nodes_.assign(params_->size(), kNone);
  log_clamps_ = 0;
  has_grads_ = false;
}

Var Tape::push(Node node) {
  if (has_grads_) {
    throw Error(ErrorCode::invalid_argument, "Tape: cannot record after backward(); call clear() first");
  }
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw Error(ErrorCode::invalid_argument, "Tape: invalid Var");
  return nodes_[v.id];
}

namespace {
// Every slot starts on a 64-byte boundary.
std::size_t round_up(std::size_t n) { return (n + 7) & ~std::size_t{7}; }
}  // namespace

std::size_t Tape::alloc_values(std::size_t n) {
  const std::size_t offset = round_up(values_.size());
  values_.resize(offset + n);
  return offset;
}

std::size_t Tape::alloc_aux(std::size_t n) {
  const std::size_t offset = round_up(aux_.size());
  aux_.resize(offset + n);
  return offset;
}

double* Tape::val(std::uint32_t id) {
  return values_.data() + nodes_[id].offset;
}

const double* Tape::val(std::uint32_t id) const {
  return values_.data() + nodes_[id].offset;
}

// ---------------------------------------------------------------- leaves

Var Tape::constant(const Array& value) { return constant(value.data(), value.shape()); }

Var Tape::constant(std::span<const double> values, Shape shape) {
  if (element_count(shape) != values.size() || values.empty()) {
    shape_error(OpKind::constant, "shape " + shape_string(shape) + " does not hold " + std::to_string(values.size()));
  }
  Node n{OpKind::constant, false, std::move(shape), alloc_values(values.size()), values.size()};
  std::copy(values.begin(), values.end(), values_.begin() + static_cast<std::ptrdiff_t>(n.offset));
  return push(std::move(n));
}

Var Tape::param(std::string_view name) { return param(params_->index_of(name)); }

Var Tape::param(std::size_t index) {
  if (index >= params_->size()) throw Error(ErrorCode::not_found, "Tape: parameter index out of range");
  if (param_nodes_[index] != kNone) return Var{param_nodes_[index]};
  const Array& a = params_->entry(index).value;
  // Copied into the aligned arena so kernel results never depend on heap addresses.
  Node n{OpKind::parameter, true, a.shape(), alloc_values(a.size()), a.size()};
  std::copy(a.data().begin(), a.data().end(), values_.begin() + static_cast<std::ptrdiff_t>(n.offset));
  n.iarg = index;
  Var v = push(std::move(n));
  param_nodes_[index] = v.id;
  return v;
}

// ---------------------------------------------------------------- linear algebra

Var Tape::affine(Var weight, Var x) { return affine(weight, x, Var{}); }

Var Tape::affine(Var weight, Var x, Var bias) {
  const Node& w = node(weight);
  const Node& xn = node(x);
  if (w.shape.size() != 2) shape_error(OpKind::affine, "weight must be 2-D, got " + shape_string(w.shape));
  const std::size_t rows = w.shape[0];
  const std::size_t cols = w.shape[1];
  if (xn.size != cols) {
    shape_error(OpKind::affine, "weight " + shape_string(w.shape) + " cannot map input of " + std::to_string(xn.size));
  }
  bool needs = w.needs_grad || xn.needs_grad;
  if (bias.valid()) {
    const Node& b = node(bias);
    if (b.size != rows) shape_error(OpKind::affine, "bias has " + std::to_string(b.size) + " entries, expected " + std::to_string(rows));
    needs = needs || b.needs_grad;
  }
  Node n{OpKind::affine, needs, {rows}, alloc_values(rows), rows};
  n.in = {weight.id, x.id, bias.valid() ? bias.id : kNone};
  Var out = push(std::move(n));
  VectorMap y(val(out.id), static_cast<Eigen::Index>(rows));
  y.noalias() = ConstMatrixMap(val(weight.id), rows, cols) * ConstVectorMap(val(x.id), cols);
  if (bias.valid()) y += ConstVectorMap(val(bias.id), rows);
  return out;
}

Var Tape::matvec(Var matrix, Var x) {
  const Node& m = node(matrix);
  const Node& xn = node(x);
  if (m.shape.size() != 2 || m.shape[1] != xn.size) {
    shape_error(OpKind::matvec, "matrix " + shape_string(m.shape) + " vs vector of " + std::to_string(xn.size));
  }
  const std::size_t rows = m.shape[0];
  const std::size_t cols = m.shape[1];
  Node n{OpKind::matvec, m.needs_grad || xn.needs_grad, {rows}, alloc_values(rows), rows};
  n.in = {matrix.id, x.id};
  Var out = push(std::move(n));
  VectorMap(val(out.id), rows).noalias() = ConstMatrixMap(val(matrix.id), rows, cols) * ConstVectorMap(val(x.id), cols);
  return out;
}

Var Tape::matvec_transposed(Var matrix, Var x) {
  const Node& m = node(matrix);
  const Node& xn = node(x);
  if (m.shape.size() != 2 || m.shape[0] != xn.size) {
    shape_error(OpKind::matvec_transposed, "matrix " + shape_string(m.shape) + " vs vector of " + std::to_string(xn.size));
  }
  const std::size_t rows = m.shape[0];
  const std::size_t cols = m.shape[1];
  Node n{OpKind::matvec_transposed, m.needs_grad || xn.needs_grad, {cols}, alloc_values(cols), cols};
  n.in = {matrix.id, x.id};
  Var out = push(std::move(n));
  VectorMap(val(out.id), cols).noalias() =
      ConstMatrixMap(val(matrix.id), rows, cols).transpose() * ConstVectorMap(val(x.id), rows);
  return out;
}

// ---------------------------------------------------------------- structure

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) shape_error(OpKind::concat, "no inputs");
  std::size_t total = 0;
  bool needs = false;
  for (Var p : parts) {
    total += node(p).size;
    needs = needs || node(p).needs_grad;
  }
  Node n{OpKind::concat, needs, {total}, alloc_values(total), total};
  n.list_begin = lists_.size();
  n.list_count = parts.size();
  for (Var p : parts) lists_.push_back(p.id);
  Var out = push(std::move(n));
  double* dst = val(out.id);
  for (Var p : parts) {
    const std::size_t k = nodes_[p.id].size;
    std::copy_n(val(p.id), k, dst);
    dst += k;
  }
  return out;
}

Var Tape::slice(Var v, std::size_t offset, std::size_t length) {
  const Node& src = node(v);
  if (length == 0 || offset + length > src.size) {
    shape_error(OpKind::slice, "range [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                                   ") outside " + std::to_string(src.size) + " entries");
  }
  Node n{OpKind::slice, src.needs_grad, {length}, alloc_values(length), length};
  n.in = {v.id};
  n.iarg = offset;
  Var out = push(std::move(n));
  std::copy_n(val(v.id) + offset, length, val(out.id));
  return out;
}

Var Tape::stack(std::span<const Var> rows) {
  if (rows.empty()) shape_error(OpKind::stack, "no rows");
  const std::size_t d = node(rows.front()).size;
  bool needs = false;
  for (Var r : rows) {
    if (node(r).size != d) shape_error(OpKind::stack, "rows differ in length");
    needs = needs || node(r).needs_grad;
  }
  const std::size_t total = d * rows.size();
  Node n{OpKind::stack, needs, {rows.size(), d}, alloc_values(total), total};
  n.list_begin = lists_.size();
  n.list_count = rows.size();
  for (Var r : rows) lists_.push_back(r.id);
  Var out = push(std::move(n));
  double* dst = val(out.id);
  for (Var r : rows) {
    std::copy_n(val(r.id), d, dst);
    dst += d;
  }
  return out;
}

// ---------------------------------------------------------------- elementwise

Var Tape::add(Var a, Var b) {
  const Node& an = node(a);
  const Node& bn = node(b);
  if (an.size != bn.size) shape_error(OpKind::add, shape_string(an.shape) + " + " + shape_string(bn.shape));
  Node n{OpKind::add, an.needs_grad || bn.needs_grad, an.shape, alloc_values(an.size), an.size};
  n.in = {a.id, b.id};
  Var out = push(std::move(n));
  const std::size_t k = nodes_[out.id].size;
  const double* pa = val(a.id);
  const double* pb = val(b.id);
  double* y = val(out.id);
  for (std::size_t i = 0; i < k; ++i) y[i] = pa[i] + pb[i];
  return out;
}

Var Tape::scale(Var a, double factor) {
  const Node& an = node(a);
  Node n{OpKind::scale, an.needs_grad, an.shape, alloc_values(an.size), an.size};
  n.in = {a.id};
  n.darg = factor;
  Var out = push(std::move(n));
  const std::size_t k = nodes_[out.id].size;
  const double* x = val(a.id);
  double* y = val(out.id);
  for (std::size_t i = 0; i < k; ++i) y[i] = factor * x[i];
  return out;
}

Var Tape::tanh(Var a) {
  const Node& an = node(a);
  Node n{OpKind::tanh, an.needs_grad, an.shape, alloc_values(an.size), an.size};
  n.in = {a.id};
  Var out = push(std::move(n));
  const std::size_t k = nodes_[out.id].size;
  const double* x = val(a.id);
  double* y = val(out.id);
  for (std::size_t i = 0; i < k; ++i) y[i] = std::tanh(x[i]);
  return out;
}

Var Tape::sigmoid(Var a) {
  const Node& an = node(a);
  Node n{OpKind::sigmoid, an.needs_grad, an.shape, alloc_values(an.size), an.size};
  n.in = {a.id};
  Var out = push(std::move(n));
  const std::size_t k = nodes_[out.id].size;
  const double* x = val(a.id);
  double* y = val(out.id);
  for (std::size_t i = 0; i < k; ++i) y[i] = sigmoid_of(x[i]);
  return out;
}

Var Tape::relu(Var a) {
  const Node& an = node(a);
  Node n{OpKind::relu, an.needs_grad, an.shape, alloc_values(an.size), an.size};
  n.in = {a.id};
  Var out = push(std::move(n));
  const std::size_t k = nodes_[out.id].size;
  const double* x = val(a.id);
  double* y = val(out.id);
  for (std::size_t i = 0; i < k; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Var Tape::softmax(Var a) {
  const Node& an = node(a);
  Node n{OpKind::softmax, an.needs_grad, {an.size}, alloc_values(an.size), an.size};
  n.in = {a.id};
  Var out = push(std::move(n));
  const std::size_t k = nodes_[out.id].size;
  std::copy_n(val(a.id), k, val(out.id));
  softmax_inplace(std::span<double>(val(out.id), k));
  return out;
}

Var Tape::log(Var a) {
  const Node& an = node(a);
  Node n{OpKind::log, an.needs_grad, an.shape, alloc_values(an.size), an.size};
  n.in = {a.id};
  Var out = push(std::move(n));
  const std::size_t k = nodes_[out.id].size;
  const double* x = val(a.id);
  double* y = val(out.id);
  for (std::size_t i = 0; i < k; ++i) {
    if (x[i] < kLogFloor) {
      ++log_clamps_;
      y[i] = std::log(kLogFloor);
    } else {
      y[i] = std::log(x[i]);
    }
  }
  return out;
}

Var Tape::sum(Var a) {
  const Node& an = node(a);
  Node n{OpKind::sum, an.needs_grad, {1}, alloc_values(1), 1};
  n.in = {a.id};
  Var out = push(std::move(n));
  const std::size_t k = nodes_[a.id].size;
  const double* x = val(a.id);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) total += x[i];
  *val(out.id) = total;
  return out;
}

Var Tape::pick(Var a, std::size_t index) {
  const Node& an = node(a);
  if (index >= an.size) shape_error(OpKind::pick, "index " + std::to_string(index) + " outside " + std::to_string(an.size));
  Node n{OpKind::pick, an.needs_grad, {1}, alloc_values(1), 1};
  n.in = {a.id};
  n.iarg = index;
  Var out = push(std::move(n));
  *val(out.id) = val(a.id)[index];
  return out;
}

Var Tape::embedding(Var table, std::size_t row) {
  const Node& t = node(table);
  if (t.shape.size() != 2) shape_error(OpKind::embedding, "table must be 2-D, got " + shape_string(t.shape));
  if (row >= t.shape[0]) {
    shape_error(OpKind::embedding, "row " + std::to_string(row) + " outside table of " + std::to_string(t.shape[0]));
  }
  const std::size_t d = t.shape[1];
  Node n{OpKind::embedding, t.needs_grad, {d}, alloc_values(d), d};
  n.in = {table.id};
  n.iarg = row;
  Var out = push(std::move(n));
  std::copy_n(val(table.id) + row * d, d, val(out.id));
  return out;
}

// ---------------------------------------------------------------- fused cells

Var Tape::lstm_cell(Var x, Var h, Var c, Var weight, Var bias) {
  const Node& xn = node(x);
  const Node& hn = node(h);
  const Node& cn = node(c);
  const Node& wn = node(weight);
  const Node& bn = node(bias);
  const std::size_t hidden = hn.size;
  if (cn.size != hidden) shape_error(OpKind::lstm_cell, "cell state and hidden state differ in size");
  if (wn.shape.size() != 2 || wn.shape[0] != 4 * hidden || wn.shape[1] != xn.size + hidden) {
    shape_error(OpKind::lstm_cell, "weight " + shape_string(wn.shape) + " incompatible with input " +
                                       std::to_string(xn.size) + " and hidden " + std::to_string(hidden));
  }
  if (bn.size != 4 * hidden) shape_error(OpKind::lstm_cell, "bias must have 4*hidden entries");
  const bool needs = xn.needs_grad || hn.needs_grad || cn.needs_grad || wn.needs_grad || bn.needs_grad;
  const std::size_t in_size = xn.size;
  Node n{OpKind::lstm_cell, needs, {2 * hidden}, alloc_values(2 * hidden), 2 * hidden};
  n.in = {x.id, h.id, c.id, weight.id, bias.id};
  n.aux_offset = alloc_aux(5 * hidden);  // i, f, g, o, tanh(c')
  Var out = push(std::move(n));

  const auto H = static_cast<Eigen::Index>(hidden);
  const auto X = static_cast<Eigen::Index>(in_size);
  ConstMatrixMap w(val(weight.id), 4 * H, X + H);
  double* gates = aux_.data() + nodes_[out.id].aux_offset;
  VectorMap z(gates, 4 * H);
  z.noalias() = w.leftCols(X) * ConstVectorMap(val(x.id), X);
  z.noalias() += w.rightCols(H) * ConstVectorMap(val(h.id), H);
  z += ConstVectorMap(val(bias.id), 4 * H);

  const double* c_prev = val(c.id);
  double* y = val(out.id);
  double* tc = gates + 4 * hidden;
  for (std::size_t j = 0; j < hidden; ++j) {
    const double ig = sigmoid_of(gates[j]);
    const double fg = sigmoid_of(gates[hidden + j]);
    const double gg = std::tanh(gates[2 * hidden + j]);
    const double og = sigmoid_of(gates[3 * hidden + j]);
    gates[j] = ig;
    gates[hidden + j] = fg;
    gates[2 * hidden + j] = gg;
    gates[3 * hidden + j] = og;
    const double cell = fg * c_prev[j] + ig * gg;
    tc[j] = std::tanh(cell);
    y[j] = og * tc[j];
    y[hidden + j] = cell;
  }
  return out;
}

Var Tape::conv2d(Var input, Var kernel, Var bias, std::size_t stride) {
  const Node& in = node(input);
  const Node& kn = node(kernel);
  const Node& bn = node(bias);
  if (in.shape.size() != 3) shape_error(OpKind::conv2d, "input must be [C,H,W], got " + shape_string(in.shape));
  if (kn.shape.size() != 4 || kn.shape[1] != in.shape[0] || kn.shape[2] != kn.shape[3]) {
    shape_error(OpKind::conv2d, "kernel " + shape_string(kn.shape) + " incompatible with input " + shape_string(in.shape));
  }
  if (stride == 0) shape_error(OpKind::conv2d, "stride must be positive");
  const std::size_t channels = in.shape[0], height = in.shape[1], width = in.shape[2];
  const std::size_t filters = kn.shape[0], k = kn.shape[2];
  if (k > height || k > width) shape_error(OpKind::conv2d, "kernel larger than input " + shape_string(in.shape));
  if (bn.size != filters) shape_error(OpKind::conv2d, "bias must have one entry per filter");
  const std::size_t out_h = (height - k) / stride + 1;
  const std::size_t out_w = (width - k) / stride + 1;
  const std::size_t patch = channels * k * k;
  const std::size_t positions = out_h * out_w;

  Node n{OpKind::conv2d, in.needs_grad || kn.needs_grad || bn.needs_grad, {filters, out_h, out_w},
         alloc_values(filters * positions), filters * positions};
  n.in = {input.id, kernel.id, bias.id};
  n.iarg = stride;
  n.aux_offset = alloc_aux(patch * positions);
  Var out = push(std::move(n));

  // im2col: rows are (channel, ky, kx), columns are output positions.
  double* cols = aux_.data() + nodes_[out.id].aux_offset;
  const double* src = val(input.id);
  for (std::size_t ch = 0; ch < channels; ++ch) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = cols + ((ch * k + ky) * k + kx) * positions;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const double* line = src + (ch * height + oy * stride + ky) * width + kx;
          for (std::size_t ox = 0; ox < out_w; ++ox) row[oy * out_w + ox] = line[ox * stride];
        }
      }
    }
  }
  const auto F = static_cast<Eigen::Index>(filters);
  const auto P = static_cast<Eigen::Index>(patch);
  const auto Q = static_cast<Eigen::Index>(positions);
  MatrixMap y(val(out.id), F, Q);
  y.noalias() = ConstMatrixMap(val(kernel.id), F, P) * ConstMatrixMap(cols, P, Q);
  y.colwise() += ConstVectorMap(val(bias.id), F);
  return out;
}

// ---------------------------------------------------------------- accessors

const Shape& Tape::shape(Var v) const { return node(v).shape; }
std::size_t Tape::size(Var v) const { return node(v).size; }

std::span<const double> Tape::value(Var v) const {
  const Node& n = node(v);
  return {val(v.id), n.size};
}

double Tape::scalar(Var v) const {
  const Node& n = node(v);
  if (n.size != 1) throw Error(ErrorCode::shape_mismatch, "Tape::scalar: node holds " + std::to_string(n.size) + " values");
  return *val(v.id);
}

Array Tape::to_array(Var v) const {
  auto s = value(v);
  return Array(node(v).shape, std::vector<double>(s.begin(), s.end()));
}

OpKind Tape::op(Var v) const { return node(v).op; }
bool Tape::requires_grad(Var v) const { return node(v).needs_grad; }

std::span<const double> Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!has_grads_) throw Error(ErrorCode::invalid_argument, "Tape::grad: backward() has not run");
  return {grads_.data() + n.offset, n.size};
}

std::span<const double> Tape::param_grad(std::size_t index) const {
  if (!has_grads_ || index >= param_nodes_.size() || param_nodes_[index] == kNone) return {};
  const Node& n = nodes_[param_nodes_[index]];
  return {grads_.data() + n.offset, n.size};
}

Gradients Tape::gradients() const {
  Gradients out;
  for (std::size_t i = 0; i < params_->size(); ++i) {
    const auto& e = params_->entry(i);
    Array g(e.value.shape());
    auto src = param_grad(i);
    if (!src.empty()) std::copy(src.begin(), src.end(), g.data().begin());
    out.emplace(e.name, std::move(g));
  }
  return out;
}

std::uint64_t Tape::relu_pattern_hash() const {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  for (std::uint32_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].op != OpKind::relu) continue;
    const Node& src = nodes_[nodes_[id].in[0]];
    const double* x = val(nodes_[id].in[0]);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < src.size; ++i) {
      word = (word << 1) | (x[i] > 0.0 ? 1u : 0u);
      if ((i & 63) == 63 || i + 1 == src.size) {
        h = splitmix64(h ^ word);
        word = 0;
      }
    }
  }
  return h;
}

// ---------------------------------------------------------------- backward

void Tape::backward(Var loss) {
  const Node& l = node(loss);
  if (l.size != 1) {
    throw Error(ErrorCode::shape_mismatch, "backward: loss must be scalar, got " + shape_string(l.shape));
  }
  grads_.assign(values_.size(), 0.0);
  has_grads_ = true;
  grads_[l.offset] = 1.0;
  for (std::uint32_t id = loss.id + 1; id-- > 0;) {
    if (nodes_[id].needs_grad) backward_node(id);
  }
}

void Tape::backward_node(std::uint32_t id) {
  const Node& n = nodes_[id];
  const double* gy = grads_.data() + n.offset;
  const double* y = val(id);
  switch (n.op) {
    case OpKind::constant:
    case OpKind::parameter:
      return;

    case OpKind::affine: {
      const Node& w = nodes_[n.in[0]];
      const auto rows = static_cast<Eigen::Index>(w.shape[0]);
      const auto cols = static_cast<Eigen::Index>(w.shape[1]);
      ConstVectorMap g(gy, rows);
      if (needs(n.in[0])) MatrixMap(grd(n.in[0]), rows, cols).noalias() += g * ConstVectorMap(val(n.in[1]), cols).transpose();
      if (needs(n.in[1])) VectorMap(grd(n.in[1]), cols).noalias() += ConstMatrixMap(val(n.in[0]), rows, cols).transpose() * g;
      if (n.in[2] != kNone && needs(n.in[2])) VectorMap(grd(n.in[2]), rows) += g;
      return;
    }

    case OpKind::matvec: {
      const Node& m = nodes_[n.in[0]];
      const auto rows = static_cast<Eigen::Index>(m.shape[0]);
      const auto cols = static_cast<Eigen::Index>(m.shape[1]);
      ConstVectorMap g(gy, rows);
      if (needs(n.in[0])) MatrixMap(grd(n.in[0]), rows, cols).noalias() += g * ConstVectorMap(val(n.in[1]), cols).transpose();
      if (needs(n.in[1])) VectorMap(grd(n.in[1]), cols).noalias() += ConstMatrixMap(val(n.in[0]), rows, cols).transpose() * g;
      return;
    }

    case OpKind::matvec_transposed: {
      const Node& m = nodes_[n.in[0]];
      const auto rows = static_cast<Eigen::Index>(m.shape[0]);
      const auto cols = static_cast<Eigen::Index>(m.shape[1]);
      ConstVectorMap g(gy, cols);
      if (needs(n.in[0])) MatrixMap(grd(n.in[0]), rows, cols).noalias() += ConstVectorMap(val(n.in[1]), rows) * g.transpose();
      if (needs(n.in[1])) VectorMap(grd(n.in[1]), rows).noalias() += ConstMatrixMap(val(n.in[0]), rows, cols) * g;
      return;
    }

    case OpKind::concat:
    case OpKind::stack: {
      const double* src = gy;
      for (std::size_t i = 0; i < n.list_count; ++i) {
        const std::uint32_t part = lists_[n.list_begin + i];
        const std::size_t k = nodes_[part].size;
        if (needs(part)) {
          double* dst = grd(part);
          for (std::size_t j = 0; j < k; ++j) dst[j] += src[j];
        }
        src += k;
      }
      return;
    }

    case OpKind::slice: {
      double* dst = grd(n.in[0]) + n.iarg;
      for (std::size_t j = 0; j < n.size; ++j) dst[j] += gy[j];
      return;
    }

    case OpKind::add: {
      for (std::uint32_t src : {n.in[0], n.in[1]}) {
        if (!needs(src)) continue;
        double* dst = grd(src);
        for (std::size_t j = 0; j < n.size; ++j) dst[j] += gy[j];
      }
      return;
    }

    case OpKind::scale: {
      double* dst = grd(n.in[0]);
      for (std::size_t j = 0; j < n.size; ++j) dst[j] += n.darg * gy[j];
      return;
    }

    case OpKind::tanh: {
      double* dst = grd(n.in[0]);
      for (std::size_t j = 0; j < n.size; ++j) dst[j] += gy[j] * (1.0 - y[j] * y[j]);
      return;
    }

    case OpKind::sigmoid: {
      double* dst = grd(n.in[0]);
      for (std::size_t j = 0; j < n.size; ++j) dst[j] += gy[j] * y[j] * (1.0 - y[j]);
      return;
    }

    case OpKind::relu: {
      const double* x = val(n.in[0]);
      double* dst = grd(n.in[0]);
      for (std::size_t j = 0; j < n.size; ++j) {
        if (x[j] > 0.0) dst[j] += gy[j];
      }
      return;
    }

    case OpKind::softmax: {
      double dot = 0.0;
      for (std::size_t j = 0; j < n.size; ++j) dot += gy[j] * y[j];
      double* dst = grd(n.in[0]);
      for (std::size_t j = 0; j < n.size; ++j) dst[j] += y[j] * (gy[j] - dot);
      return;
    }

    case OpKind::log: {
      const double* x = val(n.in[0]);
      double* dst = grd(n.in[0]);
      for (std::size_t j = 0; j < n.size; ++j) {
        if (x[j] >= kLogFloor) dst[j] += gy[j] / x[j];
      }
      return;
    }

    case OpKind::sum: {
      double* dst = grd(n.in[0]);
      const std::size_t k = nodes_[n.in[0]].size;
      for (std::size_t j = 0; j < k; ++j) dst[j] += gy[0];
      return;
    }

    case OpKind::pick:
      grd(n.in[0])[n.iarg] += gy[0];
      return;

    case OpKind::embedding: {
      const std::size_t d = n.size;
      double* dst = grd(n.in[0]) + n.iarg * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += gy[j];
      return;
    }

    case OpKind::lstm_cell: {
      const std::size_t hidden = n.size / 2;
      const std::size_t in_size = nodes_[n.in[0]].size;
      const double* gates = aux_.data() + n.aux_offset;
      const double* tc = gates + 4 * hidden;
      const double* c_prev = val(n.in[2]);
      scratch_.resize(4 * hidden);
      double* dz = scratch_.data();
      const bool c_needs = needs(n.in[2]);
      double* gc_prev = c_needs ? grd(n.in[2]) : nullptr;
      for (std::size_t j = 0; j < hidden; ++j) {
        const double ig = gates[j], fg = gates[hidden + j], gg = gates[2 * hidden + j], og = gates[3 * hidden + j];
        const double gh = gy[j];
        const double dc = gy[hidden + j] + gh * og * (1.0 - tc[j] * tc[j]);
        dz[j] = dc * gg * ig * (1.0 - ig);
        dz[hidden + j] = dc * c_prev[j] * fg * (1.0 - fg);
        dz[2 * hidden + j] = dc * ig * (1.0 - gg * gg);
        dz[3 * hidden + j] = gh * tc[j] * og * (1.0 - og);
        if (c_needs) gc_prev[j] += dc * fg;
      }
      const auto H = static_cast<Eigen::Index>(hidden);
      const auto X = static_cast<Eigen::Index>(in_size);
      ConstVectorMap g(dz, 4 * H);
      ConstMatrixMap w(val(n.in[3]), 4 * H, X + H);
      if (needs(n.in[3])) {
        MatrixMap gw(grd(n.in[3]), 4 * H, X + H);
        gw.leftCols(X).noalias() += g * ConstVectorMap(val(n.in[0]), X).transpose();
        gw.rightCols(H).noalias() += g * ConstVectorMap(val(n.in[1]), H).transpose();
      }
      if (needs(n.in[4])) VectorMap(grd(n.in[4]), 4 * H) += g;
      if (needs(n.in[0])) VectorMap(grd(n.in[0]), X).noalias() += w.leftCols(X).transpose() * g;
      if (needs(n.in[1])) VectorMap(grd(n.in[1]), H).noalias() += w.rightCols(H).transpose() * g;
      return;
    }

    case OpKind::conv2d: {
      const Node& in = nodes_[n.in[0]];
      const Node& kn = nodes_[n.in[1]];
      const std::size_t channels = in.shape[0], height = in.shape[1], width = in.shape[2];
      const std::size_t filters = kn.shape[0], k = kn.shape[2], stride = n.iarg;
      const std::size_t out_h = n.shape[1], out_w = n.shape[2];
      const std::size_t patch = channels * k * k;
      const std::size_t positions = out_h * out_w;
      const auto F = static_cast<Eigen::Index>(filters);
      const auto P = static_cast<Eigen::Index>(patch);
      const auto Q = static_cast<Eigen::Index>(positions);
      ConstMatrixMap g(gy, F, Q);
      const double* cols = aux_.data() + n.aux_offset;
      if (needs(n.in[1])) MatrixMap(grd(n.in[1]), F, P).noalias() += g * ConstMatrixMap(cols, P, Q).transpose();
      if (needs(n.in[2])) VectorMap(grd(n.in[2]), F) += g.rowwise().sum();
      if (needs(n.in[0])) {
        scratch_.resize(patch * positions);
        MatrixMap gcols(scratch_.data(), P, Q);
        gcols.noalias() = ConstMatrixMap(val(n.in[1]), F, P).transpose() * g;
        double* dst = grd(n.in[0]);
        for (std::size_t ch = 0; ch < channels; ++ch) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
              const double* row = scratch_.data() + ((ch * k + ky) * k + kx) * positions;
              for (std::size_t oy = 0; oy < out_h; ++oy) {
                double* line = dst + (ch * height + oy * stride + ky) * width + kx;
                for (std::size_t ox = 0; ox < out_w; ++ox) line[ox * stride] += row[oy * out_w + ox];
              }
            }
          }
        }
      }
      return;
    }
  }
}

}  // namespace stopnav::numeric
