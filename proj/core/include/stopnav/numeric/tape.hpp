#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <span>
#include <string_view>
#include <vector>

#include "stopnav/numeric/array.hpp"
#include "stopnav/numeric/param_store.hpp"

namespace stopnav::numeric {

// Cache-line aligned storage: vectorized kernels then see the same alignment on every run,
// which keeps floating-point reductions bit-identical across processes and allocations.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

/// Handle to a node recorded on a Tape.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const noexcept { return id != UINT32_MAX; }
};

/// The closed set of differentiable operations. Everything the model needs is
/// composed from these; each has a hand-written adjoint in tape.cpp.
enum class OpKind : std::uint8_t {
  constant,
  parameter,
  affine,             // W x + b
  matvec,             // M x, both operands recorded
  matvec_transposed,  // M^T x
  concat,
  slice,
  stack,  // n vectors of length d -> [n, d]
  add,
  scale,  // constant factor
  tanh,
  sigmoid,
  relu,
  softmax,
  log,  // log(max(x, eps)), clamps are counted
  sum,
  pick,       // single element -> [1]
  embedding,  // row lookup in a [rows, d] table
  lstm_cell,  // fused LSTM step -> [h', c']
  conv2d,     // valid convolution, square kernel, [C,H,W] -> [F,H',W']
};

std::string_view to_string(OpKind op) noexcept;

/// Records a computation over dense double arrays and evaluates it eagerly;
/// backward() then propagates adjoints from a scalar output.
///
/// Parameter leaves read directly from the bound ParamStore, which must stay
/// unchanged while the tape is alive. Spans returned by value()/grad() are
/// invalidated by the next recorded op.
class Tape {
 public:
  static constexpr double kLogFloor = 1e-12;

  explicit Tape(const ParamStore& params);

  /// Drops every node but keeps allocated capacity.
  void clear();

  Var constant(const Array& value);
  Var constant(std::span<const double> values, Shape shape);
  Var param(std::string_view name);
  Var param(std::size_t index);

  Var affine(Var weight, Var x, Var bias);
  Var affine(Var weight, Var x);
  Var matvec(Var matrix, Var x);
  Var matvec_transposed(Var matrix, Var x);
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }
  Var slice(Var v, std::size_t offset, std::size_t length);
  Var stack(std::span<const Var> rows);
  Var add(Var a, Var b);
  Var scale(Var a, double factor);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var softmax(Var a);
  Var log(Var a);
  Var sum(Var a);
  Var pick(Var a, std::size_t index);
  Var embedding(Var table, std::size_t row);
  Var lstm_cell(Var x, Var h, Var c, Var weight, Var bias);
  Var conv2d(Var input, Var kernel, Var bias, std::size_t stride);

  const Shape& shape(Var v) const;
  std::size_t size(Var v) const;
  std::span<const double> value(Var v) const;
  double scalar(Var v) const;
  Array to_array(Var v) const;
  OpKind op(Var v) const;
  bool requires_grad(Var v) const;

  /// Reverse sweep from `loss`, which must hold exactly one element.
  void backward(Var loss);
  std::span<const double> grad(Var v) const;

  /// Gradient of every parameter in the bound store; parameters the loss does
  /// not reach get zero arrays.
  Gradients gradients() const;
  /// Gradient of parameter `index`, or an empty span if it was never used.
  std::span<const double> param_grad(std::size_t index) const;

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t log_clamp_count() const noexcept { return log_clamps_; }
  /// Hash of the sign pattern of every relu input; finite-difference checks
  /// use it to detect perturbations that cross a kink.
  std::uint64_t relu_pattern_hash() const;

  const ParamStore& params() const noexcept { return *params_; }

 private:
  struct Node {
    OpKind op;
    bool needs_grad;
    Shape shape;
    std::size_t offset;  // into values_/grads_
    std::size_t size;
    std::array<std::uint32_t, 5> in{};
    std::size_t list_begin = 0;  // into lists_ (concat/stack)
    std::size_t list_count = 0;
    std::size_t aux_offset = 0;  // into aux_
    std::size_t iarg = 0;
    double darg = 0.0;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  std::size_t alloc_values(std::size_t n);
  std::size_t alloc_aux(std::size_t n);
  double* val(std::uint32_t id);
  const double* val(std::uint32_t id) const;
  double* grd(std::uint32_t id) { return grads_.data() + nodes_[id].offset; }
  bool needs(std::uint32_t id) const { return nodes_[id].needs_grad; }
  void backward_node(std::uint32_t id);

  const ParamStore* params_;
  std::vector<Node> nodes_;
  AlignedBuffer values_;
  AlignedBuffer grads_;
  AlignedBuffer aux_;
  std::vector<std::uint32_t> lists_;
  std::vector<std::uint32_t> param_nodes_;  // param index -> node id (UINT32_MAX if unused)
  AlignedBuffer scratch_;
  std::size_t log_clamps_ = 0;
  bool has_grads_ = false;
};

}  // namespace stopnav::numeric
