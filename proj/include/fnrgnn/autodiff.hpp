#pragma once

// Tape-based reverse-mode differentiation over dense Tensors.
//
// Every operation appends one record holding its forward value and a backward
// rule. Records are appended in evaluation order, so walking the tape from the
// back visits each record after all of its consumers. A tape is
// single-threaded; separate tapes are independent.

#include "fnrgnn/tensor.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace fnr::ad {

class Tape;

/// Handle to one record on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

class Tape {
 public:
  // Receives the gradient flowing into the record and accumulates into inputs.
  using BackwardFn = std::function<void(Tape&, const Tensor& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Trainable input; keeps its gradient after backward().
  Var leaf(Tensor value);
  // Input that never receives a gradient.
  Var constant(Tensor value);

  // Appends an operation result. `backward` is dropped when no input needs a
  // gradient. Throws std::domain_error if `value` has non-finite entries.
  Var record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  // Zero tensor of the value's shape when no gradient reached `v`.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;

  // Adds `g` to the gradient of `v`; no-op when `v` does not require one.
  void accumulate(Var v, const Tensor& g);
  // In-place target for large accumulations; zero-filled on first use.
  // Only valid when requires_grad(v).
  Tensor& grad_buffer(Var v);

  // Runs the backward pass from a 1 x 1 loss. Gradients of previous calls are
  // discarded first; gradients of non-leaf records are released afterwards.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  mutable Tensor zero_scratch_;
};

// Elementwise, same shape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var scale(Var a, double factor);
Var add_constant(Var a, double c);
// x (n x c) + bias (1 x c) on every row.
Var add_row_bias(Var x, Var bias);
// x + s for a 1 x 1 s.
Var add_scalar(Var x, Var s);

Var matmul(Var a, Var b);
// adjacency * x. The matrix must outlive the tape.
Var spmm(const CsrMatrix& adjacency, Var x);

// Derivative at 0 is taken as 0.
Var relu(Var x);
// Derivative at 0 is taken as 0.
Var abs(Var x);
Var square(Var x);
Var exp(Var x);

Var gather_rows(Var x, std::span<const std::size_t> rows);

Var sum(Var x);
Var mean(Var x);

// D(i, j) = ||a_i - b_j||^2 over rows of a (m x h) and b (p x h).
Var pairwise_sq_dist(Var a, Var b);
// S(i, j) = u_i + v_j for column vectors u (m x 1), v (p x 1).
Var outer_sum(Var u, Var v);

enum class Axis { rows, cols };

// Entropic soft-minimum used by log-domain Sinkhorn updates.
//   rows: out_i = -eps * log sum_j w_j exp((pot_j - C_ij) / eps)   (m x 1, pot p x 1)
//   cols: out_j = -eps * log sum_i w_i exp((pot_i - C_ij) / eps)   (p x 1, pot m x 1)
// Evaluated with a min-shift so a single-term sum returns C - pot exactly.
Var softmin(Var cost, Var potential, std::span<const double> log_weights, double eps, Axis axis);

}  // namespace fnr::ad
