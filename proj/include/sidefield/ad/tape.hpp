#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sidefield/core/types.hpp"

namespace sidefield::ad {

struct Parameter;

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode differentiation over dense matrices. Each op appends a node
/// holding its value and a closure that pushes the node's gradient to its
/// inputs. A tape is single-threaded; use one per thread for inference.
class Tape {
 public:
  /// With record = false no backward closures are stored (inference).
  explicit Tape(bool record = true) : record_(record) {}

  Var constant(Matrix value);
  /// Leaf bound to a parameter; backward() accumulates into param.grad.
  Var parameter(Parameter& param);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient after backward(); zero-size if the node took no gradient.
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  /// a * b^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double s);
  /// Adds the 1 x n row to every row of a.
  Var add_row(Var a, Var row);
  /// Row-wise normalization followed by per-column gain and bias (1 x n).
  Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);
  Var softmax_rows(Var a);
  /// x * Phi(x) with the exact normal CDF.
  Var gelu(Var a);
  Var sigmoid(Var a);
  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, int start, int count);
  /// W * a for a constant sparse W.
  Var sparse_left(const SparseMatrix& w, Var a);
  /// out(r, c) = a.flat[src[r * cols + c]] with a.flat row-major; -1 gives 0.
  Var remap(Var a, int rows, int cols, std::vector<int> src);
  Var square(Var a);
  /// sqrt(a + eps) elementwise.
  Var sqrt_eps(Var a, double eps);
  Var sum(Var a);
  Var mean(Var a);
  /// Mean binary cross-entropy of probabilities p against labels; p is
  /// clamped to [1e-12, 1 - 1e-12] inside the logarithms.
  Var bce_mean(Var p, const Matrix& labels);
  /// Mean absolute difference over all entries.
  Var l1_mean(Var a, const Matrix& target);
  /// Sum of w .* (a - target)^2 divided by the sum of w (mean over w > 0).
  Var weighted_mse(Var a, const Matrix& target, const Matrix& weights);

  /// Escape hatch for ops defined elsewhere: the closure receives the output
  /// gradient and must accumulate into the inputs via accumulate().
  Var custom(Matrix value, std::vector<int> inputs, std::function<void(Tape&, const Matrix& grad)> backward);
  void accumulate(Var v, const Matrix& g);
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  /// Observer called with every softmax output (for invariant checks).
  void set_softmax_observer(std::function<void(const Matrix&)> obs) { softmax_observer_ = std::move(obs); }

  /// Seeds d(out)/d(out) = 1 for a 1 x 1 output and runs the tape backwards.
  void backward(Var out);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Parameter* param = nullptr;
    std::function<void(Tape&, const Matrix&)> backward;
  };

  Var push(Matrix value, bool needs_grad, std::function<void(Tape&, const Matrix&)> backward);
  bool any_grad(std::initializer_list<Var> vs) const;
  void check_finite(const Matrix& m, const char* op) const;

  bool record_;
  std::vector<Node> nodes_;
  std::function<void(const Matrix&)> softmax_observer_;
};

}  // namespace sidefield::ad
