#include "sidefield/ad/tape.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sidefield/ad/parameters.hpp"
#include "sidefield/core/error.hpp"

namespace sidefield::ad {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractViolation(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
}

constexpr double kProbClamp = 1e-12;

}  // namespace

Var Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&, const Matrix&)> backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && needs_grad;
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

bool Tape::any_grad(std::initializer_list<Var> vs) const {
  if (!record_) return false;
  for (Var v : vs)
    if (nodes_[v.id].needs_grad) return true;
  return false;
}

void Tape::check_finite(const Matrix& m, const char* op) const {
  if (!m.allFinite()) throw NumericalError(std::string("non-finite activation in ") + op);
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::parameter(Parameter& param) {
  Var v = push(param.value, true, nullptr);
  if (record_) nodes_[v.id].param = &param;
  return v;
}

Var Tape::custom(Matrix value, std::vector<int> inputs, std::function<void(Tape&, const Matrix&)> backward) {
  bool needs = false;
  for (int id : inputs) needs = needs || (record_ && nodes_[id].needs_grad);
  return push(std::move(value), needs, std::move(backward));
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.rows()) throw ContractViolation("matmul: inner dimensions differ");
  Matrix out = A * B;
  return push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.needs_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.cols()) throw ContractViolation("matmul_nt: inner dimensions differ");
  Matrix out = A * B.transpose();
  return push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * t.value(b));
    if (t.needs_grad(b)) t.accumulate(b, g.transpose() * t.value(a));
  });
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Matrix out = value(a) + value(b);
  return push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  Matrix out = value(a) - value(b);
  return push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs_grad(b)) t.accumulate(b, -g);
  });
}

Var Tape::hadamard(Var a, Var b) {
  require_same_shape(value(a), value(b), "hadamard");
  Matrix out = value(a).cwiseProduct(value(b));
  return push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

Var Tape::scale(Var a, double s) {
  Matrix out = s * value(a);
  return push(std::move(out), any_grad({a}), [a, s](Tape& t, const Matrix& g) { t.accumulate(a, s * g); });
}

Var Tape::add_row(Var a, Var row) {
  const Matrix& R = value(row);
  if (R.rows() != 1 || R.cols() != value(a).cols()) throw ContractViolation("add_row: row shape mismatch");
  Matrix out = value(a).rowwise() + R.row(0);
  return push(std::move(out), any_grad({a, row}), [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var Tape::layer_norm(Var a, Var gain, Var bias, double eps) {
  const Matrix& X = value(a);
  const Eigen::Index n = X.cols();
  if (value(gain).rows() != 1 || value(gain).cols() != n || value(bias).rows() != 1 || value(bias).cols() != n)
    throw ContractViolation("layer_norm: gain/bias shape mismatch");
  Matrix xhat(X.rows(), n);
  Eigen::VectorXd inv_std(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double mu = X.row(r).mean();
    const double var = (X.row(r).array() - mu).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (X.row(r).array() - mu) * inv_std[r];
  }
  Matrix out = (xhat.array().rowwise() * value(gain).row(0).array()).rowwise() + value(bias).row(0).array();
  check_finite(out, "layer_norm");
  return push(std::move(out), any_grad({a, gain, bias}),
              [a, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Matrix& g) {
                if (t.needs_grad(gain)) t.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
                if (t.needs_grad(bias)) t.accumulate(bias, g.colwise().sum());
                if (!t.needs_grad(a)) return;
                const Matrix dxhat = g.array().rowwise() * t.value(gain).row(0).array();
                Matrix dx(g.rows(), g.cols());
                for (Eigen::Index r = 0; r < g.rows(); ++r) {
                  const double m1 = dxhat.row(r).mean();
                  const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                  dx.row(r) = inv_std[r] * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                }
                t.accumulate(a, dx);
              });
}

Var Tape::softmax_rows(Var a) {
  const Matrix& X = value(a);
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double m = X.row(r).maxCoeff();
    out.row(r) = (X.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  check_finite(out, "softmax");
  if (softmax_observer_) softmax_observer_(out);
  return push(std::move(out), any_grad({a}), [a, self = static_cast<int>(nodes_.size())](Tape& t, const Matrix& g) {
    const Matrix& y = t.nodes_[self].value;
    const Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
    t.accumulate(a, y.cwiseProduct(g - dots.replicate(1, g.cols())));
  });
}

Var Tape::gelu(Var a) {
  const Matrix& X = value(a);
  Matrix out = X.unaryExpr([](double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); });
  check_finite(out, "gelu");
  return push(std::move(out), any_grad({a}), [a](Tape& t, const Matrix& g) {
    const Matrix d = t.value(a).unaryExpr([](double x) {
      const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
      const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      return cdf + x * pdf;
    });
    t.accumulate(a, g.cwiseProduct(d));
  });
}

Var Tape::sigmoid(Var a) {
  Matrix out = value(a).unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  check_finite(out, "sigmoid");
  return push(std::move(out), any_grad({a}), [a, self = static_cast<int>(nodes_.size())](Tape& t, const Matrix& g) {
    const Matrix& y = t.nodes_[self].value;
    t.accumulate(a, g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractViolation("concat_cols: no inputs");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool needs = false;
  std::vector<int> ids;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw ContractViolation("concat_cols: row count mismatch");
    cols += value(p).cols();
    needs = needs || (record_ && nodes_[p.id].needs_grad);
    ids.push_back(p.id);
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    out.middleCols(c, value(p).cols()) = value(p);
    c += value(p).cols();
  }
  return push(std::move(out), needs, [ids = std::move(ids)](Tape& t, const Matrix& g) {
    Eigen::Index c0 = 0;
    for (int id : ids) {
      const Eigen::Index w = t.value(Var{id}).cols();
      if (t.needs_grad(Var{id})) t.accumulate(Var{id}, g.middleCols(c0, w));
      c0 += w;
    }
  });
}

Var Tape::slice_cols(Var a, int start, int count) {
  const Matrix& X = value(a);
  if (start < 0 || count < 0 || start + count > X.cols()) throw ContractViolation("slice_cols: out of range");
  Matrix out = X.middleCols(start, count);
  return push(std::move(out), any_grad({a}), [a, start, count](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Var Tape::sparse_left(const SparseMatrix& w, Var a) {
  if (w.cols() != value(a).rows()) throw ContractViolation("sparse_left: dimension mismatch");
  Matrix out = w * value(a);
  if (!any_grad({a})) return push(std::move(out), false, nullptr);
  SparseMatrix wt = w.transpose();
  return push(std::move(out), true, [a, wt = std::move(wt)](Tape& t, const Matrix& g) { t.accumulate(a, wt * g); });
}

Var Tape::remap(Var a, int rows, int cols, std::vector<int> src) {
  const Matrix& X = value(a);
  if (src.size() != static_cast<std::size_t>(rows) * cols) throw ContractViolation("remap: index count mismatch");
  const Eigen::Index xc = X.cols();
  const Eigen::Index total = X.size();
  Matrix out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int s = src[static_cast<std::size_t>(r) * cols + c];
      if (s >= total) throw ContractViolation("remap: source index out of range");
      out(r, c) = s < 0 ? 0.0 : X(s / xc, s % xc);
    }
  return push(std::move(out), any_grad({a}), [a, rows, cols, src = std::move(src)](Tape& t, const Matrix& g) {
    const Matrix& X0 = t.value(a);
    const Eigen::Index xc0 = X0.cols();
    Matrix dx = Matrix::Zero(X0.rows(), X0.cols());
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const int s = src[static_cast<std::size_t>(r) * cols + c];
        if (s >= 0) dx(s / xc0, s % xc0) += g(r, c);
      }
    t.accumulate(a, dx);
  });
}

Var Tape::square(Var a) {
  Matrix out = value(a).array().square();
  return push(std::move(out), any_grad({a}),
              [a](Tape& t, const Matrix& g) { t.accumulate(a, 2.0 * g.cwiseProduct(t.value(a))); });
}

Var Tape::sqrt_eps(Var a, double eps) {
  Matrix out = (value(a).array() + eps).sqrt();
  check_finite(out, "sqrt");
  return push(std::move(out), any_grad({a}), [a, self = static_cast<int>(nodes_.size())](Tape& t, const Matrix& g) {
    t.accumulate(a, (0.5 * g.array() / t.nodes_[self].value.array()).matrix());
  });
}

Var Tape::sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = value(a).sum();
  return push(std::move(out), any_grad({a}), [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(t.value(a).rows(), t.value(a).cols(), g(0, 0)));
  });
}

Var Tape::mean(Var a) {
  const double n = static_cast<double>(value(a).size());
  if (n == 0) throw ContractViolation("mean: empty input");
  Matrix out(1, 1);
  out(0, 0) = value(a).sum() / n;
  return push(std::move(out), any_grad({a}), [a, n](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(t.value(a).rows(), t.value(a).cols(), g(0, 0) / n));
  });
}

Var Tape::bce_mean(Var p, const Matrix& labels) {
  const Matrix& P = value(p);
  require_same_shape(P, labels, "bce_mean");
  const double n = static_cast<double>(P.size());
  if (n == 0) throw ContractViolation("bce_mean: empty input");
  double total = 0.0;
  for (Eigen::Index i = 0; i < P.size(); ++i) {
    const double pc = std::clamp(P.data()[i], kProbClamp, 1.0 - kProbClamp);
    const double y = labels.data()[i];
    total -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
  }
  Matrix out(1, 1);
  out(0, 0) = total / n;
  check_finite(out, "bce_mean");
  return push(std::move(out), any_grad({p}), [p, labels, n](Tape& t, const Matrix& g) {
    const Matrix& P0 = t.value(p);
    Matrix d(P0.rows(), P0.cols());
    for (Eigen::Index i = 0; i < P0.size(); ++i) {
      const double x = P0.data()[i];
      const double y = labels.data()[i];
      d.data()[i] = (x < kProbClamp || x > 1.0 - kProbClamp) ? 0.0 : g(0, 0) * (x - y) / (x * (1.0 - x)) / n;
    }
    t.accumulate(p, d);
  });
}

Var Tape::l1_mean(Var a, const Matrix& target) {
  require_same_shape(value(a), target, "l1_mean");
  const double n = static_cast<double>(target.size());
  if (n == 0) throw ContractViolation("l1_mean: empty input");
  Matrix out(1, 1);
  out(0, 0) = (value(a) - target).cwiseAbs().sum() / n;
  return push(std::move(out), any_grad({a}), [a, target, n](Tape& t, const Matrix& g) {
    const Matrix diff = t.value(a) - target;
    t.accumulate(a, diff.unaryExpr([&](double d) { return d > 0 ? g(0, 0) / n : (d < 0 ? -g(0, 0) / n : 0.0); }));
  });
}

Var Tape::weighted_mse(Var a, const Matrix& target, const Matrix& weights) {
  require_same_shape(value(a), target, "weighted_mse");
  require_same_shape(target, weights, "weighted_mse");
  const double wsum = weights.sum();
  if (!(wsum > 0)) throw ContractViolation("weighted_mse: weights sum to zero");
  Matrix out(1, 1);
  out(0, 0) = weights.cwiseProduct((value(a) - target).cwiseAbs2()).sum() / wsum;
  return push(std::move(out), any_grad({a}), [a, target, weights, wsum](Tape& t, const Matrix& g) {
    t.accumulate(a, (2.0 * g(0, 0) / wsum) * weights.cwiseProduct(t.value(a) - target));
  });
}

void Tape::backward(Var out) {
  if (!record_) throw ContractViolation("backward on a non-recording tape");
  if (value(out).size() != 1) throw ContractViolation("backward: output must be a scalar");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[out.id].needs_grad) return;
  nodes_[out.id].grad = Matrix::Ones(1, 1);
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) {
      // Copy: the closure may grow other nodes' gradients but never this one.
      const Matrix g = n.grad;
      n.backward(*this, g);
    }
    if (n.param) {
      if (!n.grad.allFinite()) throw NumericalError("non-finite gradient for " + n.param->name);
      if (n.param->grad.size() == 0)
        n.param->grad = n.grad;
      else
        n.param->grad += n.grad;
    }
  }
}

}  // namespace sidefield::ad
