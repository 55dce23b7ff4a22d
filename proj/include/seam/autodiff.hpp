#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "seam/rng.hpp"
#include "seam/tensor.hpp"

namespace seam {

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct Param {
  Tensor2 value;
  Tensor2 grad;      // same shape, zero-filled
  Tensor2 velocity;  // SGD momentum buffer
};

/// Named parameter tensors with accumulated gradients. std::map keeps
/// iteration order deterministic by name, which the optimizer and the
/// checkpoint writer rely on.
class ParamStore {
 public:
  Param& add(const std::string& name, Tensor2 value) {
    Param p;
    p.grad = Tensor2::zeros(value.rows, value.cols);
    p.velocity = Tensor2::zeros(value.rows, value.cols);
    p.value = std::move(value);
    auto [it, inserted] = params_.insert_or_assign(name, std::move(p));
    (void)inserted;
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Param& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("ParamStore: no parameter " + name);
    return it->second;
  }
  const Param& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("ParamStore: no parameter " + name);
    return it->second;
  }

  Tensor2& value(const std::string& name) { return at(name).value; }
  const Tensor2& value(const std::string& name) const { return at(name).value; }

  void zero_grad() {
    for (auto& [name, p] : params_)
      std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

 private:
  std::map<std::string, Param> params_;
};

/// Uniform init in [-1/sqrt(Din), +1/sqrt(Din)], the scheme used for every
/// randomly initialized weight matrix; biases start at zero.
inline Tensor2 init_weight(int din, int dout, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(din));
  Tensor2 w(din, dout);
  for (double& v : w.data) v = rng.uniform(-bound, bound);
  return w;
}

/// Reverse-mode tape over the handful of dense ops the matching heads need.
/// Nodes are appended in evaluation order, so the backward sweep is a single
/// reverse pass. Values are computed by the same seam::num kernels the
/// inference paths use, which keeps the two paths bit-identical.
class Tape {
 public:
  /// Constant leaf (no gradient tracked beyond this node).
  int input(Tensor2 v) {
    nodes_.push_back(Node{std::move(v), {}, nullptr, nullptr});
    return last();
  }

  /// Leaf bound to a named parameter; backward accumulates into its grad.
  int param(ParamStore& store, const std::string& name) {
    Param& p = store.at(name);
    nodes_.push_back(Node{p.value, {}, nullptr, &p});
    return last();
  }

  const Tensor2& value(int id) const { return nodes_[id].value; }

  int linear(int x, int w, int b) {
    Tensor2 out = num::linear(value(x), value(w), value(b));
    return push(std::move(out), [x, w, b](Tape& t, const Tensor2& g, const Tensor2&) {
      t.accum(x, num::matmul_nt(g, t.value(w)));
      t.accum(w, num::matmul_tn(t.value(x), g));
      t.accum(b, num::colsum(g));
    });
  }

  int matmul(int a, int b) {
    Tensor2 out = num::matmul(value(a), value(b));
    return push(std::move(out), [a, b](Tape& t, const Tensor2& g, const Tensor2&) {
      t.accum(a, num::matmul_nt(g, t.value(b)));
      t.accum(b, num::matmul_tn(t.value(a), g));
    });
  }

  int matmul_nt(int a, int b) {
    Tensor2 out = num::matmul_nt(value(a), value(b));
    return push(std::move(out), [a, b](Tape& t, const Tensor2& g, const Tensor2&) {
      t.accum(a, num::matmul(g, t.value(b)));
      t.accum(b, num::matmul_tn(g, t.value(a)));
    });
  }

  int add(int a, int b) {
    Tensor2 out = num::add(value(a), value(b));
    return push(std::move(out), [a, b](Tape& t, const Tensor2& g, const Tensor2&) {
      t.accum(a, g);
      t.accum(b, g);
    });
  }

  int sub(int a, int b) {
    Tensor2 out = num::sub(value(a), value(b));
    return push(std::move(out), [a, b](Tape& t, const Tensor2& g, const Tensor2&) {
      t.accum(a, g);
      t.accum(b, num::scale(g, -1.0));
    });
  }

  int hadamard(int a, int b) {
    Tensor2 out = num::hadamard(value(a), value(b));
    return push(std::move(out), [a, b](Tape& t, const Tensor2& g, const Tensor2&) {
      t.accum(a, num::hadamard(g, t.value(b)));
      t.accum(b, num::hadamard(g, t.value(a)));
    });
  }

  int square(int x) {
    Tensor2 out = num::square(value(x));
    return push(std::move(out), [x](Tape& t, const Tensor2& g, const Tensor2&) {
      t.accum(x, num::scale(num::hadamard(g, t.value(x)), 2.0));
    });
  }

  int scale(int x, double c) {
    Tensor2 out = num::scale(value(x), c);
    return push(std::move(out), [x, c](Tape& t, const Tensor2& g, const Tensor2&) {
      t.accum(x, num::scale(g, c));
    });
  }

  int transpose(int x) {
    Tensor2 out = num::transpose(value(x));
    return push(std::move(out), [x](Tape& t, const Tensor2& g, const Tensor2&) {
      t.accum(x, num::transpose(g));
    });
  }

  int rowwise_softmax(int x) {
    Tensor2 out = num::rowwise_softmax(value(x));
    return push(std::move(out), [x](Tape& t, const Tensor2& g, const Tensor2& y) {
      // dx_ij = y_ij * (g_ij - sum_k g_ik y_ik)
      Tensor2 gx(y.rows, y.cols);
      for (int i = 0; i < y.rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < y.cols; ++j) dot += g.at(i, j) * y.at(i, j);
        for (int j = 0; j < y.cols; ++j)
          gx.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
      }
      t.accum(x, gx);
    });
  }

  int sigmoid(int x) {
    Tensor2 out = num::sigmoid(value(x));
    return push(std::move(out), [x](Tape& t, const Tensor2& g, const Tensor2& y) {
      Tensor2 gx = g;
      for (std::size_t i = 0; i < gx.data.size(); ++i)
        gx.data[i] *= y.data[i] * (1.0 - y.data[i]);
      t.accum(x, gx);
    });
  }

  int sum(int x) {
    Tensor2 out(1, 1);
    out.at(0, 0) = num::sum(value(x));
    return push(std::move(out), [x](Tape& t, const Tensor2& g, const Tensor2&) {
      const Tensor2& xv = t.value(x);
      Tensor2 gx(xv.rows, xv.cols);
      std::fill(gx.data.begin(), gx.data.end(), g.at(0, 0));
      t.accum(x, gx);
    });
  }

  static constexpr double kBceEps = 1e-7;

  /// Mean binary cross-entropy of a column of scores against fixed labels.
  /// Scores are clamped to [kBceEps, 1-kBceEps]; outside the clamp the local
  /// gradient is zero (the clamp is flat there).
  int bce(int scores, std::vector<double> labels) {
    const Tensor2& s = value(scores);
    if (s.cols != 1 || static_cast<std::size_t>(s.rows) != labels.size())
      throw ShapeError("bce: scores " + s.shape_str() + " vs " +
                       std::to_string(labels.size()) + " labels");
    const int n = s.rows;
    Tensor2 out(1, 1);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
      double p = std::clamp(s.at(i, 0), kBceEps, 1.0 - kBceEps);
      loss += -(labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p));
    }
    out.at(0, 0) = loss / n;
    return push(std::move(out),
                [scores, labels = std::move(labels), n](Tape& t, const Tensor2& g, const Tensor2&) {
                  const Tensor2& s = t.value(scores);
                  Tensor2 gx(n, 1);
                  for (int i = 0; i < n; ++i) {
                    double raw = s.at(i, 0);
                    if (raw < kBceEps || raw > 1.0 - kBceEps) {
                      gx.at(i, 0) = 0.0;
                    } else {
                      gx.at(i, 0) = g.at(0, 0) * (raw - labels[i]) / (raw * (1.0 - raw) * n);
                    }
                  }
                  t.accum(scores, gx);
                });
  }

  /// Stack 1xD rows into an NxD node.
  int stack_rows(const std::vector<int>& row_ids) {
    if (row_ids.empty()) throw ShapeError("stack_rows: empty");
    const int cols = value(row_ids[0]).cols;
    Tensor2 out(static_cast<int>(row_ids.size()), cols);
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
      const Tensor2& r = value(row_ids[i]);
      if (r.rows != 1 || r.cols != cols)
        throw ShapeError("stack_rows: row " + std::to_string(i) + " is " + r.shape_str());
      for (int j = 0; j < cols; ++j) out.at(static_cast<int>(i), j) = r.at(0, j);
    }
    return push(std::move(out), [row_ids](Tape& t, const Tensor2& g, const Tensor2&) {
      for (std::size_t i = 0; i < row_ids.size(); ++i) {
        Tensor2 gr(1, g.cols);
        for (int j = 0; j < g.cols; ++j) gr.at(0, j) = g.at(static_cast<int>(i), j);
        t.accum(row_ids[i], gr);
      }
    });
  }

  /// Reverse sweep from a scalar root; gradients of bound parameters are
  /// accumulated into their ParamStore entries.
  void backward(int root) {
    Node& r = nodes_[root];
    if (r.value.rows != 1 || r.value.cols != 1)
      throw ShapeError("backward: root must be 1x1, got " + r.value.shape_str());
    grad_ref(root) = Tensor2(1, 1, {1.0});
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.grad.empty()) continue;
      if (n.pull) n.pull(*this, n.grad, n.value);
      if (n.bound) {
        num::check_same_shape("param grad", n.bound->grad, n.grad);
        for (std::size_t k = 0; k < n.grad.data.size(); ++k)
          n.bound->grad.data[k] += n.grad.data[k];
      }
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  using Pull = std::function<void(Tape&, const Tensor2& grad_out, const Tensor2& out_value)>;

  struct Node {
    Tensor2 value;
    Tensor2 grad;  // empty until touched by backward
    Pull pull;
    Param* bound;
  };

  int last() const { return static_cast<int>(nodes_.size()) - 1; }

  int push(Tensor2 value, Pull pull) {
    nodes_.push_back(Node{std::move(value), {}, std::move(pull), nullptr});
    return last();
  }

  Tensor2& grad_ref(int id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor2::zeros(n.value.rows, n.value.cols);
    return n.grad;
  }

  void accum(int id, const Tensor2& g) {
    Tensor2& dst = grad_ref(id);
    num::check_same_shape("accum", dst, g);
    for (std::size_t k = 0; k < g.data.size(); ++k) dst.data[k] += g.data[k];
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Gradient verification and SGD
// ---------------------------------------------------------------------------

/// Builds the loss graph on the given tape and returns the scalar root id.
using LossBuilder = std::function<int(Tape&, ParamStore&)>;

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_param;
  double max_rel_err = 0.0;
  bool passed = false;
};

namespace detail {
// Components below the floor compare absolutely: central differences carry
// ~1e-11 cancellation noise at eps=1e-5, so a ratio against a near-zero
// gradient measures that noise, not the implementation.
inline double rel_err(double analytic, double numeric) {
  double denom = std::max(std::abs(analytic), std::abs(numeric));
  if (denom < 1e-6) return std::abs(analytic - numeric);
  return std::abs(analytic - numeric) / denom;
}
}  // namespace detail

/// Central finite-difference check of analytic gradients, per named tensor.
/// The loss must be finite at the evaluation point and twice differentiable
/// there (all tape ops bar the clamp interior boundary are smooth).
inline GradCheckReport grad_check(const LossBuilder& build, ParamStore& params,
                                  double eps = 1e-5, double tol = 1e-6) {
  auto eval = [&]() {
    Tape tape;
    int root = build(tape, params);
    return tape.value(root).at(0, 0);
  };

  params.zero_grad();
  {
    Tape tape;
    int root = build(tape, params);
    double loss = tape.value(root).at(0, 0);
    if (!std::isfinite(loss)) throw NumericError("grad_check: non-finite loss at base point");
    tape.backward(root);
  }

  GradCheckReport report;
  for (auto& [name, p] : params) {
    GradCheckEntry entry{name, 0.0};
    for (std::size_t i = 0; i < p.value.data.size(); ++i) {
      const double saved = p.value.data[i];
      p.value.data[i] = saved + eps;
      double up = eval();
      p.value.data[i] = saved - eps;
      double down = eval();
      p.value.data[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("grad_check: non-finite loss while perturbing " + name);
      double numeric = (up - down) / (2.0 * eps);
      entry.max_rel_err = std::max(entry.max_rel_err, detail::rel_err(p.grad.data[i], numeric));
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.per_param.push_back(std::move(entry));
  }
  report.passed = report.max_rel_err <= tol;
  params.zero_grad();
  return report;
}

/// p <- p - lr * v with v <- momentum * v + grad; gradients zeroed afterward.
inline void sgd_step(ParamStore& params, double lr, double momentum) {
  for (auto& [name, p] : params) {
    for (std::size_t i = 0; i < p.value.data.size(); ++i) {
      double g = p.grad.data[i];
      if (!std::isfinite(g)) throw NumericError("sgd_step: non-finite gradient in " + name);
      p.velocity.data[i] = momentum * p.velocity.data[i] + g;
      p.value.data[i] -= lr * p.velocity.data[i];
      p.grad.data[i] = 0.0;
    }
  }
}

}  // namespace seam
