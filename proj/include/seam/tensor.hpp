#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace seam {

/// Thrown when operand shapes are incompatible; the message names the
/// operation and both shapes.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// Dense row-major matrix of doubles. Training runs in 64-bit throughout;
/// checkpoints narrow to 32-bit on disk.
struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  Tensor2(int r, int c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != static_cast<std::size_t>(r) * c)
      throw ShapeError("Tensor2: data length " + std::to_string(data.size()) +
                       " does not match " + std::to_string(r) + "x" + std::to_string(c));
  }

  static Tensor2 zeros(int r, int c) { return Tensor2(r, c); }

  static Tensor2 identity(int n) {
    Tensor2 t(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
  }

  static Tensor2 row(const std::vector<double>& v) {
    return Tensor2(1, static_cast<int>(v.size()), v);
  }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  bool empty() const { return rows == 0 || cols == 0; }
  std::size_t size() const { return data.size(); }

  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

namespace num {

inline void check_same_shape(const char* op, const Tensor2& a, const Tensor2& b) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
}

inline Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: " + a.shape_str() + " vs " + b.shape_str());
  Tensor2 out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<std::size_t>(i) * a.cols];
    double* orow = &out.data[static_cast<std::size_t>(i) * out.cols];
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &b.data[static_cast<std::size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

/// a * b^T without materializing the transpose.
inline Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.cols)
    throw ShapeError("matmul_nt: " + a.shape_str() + " vs " + b.shape_str());
  Tensor2 out(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<std::size_t>(i) * a.cols];
    for (int j = 0; j < b.rows; ++j) {
      const double* brow = &b.data[static_cast<std::size_t>(j) * b.cols];
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
      out.at(i, j) = s;
    }
  }
  return out;
}

/// a^T * b.
inline Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows != b.rows)
    throw ShapeError("matmul_tn: " + a.shape_str() + " vs " + b.shape_str());
  Tensor2 out(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k) {
    const double* arow = &a.data[static_cast<std::size_t>(k) * a.cols];
    const double* brow = &b.data[static_cast<std::size_t>(k) * b.cols];
    for (int i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* orow = &out.data[static_cast<std::size_t>(i) * out.cols];
      for (int j = 0; j < b.cols; ++j) orow[j] += aki * brow[j];
    }
  }
  return out;
}

inline Tensor2 transpose(const Tensor2& a) {
  Tensor2 out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

inline Tensor2 add(const Tensor2& a, const Tensor2& b) {
  check_same_shape("add", a, b);
  Tensor2 out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

inline Tensor2 sub(const Tensor2& a, const Tensor2& b) {
  check_same_shape("sub", a, b);
  Tensor2 out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

inline Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
  check_same_shape("hadamard", a, b);
  Tensor2 out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

inline Tensor2 square(const Tensor2& a) {
  Tensor2 out = a;
  for (double& v : out.data) v *= v;
  return out;
}

inline Tensor2 scale(const Tensor2& a, double c) {
  Tensor2 out = a;
  for (double& v : out.data) v *= c;
  return out;
}

/// x (N x D) plus a broadcast row vector b (1 x D).
inline Tensor2 add_rowvec(const Tensor2& x, const Tensor2& b) {
  if (b.rows != 1 || b.cols != x.cols)
    throw ShapeError("add_rowvec: " + x.shape_str() + " vs " + b.shape_str());
  Tensor2 out = x;
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) out.at(i, j) += b.at(0, j);
  return out;
}

/// x (N x Din) * W (Din x Dout) + b (1 x Dout).
inline Tensor2 linear(const Tensor2& x, const Tensor2& w, const Tensor2& b) {
  if (x.cols != w.rows)
    throw ShapeError("linear: input " + x.shape_str() + " vs weight " + w.shape_str());
  return add_rowvec(matmul(x, w), b);
}

inline Tensor2 rowwise_softmax(const Tensor2& x) {
  Tensor2 out(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i) {
    double m = x.at(i, 0);
    for (int j = 1; j < x.cols; ++j) m = std::max(m, x.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < x.cols; ++j) {
      double e = std::exp(x.at(i, j) - m);
      out.at(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < x.cols; ++j) out.at(i, j) /= sum;
  }
  return out;
}

inline Tensor2 sigmoid(const Tensor2& x) {
  Tensor2 out = x;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

inline double sum(const Tensor2& x) {
  double s = 0.0;
  for (double v : x.data) s += v;
  return s;
}

inline Tensor2 colsum(const Tensor2& x) {
  Tensor2 out(1, x.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) out.at(0, j) += x.at(i, j);
  return out;
}

/// Column-wise mean -> 1 x D. Summation runs in row order (canonical).
inline Tensor2 mean_rows(const Tensor2& x) {
  Tensor2 out = colsum(x);
  for (double& v : out.data) v /= x.rows;
  return out;
}

}  // namespace num
}  // namespace seam
