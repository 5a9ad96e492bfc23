#pragma once

// Dense row-major matrices of doubles with the handful of forward and
// backward kernels the graph network needs.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "siclop/error.hpp"

namespace siclop::num {

class Matrix {
 public:
  Matrix() = default;

  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) fail(Errc::kShapeMismatch, "negative matrix extent");
  }

  Matrix(int rows, int cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows < 0 || cols < 0 || data_.size() != static_cast<std::size_t>(rows) * cols) {
      fail(Errc::kShapeMismatch, "data length does not match " + std::to_string(rows) + "x" +
                                     std::to_string(cols));
    }
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ == 0 ? 0 : static_cast<int>(rows.begin()->size());
    data_.reserve(static_cast<std::size_t>(rows_) * cols_);
    for (const auto& r : rows) {
      if (static_cast<int>(r.size()) != cols_) fail(Errc::kShapeMismatch, "ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double operator()(int r, int c) const { return data_[index(r, c)]; }
  double& operator()(int r, int c) { return data_[index(r, c)]; }

  std::span<const double> row(int r) const {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }
  std::span<double> row(int r) {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t index(int r, int c) const {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return static_cast<std::size_t>(r) * cols_ + c;
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

inline std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// out_row += scale * v * B for a row vector v; zero entries of v are skipped,
// which makes products with sparse binary observations cheap.
inline void accumulate_vec_mat(std::span<const double> v, const Matrix& b, double scale,
                               std::span<double> out_row) {
  const int inner = b.rows();
  const int cols = b.cols();
  for (int k = 0; k < inner; ++k) {
    const double a = v[k] * scale;
    if (a == 0.0) continue;
    const double* brow = b.row(k).data();
    for (int j = 0; j < cols; ++j) out_row[j] += a * brow[j];
  }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(Errc::kShapeMismatch, "matmul " + shape_string(a) + " by " + shape_string(b));
  }
  Matrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) accumulate_vec_mat(a.row(i), b, 1.0, out.row(i));
  return out;
}

// a^T * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    fail(Errc::kShapeMismatch, "matmul_tn " + shape_string(a) + " by " + shape_string(b));
  }
  Matrix out(a.cols(), b.cols());
  for (int k = 0; k < a.rows(); ++k) {
    const auto arow = a.row(k);
    const double* brow = b.row(k).data();
    for (int i = 0; i < a.cols(); ++i) {
      const double s = arow[i];
      if (s == 0.0) continue;
      double* orow = out.row(i).data();
      for (int j = 0; j < b.cols(); ++j) orow[j] += s * brow[j];
    }
  }
  return out;
}

// a * b^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    fail(Errc::kShapeMismatch, "matmul_nt " + shape_string(a) + " by " + shape_string(b));
  }
  Matrix out(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i).data();
    for (int j = 0; j < b.rows(); ++j) {
      const double* brow = b.row(j).data();
      double s = 0.0;
      for (int k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      out(i, j) = s;
    }
  }
  return out;
}

struct MatmulGrads {
  Matrix da;
  Matrix db;
};

// Gradients of a scalar L w.r.t. both operands of C = A B given dL/dC.
inline MatmulGrads matmul_backward(const Matrix& a, const Matrix& b, const Matrix& dout) {
  if (dout.rows() != a.rows() || dout.cols() != b.cols()) {
    fail(Errc::kShapeMismatch, "matmul_backward upstream gradient " + shape_string(dout));
  }
  return {matmul_nt(dout, b), matmul_tn(a, dout)};
}

inline Matrix relu(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

// Subgradient 0 at the kink.
inline Matrix relu_backward(const Matrix& input, const Matrix& dout) {
  if (!input.same_shape(dout)) fail(Errc::kShapeMismatch, "relu_backward");
  Matrix out = dout;
  const auto in = input.data();
  auto g = out.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(in[i] > 0.0)) g[i] = 0.0;
  }
  return out;
}

inline void softmax_inplace(std::span<double> row, double temperature) {
  const double inv_t = 1.0 / temperature;
  double peak = row[0];
  for (double v : row) peak = std::max(peak, v);
  double total = 0.0;
  for (double& v : row) {
    v = std::exp((v - peak) * inv_t);
    total += v;
  }
  for (double& v : row) v /= total;
}

inline Matrix softmax_rows(const Matrix& m, double temperature) {
  if (!(temperature > 0.0)) fail(Errc::kInvalidArgument, "softmax temperature must be positive");
  Matrix out = m;
  if (m.cols() == 0) return out;
  for (int r = 0; r < out.rows(); ++r) softmax_inplace(out.row(r), temperature);
  return out;
}

// d/dlogits of sum_r w_r * (-targets_r . ln softmax(logits_r / T)), given the
// forward probabilities.
inline Matrix softmax_cross_entropy_backward(const Matrix& probs, const Matrix& targets,
                                             std::span<const double> row_weights,
                                             double temperature) {
  if (!probs.same_shape(targets) || static_cast<int>(row_weights.size()) != probs.rows()) {
    fail(Errc::kShapeMismatch, "softmax_cross_entropy_backward");
  }
  Matrix out(probs.rows(), probs.cols());
  for (int r = 0; r < probs.rows(); ++r) {
    const double w = row_weights[r];
    if (w == 0.0) continue;
    double mass = 0.0;
    for (double t : targets.row(r)) mass += t;
    for (int c = 0; c < probs.cols(); ++c) {
      out(r, c) = w * (probs(r, c) * mass - targets(r, c)) / temperature;
    }
  }
  return out;
}

// Adds a 1 x cols bias row to every row of m.
inline void add_bias(Matrix& m, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != m.cols()) fail(Errc::kShapeMismatch, "add_bias");
  for (int r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (int c = 0; c < m.cols(); ++c) row[c] += bias(0, c);
  }
}

inline Matrix column_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out(0, c) += m(r, c);
  }
  return out;
}

inline void axpy(double alpha, const Matrix& x, Matrix& y) {
  if (!x.same_shape(y)) fail(Errc::kShapeMismatch, "axpy " + shape_string(x) + " vs " + shape_string(y));
  const auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] += alpha * xs[i];
}

inline double squared_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s;
}

}  // namespace siclop::num
