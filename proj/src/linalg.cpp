#include "nic/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace nic {

Vec matvec(const Matrix& m, const Vec& v) {
  check(m.cols == v.size(), "matvec: shape mismatch (" +
                                std::to_string(m.rows) + "x" +
                                std::to_string(m.cols) + ") * vec[" +
                                std::to_string(v.size()) + "]");
  Vec out(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = &m.data[r * m.cols];
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * v[c];
    out[r] = acc;
  }
  return out;
}

Vec matvec_transposed(const Matrix& m, const Vec& v) {
  check(m.rows == v.size(), "matvec_transposed: shape mismatch (" +
                                std::to_string(m.rows) + "x" +
                                std::to_string(m.cols) + ")^T * vec[" +
                                std::to_string(v.size()) + "]");
  Vec out(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = &m.data[r * m.cols];
    const double s = v[r];
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += row[c] * s;
  }
  return out;
}

void add_outer(Matrix& acc, const Vec& a, const Vec& b) {
  check(acc.rows == a.size() && acc.cols == b.size(),
        "add_outer: shape mismatch");
  for (std::size_t r = 0; r < acc.rows; ++r) {
    double* row = &acc.data[r * acc.cols];
    const double s = a[r];
    for (std::size_t c = 0; c < acc.cols; ++c) row[c] += s * b[c];
  }
}

Vec sigmoid(const Vec& v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = v[i];
    // branch keeps exp() argument non-positive
    if (x >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      out[i] = e / (1.0 + e);
    }
  }
  return out;
}

Vec tanh_vec(const Vec& v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  return out;
}

Vec log_softmax(const Vec& v) {
  check(!v.empty(), "log_softmax: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  const double lse = mx + std::log(sum);
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
  return out;
}

Matrix init_uniform(std::size_t rows, std::size_t cols, double scale,
                    Rng& rng) {
  check(rows >= 1 && cols >= 1, "init_uniform: zero dimension");
  check(scale > 0.0, "init_uniform: scale must be positive");
  Matrix m(rows, cols);
  for (double& x : m.data) x = rng.next_symmetric(scale);
  return m;
}

double default_init_scale(std::size_t rows, std::size_t cols) {
  return std::sqrt(6.0 / static_cast<double>(rows + cols));
}

std::size_t sample_categorical(const Vec& p, Rng& rng) {
  check(!p.empty(), "sample_categorical: empty distribution");
  double sum = 0.0;
  for (double x : p) {
    check(x >= 0.0, "sample_categorical: negative probability");
    sum += x;
  }
  check(std::abs(sum - 1.0) <= 1e-9,
        "sample_categorical: probabilities sum to " + std::to_string(sum));
  const double u = rng.next_double() * sum;
  double cdf = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cdf += p[i];
    if (u < cdf) return i;
  }
  return p.size() - 1;
}

}  // namespace nic
