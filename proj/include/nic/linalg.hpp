#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nic {

using Vec = std::vector<double>;

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {
    check(r >= 1 && c >= 1, "Matrix: dimensions must be >= 1");
  }

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

// splitmix64. Fixed algorithm so that a seed reproduces the same stream
// on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform in [-s, +s]
  double next_symmetric(double s) { return (2.0 * next_double() - 1.0) * s; }

 private:
  std::uint64_t state_;
};

Vec matvec(const Matrix& m, const Vec& v);
// M^T * v, without forming the transpose.
Vec matvec_transposed(const Matrix& m, const Vec& v);
// acc += a * b^T
void add_outer(Matrix& acc, const Vec& a, const Vec& b);

Vec sigmoid(const Vec& v);
Vec tanh_vec(const Vec& v);
Vec log_softmax(const Vec& v);

Matrix init_uniform(std::size_t rows, std::size_t cols, double scale, Rng& rng);
// Xavier-style default: sqrt(6 / (rows + cols)).
double default_init_scale(std::size_t rows, std::size_t cols);

// Inverse-CDF draw from a probability vector (entries >= 0, sum ~ 1).
std::size_t sample_categorical(const Vec& p, Rng& rng);

}  // namespace nic
