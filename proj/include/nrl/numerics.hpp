#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nrl {

/// Raised when operand shapes do not line up. This is a programming error,
/// kept separate from NumericError so callers can tell the two apart.
class ShapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when a computation produces or is handed a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix identity(std::size_t n);

/// m * v, accumulated left to right along each row.
Vector matvec(const Matrix& m, std::span<const double> v);
/// mᵀ * v.
Vector matvec_transposed(const Matrix& m, std::span<const double> v);
/// u vᵀ.
Matrix outer(std::span<const double> u, std::span<const double> v);
/// accum += scale * a
void axpy(double scale, const Matrix& a, Matrix& accum);
void axpy(double scale, std::span<const double> a, std::span<double> accum);
/// accum += scale * u vᵀ without materializing the outer product.
void add_outer(double scale, std::span<const double> u, std::span<const double> v, Matrix& accum);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> v);
double norm(std::span<const double> v);
/// Cosine of the angle between a and b; 0 when either is the zero vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> v);

Vector softmax(std::span<const double> v);
Vector leaky_relu(std::span<const double> v, double alpha);
double leaky_relu_derivative(double h, double alpha);

inline constexpr double kDefaultLeakySlope = 0.01;

/// Deterministic pseudo-random source.
///
/// Streams come from xoshiro256** seeded through SplitMix64, so a given seed
/// produces the same bits on every platform. Uniforms use the top 53 bits of
/// each output. Gaussians use the Box–Muller transform; each transform makes
/// two variates and the second is held for the next call, so one normal draw
/// costs half a transform on average. `split(stream)` derives an independent
/// child whose state is a SplitMix64 hash of (seed, stream).
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Standard normal.
  double normal();

  RandomSource split(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// dim i.i.d. draws from N(0, sigma²).
Vector gaussian_vector(RandomSource& rng, std::size_t dim, double sigma);

}  // namespace nrl
