#include "nrl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nrl {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Matrix: data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const { return nrl::all_finite(data_); }

Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vector matvec(const Matrix& m, std::span<const double> v) {
  require_same_length(m.cols(), v.size(), "matvec");
  Vector out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * v[c];
    out[r] = acc;
  }
  return out;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> v) {
  require_same_length(m.rows(), v.size(), "matvec_transposed");
  Vector out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double s = v[r];
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c] * s;
  }
  return out;
}

Matrix outer(std::span<const double> u, std::span<const double> v) {
  Matrix m(u.size(), v.size());
  add_outer(1.0, u, v, m);
  return m;
}

void axpy(double scale, const Matrix& a, Matrix& accum) {
  if (!a.same_shape(accum)) {
    throw ShapeError("axpy: shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(accum.rows()) + "x" +
                     std::to_string(accum.cols()));
  }
  axpy(scale, a.data(), accum.data());
}

void axpy(double scale, std::span<const double> a, std::span<double> accum) {
  require_same_length(a.size(), accum.size(), "axpy");
  for (std::size_t i = 0; i < a.size(); ++i) accum[i] += scale * a[i];
}

void add_outer(double scale, std::span<const double> u, std::span<const double> v,
               Matrix& accum) {
  if (accum.rows() != u.size() || accum.cols() != v.size()) {
    throw ShapeError("add_outer: accumulator is " + std::to_string(accum.rows()) + "x" +
                     std::to_string(accum.cols()) + ", outer product is " +
                     std::to_string(u.size()) + "x" + std::to_string(v.size()));
  }
  for (std::size_t r = 0; r < u.size(); ++r) {
    const double s = scale * u[r];
    if (s == 0.0) continue;
    auto row = accum.row(r);
    for (std::size_t c = 0; c < v.size(); ++c) row[c] += s * v[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(std::span<const double> v) { return dot(v, v); }

double norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Vector softmax(std::span<const double> v) {
  if (v.empty()) throw ShapeError("softmax: empty input");
  const double top = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - top);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

Vector leaky_relu(std::span<const double> v, double alpha) {
  Vector out(v.begin(), v.end());
  for (double& x : out) {
    if (x < 0.0) x *= alpha;
  }
  return out;
}

double leaky_relu_derivative(double h, double alpha) { return h > 0.0 ? 1.0 : alpha; }

RandomSource::RandomSource(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : state_) s = splitmix64(x);
}

std::uint64_t RandomSource::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RandomSource::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RandomSource::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] keeps the log finite.
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

RandomSource RandomSource::split(std::uint64_t stream) const {
  std::uint64_t x = seed_ ^ 0xD1B54A32D192ED03ULL;
  std::uint64_t mixed = splitmix64(x);
  std::uint64_t y = stream + 0x8CB92BA72F3D8DD7ULL;
  mixed ^= splitmix64(y);
  return RandomSource(mixed);
}

Vector gaussian_vector(RandomSource& rng, std::size_t dim, double sigma) {
  if (dim == 0) throw ShapeError("gaussian_vector: dim must be at least 1");
  Vector out(dim);
  for (double& x : out) x = sigma * rng.normal();
  return out;
}

}  // namespace nrl
