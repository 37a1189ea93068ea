#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

#include "nrl/numerics.hpp"

namespace nrl {

/// Activations recorded by one forward pass.
///
/// For layer l (0-based), `inputs[l]` is the vector the layer consumed,
/// `pre[l]` is the argument handed to the nonlinearity (including injected
/// noise on a noisy pass) and `post[l]` is its output. The last entry of
/// `post` equals `probs`.
struct PassCache {
  std::vector<Vector> inputs;
  std::vector<Vector> pre;
  std::vector<Vector> post;
  Vector probs;
  bool noisy = false;

  std::size_t depth() const { return pre.size(); }
};

/// Per-layer injected noise ξ and its scaled copy ξ / ‖ξ‖².
struct NoiseRecord {
  std::vector<Vector> raw;
  std::vector<Vector> scaled;
  double sigma = 0.0;
};

/// Feedforward policy: LeakyReLU hidden layers, softmax readout, no biases.
class PolicyNetwork {
 public:
  PolicyNetwork(std::vector<std::size_t> layer_sizes, double alpha = kDefaultLeakySlope);
  PolicyNetwork(std::vector<std::size_t> layer_sizes, std::vector<Matrix> weights,
                double alpha = kDefaultLeakySlope);

  /// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static PolicyNetwork random(std::vector<std::size_t> layer_sizes, RandomSource& rng,
                              double alpha = kDefaultLeakySlope);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t depth() const { return weights_.size(); }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  double alpha() const { return alpha_; }

  const std::vector<Matrix>& weights() const { return weights_; }
  std::vector<Matrix>& mutable_weights() { return weights_; }
  const Matrix& weight(std::size_t layer) const { return weights_.at(layer); }
  Matrix& weight(std::size_t layer) { return weights_.at(layer); }

  bool all_finite() const;

  PassCache clean_pass(std::span<const double> obs) const;
  std::pair<PassCache, NoiseRecord> noisy_pass(std::span<const double> obs, RandomSource& rng,
                                               double sigma) const;

  /// ∂ log π(a|s) / ∂W for every layer, from a clean cache.
  std::vector<Matrix> grad_logpi(const PassCache& cache, std::size_t action) const;

  /// Mean of `samples` noisy-pass output distributions, renormalized.
  Vector averaged_noisy_output(std::span<const double> obs, RandomSource& rng, double sigma,
                               std::size_t samples) const;

  friend bool operator==(const PolicyNetwork&, const PolicyNetwork&) = default;

 private:
  void check_input(std::span<const double> obs) const;
  PassCache forward(std::span<const double> obs, NoiseRecord* noise, RandomSource* rng) const;

  std::vector<std::size_t> sizes_;
  std::vector<Matrix> weights_;
  double alpha_;
};

inline constexpr double kLogProbFloor = 1e-12;

/// Index i with probability probs[i]; consumes one uniform draw.
std::size_t sample_action(std::span<const double> probs, RandomSource& rng);
/// Index of the largest probability (first on ties).
std::size_t greedy_action(std::span<const double> probs);
/// ln(max(probs[a], 1e-12)).
double log_prob(std::span<const double> probs, std::size_t action);

/// Checkpoint format: a text header `nrl-policy <version>`, then `alpha`,
/// `layers` and one `weights` block per layer listing row-major entries
/// with round-trip precision.
inline constexpr int kCheckpointVersion = 1;
void write_checkpoint(std::ostream& out, const PolicyNetwork& net);
PolicyNetwork read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const PolicyNetwork& net);
PolicyNetwork load_checkpoint(const std::filesystem::path& path);

}  // namespace nrl
