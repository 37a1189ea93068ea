#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string_view>
#include <utility>
#include <vector>

#include "nrl/numerics.hpp"
#include "nrl/policy_net.hpp"

namespace nrl {

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Zero-mean perturbation families. `uniform` draws from [−σ√3, σ√3] and
/// `rademacher_bimodal` from {−σ, +σ}, so all three have per-entry variance σ².
enum class NoiseFamily { gaussian, uniform, rademacher_bimodal };

std::string_view to_string(NoiseFamily family);
NoiseFamily parse_noise_family(std::string_view name);

Vector sample_noise(RandomSource& rng, std::size_t dim, double sigma, NoiseFamily family);

struct EstimatorReport {
  double cosine_similarity = 0.0;
  double relative_norm_error = 0.0;
  std::size_t samples = 0;
  std::size_t dim = 0;
  double sigma = 0.0;
  NoiseFamily family = NoiseFamily::gaussian;
};

/// Central differences (f(θ + h eᵢ) − f(θ − h eᵢ)) / 2h for every coordinate.
Vector finite_diff_gradient(const ScalarFunction& f, std::span<const double> theta, double h = 1e-6);

/// (n/K) Σᵢ εᵢ / ‖εᵢ‖² · (f(θ + εᵢ) − f(θ)), εᵢ drawn from `family` at scale σ.
Vector directional_estimate(const ScalarFunction& f, std::span<const double> theta, double sigma,
                            std::size_t samples, RandomSource& rng,
                            NoiseFamily family = NoiseFamily::gaussian);

/// Empirical mean of v vᵀ over `samples` Gaussian directions v = ε/‖ε‖ in Rⁿ.
Matrix vv_outer_statistic(std::size_t n, std::size_t samples, RandomSource& rng);

/// Compares an estimate against a reference gradient.
EstimatorReport compare_to_reference(std::span<const double> estimate,
                                     std::span<const double> reference);

/// Averages the directional estimate under `family` and compares it with the
/// central-difference gradient.
EstimatorReport nongaussian_descent_check(const ScalarFunction& f, std::span<const double> theta,
                                          double sigma, std::size_t samples, NoiseFamily family,
                                          RandomSource& rng);

/// For each pass count N, the mean over observations and output entries of
/// |averaged noisy output − clean output|.
std::vector<std::pair<std::size_t, double>> clean_pass_error_curve(
    const PolicyNetwork& net, const std::vector<Vector>& observations, double sigma,
    const std::vector<std::size_t>& pass_counts, RandomSource& rng);

/// Per-layer mean of ξ̄ ρ x̃ᵀ over `draws` noisy passes at a fixed observation
/// and action, with ρ measured against the clean pass.
std::vector<Matrix> mean_noise_update(const PolicyNetwork& net, std::span<const double> obs,
                                      std::size_t action, double sigma, std::size_t draws,
                                      RandomSource& rng);

/// Largest |analytic − numeric| / max(|analytic|, |numeric|, floor) over all
/// weights, with the numeric gradient of log π(a|s) from central differences.
/// The floor keeps entries near zero from being judged on round-off alone.
/// Returns that error together with the number of weights compared.
std::pair<double, std::size_t> grad_logpi_max_relative_error(const PolicyNetwork& net,
                                                             std::span<const double> obs,
                                                             std::size_t action, double h = 1e-6,
                                                             double floor = 1e-5);

/// Benchmark objectives for the estimator table.
struct Objective {
  std::string_view name;
  ScalarFunction f;
  Vector gradient_at_theta;
  Vector theta;
};

/// ‖θ‖² at θ = (1, 2, …, n)/n.
Objective quadratic_objective(std::size_t n);
/// Σ cᵢ θᵢ at θ = 0 with c = (1, −2, 3, …).
Objective linear_objective(std::size_t n);

/// Writes a CSV table of reports over every (n, K, σ, family) combination.
void write_estimator_table(std::ostream& out, const std::vector<std::size_t>& dims,
                           const std::vector<std::size_t>& sample_counts,
                           const std::vector<double>& sigmas,
                           const std::vector<NoiseFamily>& families, std::uint64_t seed);

}  // namespace nrl
