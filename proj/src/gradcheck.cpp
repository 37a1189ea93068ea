#include "nrl/gradcheck.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace nrl {

std::string_view to_string(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::uniform: return "uniform";
    case NoiseFamily::rademacher_bimodal: return "rademacher_bimodal";
  }
  return "?";
}

NoiseFamily parse_noise_family(std::string_view name) {
  if (name == "gaussian") return NoiseFamily::gaussian;
  if (name == "uniform") return NoiseFamily::uniform;
  if (name == "rademacher_bimodal" || name == "rademacher" || name == "bimodal") {
    return NoiseFamily::rademacher_bimodal;
  }
  throw std::invalid_argument("unknown noise family '" + std::string(name) + "'");
}

Vector sample_noise(RandomSource& rng, std::size_t dim, double sigma, NoiseFamily family) {
  switch (family) {
    case NoiseFamily::gaussian: return gaussian_vector(rng, dim, sigma);
    case NoiseFamily::uniform: {
      const double half_width = sigma * std::sqrt(3.0);
      Vector v(dim);
      for (double& x : v) x = half_width * (2.0 * rng.uniform() - 1.0);
      return v;
    }
    case NoiseFamily::rademacher_bimodal: {
      Vector v(dim);
      for (double& x : v) x = (rng.next_u64() >> 63) ? sigma : -sigma;
      return v;
    }
  }
  throw std::logic_error("sample_noise: unhandled family");
}

Vector finite_diff_gradient(const ScalarFunction& f, std::span<const double> theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_gradient: step must be positive");
  Vector point(theta.begin(), theta.end());
  Vector grad(theta.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double original = point[i];
    point[i] = original + h;
    const double up = f(point);
    point[i] = original - h;
    const double down = f(point);
    point[i] = original;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_gradient: non-finite function value at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

Vector directional_estimate(const ScalarFunction& f, std::span<const double> theta, double sigma,
                            std::size_t samples, RandomSource& rng, NoiseFamily family) {
  if (samples == 0) throw std::invalid_argument("directional_estimate: need at least one sample");
  if (!(sigma > 0.0)) throw std::invalid_argument("directional_estimate: sigma must be positive");
  const std::size_t n = theta.size();
  const double base = f(theta);
  if (!std::isfinite(base)) throw NumericError("directional_estimate: non-finite f(theta)");

  Vector estimate(n, 0.0);
  Vector point(n);
  for (std::size_t k = 0; k < samples; ++k) {
    const Vector eps = sample_noise(rng, n, sigma, family);
    for (std::size_t i = 0; i < n; ++i) point[i] = theta[i] + eps[i];
    const double value = f(point);
    if (!std::isfinite(value)) throw NumericError("directional_estimate: non-finite f(theta + eps)");
    const double sq = squared_norm(eps);
    if (sq == 0.0) continue;
    axpy((value - base) / sq, eps, estimate);
  }
  const double scale = static_cast<double>(n) / static_cast<double>(samples);
  for (double& x : estimate) x *= scale;
  return estimate;
}

Matrix vv_outer_statistic(std::size_t n, std::size_t samples, RandomSource& rng) {
  if (n == 0 || samples == 0) throw std::invalid_argument("vv_outer_statistic: n and N must be positive");
  Matrix total(n, n);
  for (std::size_t k = 0; k < samples; ++k) {
    Vector v = gaussian_vector(rng, n, 1.0);
    const double len = norm(v);
    if (len == 0.0) {
      --k;
      continue;
    }
    for (double& x : v) x /= len;
    add_outer(1.0, v, v, total);
  }
  for (double& x : total.data()) x /= static_cast<double>(samples);
  return total;
}

EstimatorReport compare_to_reference(std::span<const double> estimate,
                                     std::span<const double> reference) {
  if (!all_finite(estimate) || !all_finite(reference)) {
    throw NumericError("compare_to_reference: non-finite input");
  }
  EstimatorReport report;
  report.dim = estimate.size();
  report.cosine_similarity = cosine_similarity(estimate, reference);
  Vector diff(estimate.begin(), estimate.end());
  axpy(-1.0, reference, diff);
  const double ref_norm = norm(reference);
  report.relative_norm_error = ref_norm > 0.0 ? norm(diff) / ref_norm : norm(diff);
  return report;
}

EstimatorReport nongaussian_descent_check(const ScalarFunction& f, std::span<const double> theta,
                                          double sigma, std::size_t samples, NoiseFamily family,
                                          RandomSource& rng) {
  const Vector estimate = directional_estimate(f, theta, sigma, samples, rng, family);
  const Vector reference = finite_diff_gradient(f, theta);
  EstimatorReport report = compare_to_reference(estimate, reference);
  report.samples = samples;
  report.sigma = sigma;
  report.family = family;
  return report;
}

std::vector<std::pair<std::size_t, double>> clean_pass_error_curve(
    const PolicyNetwork& net, const std::vector<Vector>& observations, double sigma,
    const std::vector<std::size_t>& pass_counts, RandomSource& rng) {
  if (observations.empty()) throw std::invalid_argument("clean_pass_error_curve: no observations");
  std::vector<Vector> clean;
  clean.reserve(observations.size());
  for (const auto& obs : observations) clean.push_back(net.clean_pass(obs).probs);

  std::vector<std::pair<std::size_t, double>> curve;
  for (std::size_t passes : pass_counts) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < observations.size(); ++i) {
      const Vector approx = net.averaged_noisy_output(observations[i], rng, sigma, passes);
      for (std::size_t j = 0; j < approx.size(); ++j) total += std::abs(approx[j] - clean[i][j]);
      count += approx.size();
    }
    curve.emplace_back(passes, total / static_cast<double>(count));
  }
  return curve;
}

std::vector<Matrix> mean_noise_update(const PolicyNetwork& net, std::span<const double> obs,
                                      std::size_t action, double sigma, std::size_t draws,
                                      RandomSource& rng) {
  if (draws == 0) throw std::invalid_argument("mean_noise_update: need at least one draw");
  const double clean_logp = log_prob(net.clean_pass(obs).probs, action);
  std::vector<Matrix> mean;
  for (const auto& w : net.weights()) mean.emplace_back(w.rows(), w.cols());
  for (std::size_t k = 0; k < draws; ++k) {
    auto [cache, noise] = net.noisy_pass(obs, rng, sigma);
    const double rho = log_prob(cache.probs, action) - clean_logp;
    for (std::size_t l = 0; l < net.depth(); ++l) {
      add_outer(rho / static_cast<double>(draws), noise.scaled[l], cache.inputs[l], mean[l]);
    }
  }
  return mean;
}

std::pair<double, std::size_t> grad_logpi_max_relative_error(const PolicyNetwork& net,
                                                             std::span<const double> obs,
                                                             std::size_t action, double h,
                                                             double floor) {
  const auto analytic = net.grad_logpi(net.clean_pass(obs), action);
  PolicyNetwork probe = net;
  double worst = 0.0;
  std::size_t compared = 0;
  for (std::size_t l = 0; l < probe.depth(); ++l) {
    auto& weights = probe.weight(l).data();
    const auto& grad = analytic[l].data();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const double original = weights[i];
      weights[i] = original + h;
      const double up = log_prob(probe.clean_pass(obs).probs, action);
      weights[i] = original - h;
      const double down = log_prob(probe.clean_pass(obs).probs, action);
      weights[i] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(grad[i]), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(grad[i] - numeric) / denom);
      ++compared;
    }
  }
  return {worst, compared};
}

Objective quadratic_objective(std::size_t n) {
  Objective obj;
  obj.name = "quadratic";
  obj.f = [](std::span<const double> t) { return squared_norm(t); };
  obj.theta.resize(n);
  obj.gradient_at_theta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    obj.theta[i] = static_cast<double>(i + 1) / static_cast<double>(n);
    obj.gradient_at_theta[i] = 2.0 * obj.theta[i];
  }
  return obj;
}

Objective linear_objective(std::size_t n) {
  Vector c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = (i % 2 == 0 ? 1.0 : -1.0) * static_cast<double>(i + 1);
  Objective obj;
  obj.name = "linear";
  obj.f = [c](std::span<const double> t) { return dot(c, t); };
  obj.theta.assign(n, 0.0);
  obj.gradient_at_theta = c;
  return obj;
}

void write_estimator_table(std::ostream& out, const std::vector<std::size_t>& dims,
                           const std::vector<std::size_t>& sample_counts,
                           const std::vector<double>& sigmas,
                           const std::vector<NoiseFamily>& families, std::uint64_t seed) {
  out << "objective,n,K,sigma,family,cosine_similarity,relative_norm_error\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  RandomSource root(seed);
  std::uint64_t stream = 0;
  for (std::size_t n : dims) {
    for (const Objective& obj : {quadratic_objective(n), linear_objective(n)}) {
      for (std::size_t k : sample_counts) {
        for (double sigma : sigmas) {
          for (NoiseFamily family : families) {
            RandomSource rng = root.split(stream++);
            const Vector est = directional_estimate(obj.f, obj.theta, sigma, k, rng, family);
            const EstimatorReport r = compare_to_reference(est, obj.gradient_at_theta);
            out << obj.name << ',' << n << ',' << k << ',' << sigma << ',' << to_string(family)
                << ',' << r.cosine_similarity << ',' << r.relative_norm_error << '\n';
          }
        }
      }
    }
  }
}

}  // namespace nrl
