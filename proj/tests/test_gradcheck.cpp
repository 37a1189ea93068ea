#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "nrl/gradcheck.hpp"

using namespace nrl;

TEST_CASE("finite_diff_gradient on a known function") {
  // f(x, y) = x² y + sin y, ∇f = (2xy, x² + cos y)
  const ScalarFunction f = [](std::span<const double> t) { return t[0] * t[0] * t[1] + std::sin(t[1]); };
  const Vector g = finite_diff_gradient(f, Vector{1.5, -0.7});
  CHECK(g[0] == doctest::Approx(2 * 1.5 * -0.7).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(1.5 * 1.5 + std::cos(-0.7)).epsilon(1e-8));
  CHECK_THROWS(finite_diff_gradient(f, Vector{1.0, 1.0}, 0.0));
  const ScalarFunction bad = [](std::span<const double> t) { return std::log(t[0]); };
  CHECK_THROWS_AS(finite_diff_gradient(bad, Vector{0.0}), NumericError);
}

TEST_CASE("noise families have the requested scale") {
  RandomSource rng(3);
  const double sigma = 0.2;
  for (NoiseFamily family : {NoiseFamily::gaussian, NoiseFamily::uniform, NoiseFamily::rademacher_bimodal}) {
    const Vector v = sample_noise(rng, 200000, sigma, family);
    double mean = 0.0;
    double sq = 0.0;
    for (double x : v) {
      mean += x;
      sq += x * x;
    }
    mean /= static_cast<double>(v.size());
    sq /= static_cast<double>(v.size());
    CHECK(std::abs(mean) < 0.003);
    CHECK(sq == doctest::Approx(sigma * sigma).epsilon(0.02));
  }
  for (double x : sample_noise(rng, 1000, sigma, NoiseFamily::rademacher_bimodal)) {
    CHECK(std::abs(x) == sigma);
  }
  for (double x : sample_noise(rng, 1000, sigma, NoiseFamily::uniform)) {
    CHECK(std::abs(x) <= sigma * std::sqrt(3.0));
  }
}

TEST_CASE("noise family names round trip") {
  for (NoiseFamily family : {NoiseFamily::gaussian, NoiseFamily::uniform, NoiseFamily::rademacher_bimodal}) {
    CHECK(parse_noise_family(to_string(family)) == family);
  }
  CHECK(parse_noise_family("bimodal") == NoiseFamily::rademacher_bimodal);
  CHECK_THROWS(parse_noise_family("cauchy"));
}

TEST_CASE("vv outer statistic approaches I/n") {
  RandomSource rng(1);
  const std::size_t n = 10;
  const Matrix m = vv_outer_statistic(n, 200000, rng);
  double trace = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    trace += m(i, i);
    for (std::size_t j = 0; j < n; ++j) {
      worst = std::max(worst, std::abs(m(i, j) - (i == j ? 1.0 / n : 0.0)));
    }
  }
  CHECK(std::abs(trace - 1.0) < 1e-12);
  CHECK(worst < 3e-3);
}

TEST_CASE("directional estimate of a quadratic") {
  RandomSource rng(2);
  const Objective obj = quadratic_objective(10);
  const Vector est = directional_estimate(obj.f, obj.theta, 1e-4, 10000, rng);
  const EstimatorReport r = compare_to_reference(est, obj.gradient_at_theta);
  CHECK(r.cosine_similarity > 0.95);
  CHECK(r.relative_norm_error < 0.10);
}

TEST_CASE("directional estimate of a linear function") {
  RandomSource rng(5);
  const Objective obj = linear_objective(8);
  const Vector est = directional_estimate(obj.f, obj.theta, 1e-3, 10000, rng);
  const EstimatorReport r = compare_to_reference(est, obj.gradient_at_theta);
  CHECK(r.cosine_similarity > 0.95);
  CHECK(r.relative_norm_error < 0.10);
}

TEST_CASE("directional estimate error shrinks with more samples") {
  const Objective obj = quadratic_objective(10);
  double previous = 1e9;
  for (std::size_t k : {100, 1000, 10000, 100000}) {
    // Average over a few seeds so single unlucky draws do not decide.
    double err = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      RandomSource rng(100 + seed);
      const Vector est = directional_estimate(obj.f, obj.theta, 1e-4, k, rng);
      err += compare_to_reference(est, obj.gradient_at_theta).relative_norm_error;
    }
    CHECK(err < previous);
    previous = err;
  }
}

TEST_CASE("directional estimate validates arguments") {
  RandomSource rng(1);
  const Objective obj = quadratic_objective(3);
  CHECK_THROWS(directional_estimate(obj.f, obj.theta, 1e-3, 0, rng));
  CHECK_THROWS(directional_estimate(obj.f, obj.theta, 0.0, 10, rng));
}

TEST_CASE("non-Gaussian noise still gives a descent direction") {
  const Objective obj = quadratic_objective(10);
  for (NoiseFamily family : {NoiseFamily::uniform, NoiseFamily::rademacher_bimodal}) {
    RandomSource rng(8);
    const EstimatorReport r = nongaussian_descent_check(obj.f, obj.theta, 1e-4, 10000, family, rng);
    CHECK(r.family == family);
    CHECK(r.samples == 10000);
    CHECK(r.cosine_similarity > 0.9);
  }
}

TEST_CASE("directional estimate on a network log-likelihood") {
  RandomSource rng(12);
  const auto net = PolicyNetwork::random({3, 4, 2}, rng);
  const Vector obs{0.4, -1.2, 0.9};
  // Flatten all weights into θ.
  Vector theta;
  for (const Matrix& w : net.weights()) theta.insert(theta.end(), w.data().begin(), w.data().end());
  const ScalarFunction f = [&](std::span<const double> t) {
    PolicyNetwork probe = net;
    std::size_t k = 0;
    for (std::size_t l = 0; l < probe.depth(); ++l) {
      for (double& w : probe.weight(l).data()) w = t[k++];
    }
    return log_prob(probe.clean_pass(obs).probs, 1);
  };
  const Vector est = directional_estimate(f, theta, 1e-4, 10000, rng);
  const EstimatorReport r = compare_to_reference(est, finite_diff_gradient(f, theta));
  CHECK(r.cosine_similarity > 0.95);
  CHECK(r.relative_norm_error < 0.10);
}

TEST_CASE("mean NRL update aligns with the gradient per layer") {
  RandomSource rng(3);
  const auto net = PolicyNetwork::random({4, 8, 2}, rng);
  const Vector obs = gaussian_vector(rng, 4, 1.0);
  const auto grads = net.grad_logpi(net.clean_pass(obs), 0);
  const auto mean = mean_noise_update(net, obs, 0, 1e-3, 10000, rng);
  for (std::size_t l = 0; l < net.depth(); ++l) {
    CHECK(cosine_similarity(mean[l].data(), grads[l].data()) > 0.9);
  }
}

TEST_CASE("clean pass error curve falls with more passes") {
  RandomSource rng(4);
  const auto net = PolicyNetwork::random({6, 64, 3}, rng);
  std::vector<Vector> obs;
  for (int i = 0; i < 200; ++i) obs.push_back(gaussian_vector(rng, 6, 1.0));
  const auto curve = clean_pass_error_curve(net, obs, 1e-3, {2, 8, 32}, rng);
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].first == 2);
  CHECK(curve[1].second < curve[0].second);
  CHECK(curve[2].second < curve[1].second);
  CHECK_THROWS(clean_pass_error_curve(net, {}, 1e-3, {2}, rng));
}

TEST_CASE("estimator table has a row per combination") {
  std::ostringstream out;
  write_estimator_table(out, {4}, {10, 100}, {1e-3}, {NoiseFamily::gaussian, NoiseFamily::uniform}, 1);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "objective,n,K,sigma,family,cosine_similarity,relative_norm_error");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2 * 2 * 2);
}
