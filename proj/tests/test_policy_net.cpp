#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "nrl/gradcheck.hpp"
#include "nrl/policy_net.hpp"

using namespace nrl;

namespace {

// Straight-line forward pass written without the library's cache plumbing.
Vector reference_forward(const PolicyNetwork& net, const Vector& obs) {
  Vector x = obs;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Matrix& w = net.weight(l);
    Vector h(w.rows(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) h[i] += w(i, j) * x[j];
    }
    if (l + 1 == net.depth()) {
      double mx = h[0];
      for (double v : h) mx = std::max(mx, v);
      double z = 0.0;
      for (double& v : h) z += (v = std::exp(v - mx));
      for (double& v : h) v /= z;
      return h;
    }
    for (double& v : h) v = v >= 0.0 ? v : net.alpha() * v;
    x = h;
  }
  return x;
}

}  // namespace

TEST_CASE("clean_pass with zero weights is uniform") {
  PolicyNetwork net({5, 4});
  const PassCache c = net.clean_pass(Vector{1, -2, 3, 0.5, 9});
  for (double p : c.probs) CHECK(p == doctest::Approx(0.25));
  CHECK_FALSE(c.noisy);
}

TEST_CASE("clean_pass hand example") {
  PolicyNetwork net({2, 2}, {identity(2)});
  const PassCache c = net.clean_pass(Vector{std::log(3.0), 0.0});
  CHECK(c.probs[0] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(c.probs[1] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("clean_pass matches an independent forward pass") {
  RandomSource rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto net = PolicyNetwork::random({6, 16, 8, 3}, rng);
    const Vector obs = gaussian_vector(rng, 6, 1.0);
    const Vector ref = reference_forward(net, obs);
    const PassCache c = net.clean_pass(obs);
    REQUIRE(c.depth() == 3);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(c.probs[i] == doctest::Approx(ref[i]).epsilon(1e-13));
    CHECK(c.post.back() == c.probs);
    double sum = 0.0;
    for (double p : c.probs) sum += p;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("clean_pass is deterministic and validates input size") {
  RandomSource rng(1);
  const auto net = PolicyNetwork::random({3, 5, 2}, rng);
  const Vector obs{0.1, 0.2, 0.3};
  const PassCache a = net.clean_pass(obs);
  const PassCache b = net.clean_pass(obs);
  CHECK(a.probs == b.probs);
  CHECK(a.pre == b.pre);
  CHECK_THROWS_AS(net.clean_pass(Vector{1, 2}), ShapeError);
}

TEST_CASE("random init stays inside the fan-in bound") {
  RandomSource rng(8);
  const auto net = PolicyNetwork::random({32, 128, 3}, rng);
  for (const Matrix& w : net.weights()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (double x : w.data()) CHECK(std::abs(x) <= bound);
  }
}

TEST_CASE("constructor rejects bad layouts") {
  CHECK_THROWS(PolicyNetwork({3}));
  CHECK_THROWS(PolicyNetwork({3, 0, 2}));
  CHECK_THROWS(PolicyNetwork({2, 2}, {Matrix(3, 2)}));
}

TEST_CASE("noisy_pass with sigma zero equals clean_pass exactly") {
  RandomSource init(2);
  const auto net = PolicyNetwork::random({4, 8, 3}, init);
  const Vector obs{0.3, -1.0, 2.0, 0.0};
  RandomSource rng(5);
  const auto [noisy, noise] = net.noisy_pass(obs, rng, 0.0);
  const PassCache clean = net.clean_pass(obs);
  CHECK(noisy.probs == clean.probs);
  CHECK(noisy.pre == clean.pre);
  CHECK(noisy.noisy);
}

TEST_CASE("noisy_pass records noise at every layer") {
  RandomSource init(3);
  const auto net = PolicyNetwork::random({4, 8, 6, 3}, init);
  const Vector obs{0.3, -1.0, 2.0, 0.0};
  RandomSource rng(5);
  const auto [cache, noise] = net.noisy_pass(obs, rng, 0.1);
  REQUIRE(noise.raw.size() == 3);
  REQUIRE(noise.scaled.size() == 3);
  CHECK(noise.sigma == 0.1);
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK(noise.raw[l].size() == net.layer_sizes()[l + 1]);
    CHECK(dot(noise.scaled[l], noise.raw[l]) == doctest::Approx(1.0).epsilon(1e-9));
    // Pre-activation is W x̃ + ξ with x̃ the perturbed input.
    const Vector h = matvec(net.weight(l), cache.inputs[l]);
    for (std::size_t i = 0; i < h.size(); ++i) {
      CHECK(cache.pre[l][i] == doctest::Approx(h[i] + noise.raw[l][i]).epsilon(1e-13));
    }
  }
  // Output noise is applied before the softmax.
  const Vector out = softmax(cache.pre.back());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(cache.probs[i] == doctest::Approx(out[i]));
}

TEST_CASE("noisy_pass is reproducible for a fixed seed") {
  RandomSource init(3);
  const auto net = PolicyNetwork::random({4, 8, 3}, init);
  const Vector obs{1, 2, 3, 4};
  RandomSource a(99);
  RandomSource b(99);
  const auto pa = net.noisy_pass(obs, a, 0.01);
  const auto pb = net.noisy_pass(obs, b, 0.01);
  CHECK(pa.first.probs == pb.first.probs);
  CHECK(pa.second.raw == pb.second.raw);
}

TEST_CASE("noisy_pass deviation is first order in sigma") {
  const double sigma = 1e-3;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RandomSource rng(seed);
    const auto net = PolicyNetwork::random({6, 32, 16, 3}, rng);
    const Vector obs = gaussian_vector(rng, 6, 1.0);
    const PassCache clean = net.clean_pass(obs);
    const auto [noisy, noise] = net.noisy_pass(obs, rng, sigma);
    for (std::size_t l = 0; l < net.depth(); ++l) {
      Vector diff = noisy.post[l];
      axpy(-1.0, clean.post[l], diff);
      // Each layer's deviation is bounded by a small multiple of σ√width.
      const double width = static_cast<double>(clean.post[l].size());
      CHECK(norm(diff) < 10.0 * sigma * std::sqrt(width));
    }
  }
}

TEST_CASE("sample_action") {
  RandomSource rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sample_action(Vector{1, 0, 0}, rng) == 0);
  for (int i = 0; i < 100; ++i) CHECK(sample_action(Vector{0, 1}, rng) == 1);
  int zeros = 0;
  for (int i = 0; i < 100000; ++i) zeros += sample_action(Vector{0.5, 0.5}, rng) == 0;
  CHECK(zeros >= 49000);
  CHECK(zeros <= 51000);
  CHECK_THROWS(sample_action(Vector{0.7, 0.7}, rng));
  CHECK_THROWS(sample_action(Vector{1.2, -0.2}, rng));
}

TEST_CASE("sample_action consumes one uniform draw") {
  RandomSource a(12);
  RandomSource b(12);
  sample_action(Vector{0.2, 0.3, 0.5}, a);
  b.uniform();
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("sample_action frequencies follow the distribution") {
  RandomSource rng(21);
  const Vector p{0.1, 0.6, 0.3};
  std::vector<int> counts(3, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[sample_action(p, rng)];
  for (std::size_t i = 0; i < 3; ++i) {
    const double se = std::sqrt(p[i] * (1 - p[i]) / n);
    CHECK(std::abs(counts[i] / static_cast<double>(n) - p[i]) < 5 * se);
  }
}

TEST_CASE("greedy_action picks the first maximum") {
  CHECK(greedy_action(Vector{0.2, 0.5, 0.3}) == 1);
  CHECK(greedy_action(Vector{0.4, 0.4, 0.2}) == 0);
}

TEST_CASE("log_prob") {
  const double e = std::exp(1.0);
  CHECK(log_prob(Vector{1 / e, 1 - 1 / e}, 0) == doctest::Approx(-1.0).epsilon(1e-15));
  for (std::size_t a = 0; a < 4; ++a) {
    CHECK(log_prob(Vector{0.25, 0.25, 0.25, 0.25}, a) == doctest::Approx(-std::log(4.0)));
  }
  CHECK(log_prob(Vector{1.0, 0.0}, 1) == doctest::Approx(std::log(1e-12)));
  CHECK(log_prob(Vector{1.0, 1e-20}, 1) == doctest::Approx(std::log(1e-12)));
}

TEST_CASE("exp of log_prob sums to one") {
  RandomSource rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto net = PolicyNetwork::random({5, 12, 4}, rng);
    const Vector p = net.clean_pass(gaussian_vector(rng, 5, 1.0)).probs;
    double sum = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) sum += std::exp(log_prob(p, a));
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("grad_logpi single layer identity") {
  RandomSource rng(10);
  const auto net = PolicyNetwork::random({4, 3}, rng);
  const Vector obs{0.5, -1.0, 2.0, 0.25};
  const PassCache c = net.clean_pass(obs);
  const auto g = net.grad_logpi(c, 2);
  REQUIRE(g.size() == 1);
  for (std::size_t i = 0; i < 3; ++i) {
    const double coeff = (i == 2 ? 1.0 : 0.0) - c.probs[i];
    for (std::size_t j = 0; j < 4; ++j) CHECK(g[0](i, j) == doctest::Approx(coeff * obs[j]).epsilon(1e-14));
  }
}

TEST_CASE("grad_logpi with zero weights and two actions") {
  PolicyNetwork net({3, 2});
  const Vector obs{1.0, -2.0, 4.0};
  const auto g = net.grad_logpi(net.clean_pass(obs), 0);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(g[0](0, j) == doctest::Approx(0.5 * obs[j]));
    CHECK(g[0](1, j) == doctest::Approx(-0.5 * obs[j]));
  }
}

TEST_CASE("grad_logpi agrees with central differences on a 4-8-3 net") {
  RandomSource rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const auto net = PolicyNetwork::random({4, 8, 3}, rng);
    const Vector obs = gaussian_vector(rng, 4, 1.0);
    const auto [err, count] = grad_logpi_max_relative_error(net, obs, trial % 3);
    CHECK(count == 8 * 4 + 3 * 8);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("grad_logpi rejects noisy caches") {
  RandomSource rng(1);
  const auto net = PolicyNetwork::random({2, 3, 2}, rng);
  const auto [noisy, noise] = net.noisy_pass(Vector{1, 1}, rng, 0.1);
  CHECK_THROWS(net.grad_logpi(noisy, 0));
}

TEST_CASE("averaged_noisy_output") {
  RandomSource init(4);
  const auto net = PolicyNetwork::random({5, 16, 3}, init);
  const Vector obs{1, 0, -1, 0.5, 2};
  const Vector clean = net.clean_pass(obs).probs;
  RandomSource rng(7);
  const Vector zero = net.averaged_noisy_output(obs, rng, 0.0, 8);
  for (std::size_t i = 0; i < 3; ++i) CHECK(zero[i] == doctest::Approx(clean[i]).epsilon(1e-15));

  const Vector avg = net.averaged_noisy_output(obs, rng, 0.1, 4);
  double sum = 0.0;
  for (double p : avg) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(net.averaged_noisy_output(obs, rng, 0.1, 0));
}

TEST_CASE("averaged_noisy_output error shrinks like one over root N") {
  RandomSource init(8);
  const auto net = PolicyNetwork::random({6, 32, 3}, init);
  RandomSource rng(9);
  std::vector<Vector> obs;
  for (int i = 0; i < 500; ++i) obs.push_back(gaussian_vector(rng, 6, 1.0));
  std::vector<double> xs;
  std::vector<double> ys;
  double previous = 1e9;
  for (std::size_t n : {2, 4, 8, 16, 32, 64}) {
    double err = 0.0;
    for (const Vector& o : obs) {
      const Vector clean = net.clean_pass(o).probs;
      const Vector avg = net.averaged_noisy_output(o, rng, 1e-3, n);
      for (std::size_t i = 0; i < clean.size(); ++i) err += std::abs(avg[i] - clean[i]);
    }
    CHECK(err < previous);
    previous = err;
    xs.push_back(std::log(static_cast<double>(n)));
    ys.push_back(std::log(err));
  }
  // Least-squares slope of log error against log N.
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  CHECK(slope > -0.65);
  CHECK(slope < -0.35);
}

TEST_CASE("checkpoint round trip is exact") {
  RandomSource rng(31);
  const auto net = PolicyNetwork::random({6, 7, 5, 3}, rng, 0.02);
  std::stringstream ss;
  write_checkpoint(ss, net);
  const PolicyNetwork back = read_checkpoint(ss);
  CHECK(back == net);
  CHECK(back.alpha() == 0.02);
}

TEST_CASE("checkpoint reader rejects bad input") {
  std::istringstream wrong_header("nrl-policy 99\n");
  CHECK_THROWS(read_checkpoint(wrong_header));
  std::istringstream junk("hello\n");
  CHECK_THROWS(read_checkpoint(junk));
}
