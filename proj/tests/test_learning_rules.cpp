#include <doctest.h>

#include <cmath>
#include <vector>

#include "nrl/gradcheck.hpp"
#include "nrl/learning_rules.hpp"

using namespace nrl;

namespace {

struct Step {
  StepContext ctx;
  std::vector<Matrix> grads;
};

Step make_step(const PolicyNetwork& net, RandomSource& rng, double sigma) {
  const Vector obs = gaussian_vector(rng, net.input_dim(), 1.0);
  const PassCache clean = net.clean_pass(obs);
  auto [noisy, noise] = net.noisy_pass(obs, rng, sigma);
  const std::size_t action = sample_action(noisy.probs, rng);
  Step s;
  s.ctx = make_step_context(noisy, std::move(noise), action, log_prob(clean.probs, action));
  s.grads = net.grad_logpi(clean, action);
  return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

}  // namespace

TEST_CASE("reward prediction update") {
  RewardPredictor p{0.0, 0.66};
  p = update_prediction(p, 1.0);
  CHECK(p.r_bar == doctest::Approx(0.66));
  p = update_prediction(p, 1.0);
  CHECK(p.r_bar == doctest::Approx(0.66 + 0.66 * 0.34));
  RewardPredictor q{5.0, 1.0};
  CHECK(update_prediction(q, -2.0).r_bar == -2.0);
}

TEST_CASE("lambda one without normalization gives successive differences") {
  RuleConfig cfg;
  RewardPredictor p{0.0, 1.0};
  const std::vector<double> rewards{0.3, 1.7, -0.4, 2.0, 2.0};
  double previous = 0.0;
  for (double r : rewards) {
    CHECK(rpe(p, r, cfg) == doctest::Approx(r - previous));
    p = update_prediction(p, r);
    previous = r;
  }
}

TEST_CASE("normalized rpe stays bounded and finite") {
  RuleConfig cfg;
  cfg.normalize_rpe = true;
  CHECK(rpe(RewardPredictor{0.0, 0.66}, 0.0, cfg) == 0.0);
  CHECK(rpe(RewardPredictor{0.0, 0.66}, 200.0, cfg) == doctest::Approx(1.0));
  CHECK(rpe(RewardPredictor{0.9, 0.66}, 0.0, cfg) == doctest::Approx(-1.0));
  RandomSource rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double r = 500.0 * rng.uniform();
    const double r_bar = 500.0 * rng.uniform();
    const double d = rpe(RewardPredictor{r_bar, 0.66}, r, cfg);
    CHECK(std::abs(d) <= 1.0 + 1e-12);
    CHECK(d * (r - r_bar) >= 0.0);
  }
}

TEST_CASE("noise scale factors") {
  RandomSource rng(6);
  const double sigma = 0.1;
  NoiseRecord noise;
  noise.sigma = sigma;
  noise.raw = {gaussian_vector(rng, 5, sigma), gaussian_vector(rng, 2, sigma)};
  noise.scaled = noise.raw;
  const double n0 = squared_norm(noise.raw[0]);
  const double n1 = squared_norm(noise.raw[1]);

  const auto sample = noise_scale_factors(noise, NoiseScaling::sample);
  CHECK(sample[0] == doctest::Approx(1.0 / n0));
  CHECK(sample[1] == doctest::Approx(1.0 / n1));
  const auto expected = noise_scale_factors(noise, NoiseScaling::expected);
  CHECK(expected[0] == doctest::Approx(1.0 / (5 * sigma * sigma)));
  CHECK(expected[1] == doctest::Approx(1.0 / (2 * sigma * sigma)));
  const auto network = noise_scale_factors(noise, NoiseScaling::network);
  CHECK(network[0] == doctest::Approx(1.0 / (n0 + n1)));
  CHECK(network[1] == doctest::Approx(1.0 / (n0 + n1)));

  NoiseRecord silent;
  silent.raw = {Vector(3, 0.0)};
  CHECK(noise_scale_factors(silent, NoiseScaling::sample)[0] == 0.0);
  CHECK(noise_scale_factors(silent, NoiseScaling::expected)[0] == 0.0);
}

TEST_CASE("noise scaling names round trip") {
  for (NoiseScaling s : {NoiseScaling::sample, NoiseScaling::expected, NoiseScaling::network}) {
    CHECK(parse_noise_scaling(to_string(s)) == s);
  }
  CHECK_THROWS(parse_noise_scaling("layer"));
  for (RuleKind k : {RuleKind::nrl, RuleKind::rmhl, RuleKind::exact}) CHECK(parse_rule_kind(to_string(k)) == k);
  CHECK_THROWS(parse_rule_kind("hebb"));
}

TEST_CASE("rho is the log-likelihood difference") {
  CHECK(compute_rho(std::log(0.5), std::log(0.25)) == doctest::Approx(std::log(2.0)));
  CHECK(compute_rho(-1.0, -1.0) == 0.0);
}

TEST_CASE("single-step traces match their definitions") {
  RandomSource rng(10);
  const auto net = PolicyNetwork::random({4, 6, 3}, rng);
  const Step s = make_step(net, rng, 0.05);
  REQUIRE(s.ctx.rho != 0.0);

  for (NoiseScaling scaling : {NoiseScaling::sample, NoiseScaling::expected, NoiseScaling::network}) {
    EligibilityTrace trace(net);
    nrl_accumulate(trace, s.ctx, scaling);
    const auto c = noise_scale_factors(s.ctx.noise, scaling);
    for (std::size_t l = 0; l < net.depth(); ++l) {
      const Matrix& xi_x = outer(s.ctx.noise.raw[l], s.ctx.perturbed_inputs[l]);
      for (std::size_t i = 0; i < xi_x.size(); ++i) {
        CHECK(trace[l].data()[i] == doctest::Approx(c[l] * s.ctx.rho * xi_x.data()[i]).epsilon(1e-12));
      }
    }
  }

  EligibilityTrace hebb(net);
  rmhl_accumulate(hebb, s.ctx);
  for (std::size_t l = 0; l < net.depth(); ++l) {
    CHECK(max_abs_diff(hebb[l], outer(s.ctx.noise.raw[l], s.ctx.perturbed_inputs[l])) < 1e-15);
  }

  EligibilityTrace grad(net);
  exact_gradient_accumulate(grad, s.grads);
  for (std::size_t l = 0; l < net.depth(); ++l) CHECK(grad[l] == s.grads[l]);
}

TEST_CASE("trace accumulation is linear and order independent") {
  RandomSource rng(11);
  const auto net = PolicyNetwork::random({3, 5, 2}, rng);
  std::vector<Step> steps;
  for (int i = 0; i < 6; ++i) steps.push_back(make_step(net, rng, 0.05));

  EligibilityTrace forward(net);
  EligibilityTrace backward(net);
  for (const auto& s : steps) nrl_accumulate(forward, s.ctx);
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) nrl_accumulate(backward, it->ctx);

  EligibilityTrace parts(net);
  EligibilityTrace first(net);
  EligibilityTrace second(net);
  for (int i = 0; i < 3; ++i) nrl_accumulate(first, steps[i].ctx);
  for (int i = 3; i < 6; ++i) nrl_accumulate(second, steps[i].ctx);
  parts.add(first);
  parts.add(second);

  for (std::size_t l = 0; l < net.depth(); ++l) {
    CHECK(max_abs_diff(forward[l], backward[l]) < 1e-12);
    CHECK(max_abs_diff(forward[l], parts[l]) < 1e-12);
  }
}

TEST_CASE("apply moves weights by eta delta trace and clears the trace") {
  RandomSource rng(12);
  auto net = PolicyNetwork::random({3, 4, 2}, rng);
  const Step s = make_step(net, rng, 0.05);
  EligibilityTrace trace(net);
  rmhl_accumulate(trace, s.ctx);
  const EligibilityTrace saved = trace;
  const PolicyNetwork before = net;
  nrl_apply(net, trace, 0.5, 0.1);
  CHECK(trace.is_zero());
  for (std::size_t l = 0; l < net.depth(); ++l) {
    for (std::size_t i = 0; i < net.weight(l).size(); ++i) {
      CHECK(net.weight(l).data()[i] ==
            doctest::Approx(before.weight(l).data()[i] + 0.05 * saved[l].data()[i]).epsilon(1e-14));
    }
  }

  rmhl_accumulate(trace, s.ctx);
  const PolicyNetwork unchanged = net;
  nrl_apply(net, trace, 0.0, 0.1);
  CHECK(net == unchanged);
  CHECK(trace.is_zero());
}

TEST_CASE("exact rule over an episode follows the summed log-likelihood gradient") {
  RandomSource rng(13);
  auto net = PolicyNetwork::random({3, 5, 2}, rng);
  std::vector<Vector> obs;
  std::vector<std::size_t> actions;
  for (int t = 0; t < 7; ++t) {
    obs.push_back(gaussian_vector(rng, 3, 1.0));
    actions.push_back(sample_action(net.clean_pass(obs.back()).probs, rng));
  }

  Vector theta;
  for (const Matrix& w : net.weights()) theta.insert(theta.end(), w.data().begin(), w.data().end());
  const ScalarFunction summed = [&](std::span<const double> t) {
    PolicyNetwork probe = net;
    std::size_t k = 0;
    for (std::size_t l = 0; l < probe.depth(); ++l) {
      for (double& w : probe.weight(l).data()) w = t[k++];
    }
    double total = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) total += log_prob(probe.clean_pass(obs[i]).probs, actions[i]);
    return total;
  };
  const Vector fd = finite_diff_gradient(summed, theta);

  RuleConfig cfg;
  cfg.eta = 0.01;
  cfg.sigma = 0.0;
  Learner learner(RuleKind::exact, cfg, 0.66, net);
  for (std::size_t i = 0; i < obs.size(); ++i) learner.accumulate(net.grad_logpi(net.clean_pass(obs[i]), actions[i]));
  const PolicyNetwork before = net;
  const double delta = learner.reward(net, 2.0);
  CHECK(delta == doctest::Approx(2.0));
  CHECK(learner.trace().is_zero());
  CHECK(learner.apply_count() == 1);
  CHECK(learner.predictor().r_bar == doctest::Approx(0.66 * 2.0));

  std::size_t k = 0;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    for (std::size_t i = 0; i < net.weight(l).size(); ++i, ++k) {
      const double step = net.weight(l).data()[i] - before.weight(l).data()[i];
      CHECK(step == doctest::Approx(cfg.eta * delta * fd[k]).epsilon(1e-5).scale(1e-9));
    }
  }
}

TEST_CASE("learner dispatch and validation") {
  RandomSource rng(14);
  const auto net = PolicyNetwork::random({3, 4, 2}, rng);
  const Step s = make_step(net, rng, 0.05);
  RuleConfig cfg;
  Learner nrl(RuleKind::nrl, cfg, 0.66, net);
  CHECK_THROWS_AS(nrl.accumulate(s.grads), std::logic_error);
  nrl.accumulate(s.ctx);
  CHECK_FALSE(nrl.trace().is_zero());
  Learner exact(RuleKind::exact, cfg, 0.66, net);
  CHECK_THROWS_AS(exact.accumulate(s.ctx), std::logic_error);

  RuleConfig bad = cfg;
  bad.eta = 0.0;
  CHECK_THROWS(Learner(RuleKind::nrl, bad, 0.66, net));
  CHECK_THROWS(Learner(RuleKind::nrl, cfg, 0.0, net));
  CHECK_THROWS(Learner(RuleKind::nrl, cfg, 1.5, net));
}

TEST_CASE("zero noise gives zero rho and no NRL trace") {
  RandomSource rng(15);
  const auto net = PolicyNetwork::random({3, 4, 2}, rng);
  const Step s = make_step(net, rng, 0.0);
  CHECK(s.ctx.rho == 0.0);
  EligibilityTrace trace(net);
  nrl_accumulate(trace, s.ctx);
  CHECK(trace.is_zero());
}
