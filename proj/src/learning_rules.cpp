#include "nrl/learning_rules.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nrl {

RewardPredictor update_prediction(RewardPredictor p, double reward) {
  if (!std::isfinite(reward)) throw NumericError("update_prediction: non-finite reward");
  p.r_bar += p.lambda * (reward - p.r_bar);
  return p;
}

double rpe(const RewardPredictor& p, double reward, const RuleConfig& cfg) {
  if (!std::isfinite(reward)) throw NumericError("rpe: non-finite reward");
  double delta = reward - p.r_bar;
  if (cfg.normalize_rpe) delta /= std::max({std::abs(reward), std::abs(p.r_bar), cfg.rpe_floor});
  return delta;
}

EligibilityTrace::EligibilityTrace(const PolicyNetwork& net) {
  for (const auto& w : net.weights()) layers_.emplace_back(w.rows(), w.cols());
}

void EligibilityTrace::clear() {
  for (auto& m : layers_) m.fill(0.0);
}

bool EligibilityTrace::is_zero() const {
  for (const auto& m : layers_) {
    for (double x : m.data()) {
      if (x != 0.0) return false;
    }
  }
  return true;
}

void EligibilityTrace::add(const EligibilityTrace& other) {
  if (other.depth() != depth()) throw ShapeError("EligibilityTrace::add: depth mismatch");
  for (std::size_t l = 0; l < depth(); ++l) axpy(1.0, other[l], layers_[l]);
}

double compute_rho(double noisy_logp, double clean_logp) { return noisy_logp - clean_logp; }

StepContext make_step_context(const PassCache& noisy, NoiseRecord noise, std::size_t action,
                              double clean_logp) {
  if (!noisy.noisy) throw std::invalid_argument("make_step_context: expected a noisy cache");
  StepContext ctx;
  ctx.noise = std::move(noise);
  ctx.perturbed_inputs = noisy.inputs;
  ctx.clean_logp = clean_logp;
  ctx.noisy_logp = log_prob(noisy.probs, action);
  ctx.rho = compute_rho(ctx.noisy_logp, ctx.clean_logp);
  return ctx;
}

namespace {

void check_context(const EligibilityTrace& trace, const StepContext& ctx) {
  if (ctx.noise.raw.size() != trace.depth() || ctx.noise.scaled.size() != trace.depth() ||
      ctx.perturbed_inputs.size() != trace.depth()) {
    throw ShapeError("step context depth does not match the trace");
  }
}

}  // namespace

std::vector<double> noise_scale_factors(const NoiseRecord& noise, NoiseScaling scaling) {
  const std::size_t depth = noise.raw.size();
  std::vector<double> factors(depth, 0.0);
  double total = 0.0;
  for (const auto& xi : noise.raw) total += squared_norm(xi);
  for (std::size_t l = 0; l < depth; ++l) {
    double denom = 0.0;
    switch (scaling) {
      case NoiseScaling::sample: denom = squared_norm(noise.raw[l]); break;
      case NoiseScaling::expected:
        denom = static_cast<double>(noise.raw[l].size()) * noise.sigma * noise.sigma;
        break;
      case NoiseScaling::network: denom = total; break;
    }
    factors[l] = denom > 0.0 ? 1.0 / denom : 0.0;
  }
  return factors;
}

void nrl_accumulate(EligibilityTrace& trace, const StepContext& ctx, NoiseScaling scaling) {
  check_context(trace, ctx);
  const std::vector<double> factors = noise_scale_factors(ctx.noise, scaling);
  for (std::size_t l = 0; l < trace.depth(); ++l) {
    add_outer(ctx.rho * factors[l], ctx.noise.raw[l], ctx.perturbed_inputs[l], trace[l]);
  }
}

void rmhl_accumulate(EligibilityTrace& trace, const StepContext& ctx) {
  check_context(trace, ctx);
  for (std::size_t l = 0; l < trace.depth(); ++l) {
    add_outer(1.0, ctx.noise.raw[l], ctx.perturbed_inputs[l], trace[l]);
  }
}

void exact_gradient_accumulate(EligibilityTrace& trace, const std::vector<Matrix>& grads) {
  if (grads.size() != trace.depth()) throw ShapeError("exact_gradient_accumulate: depth mismatch");
  for (std::size_t l = 0; l < trace.depth(); ++l) axpy(1.0, grads[l], trace[l]);
}

void nrl_apply(PolicyNetwork& net, EligibilityTrace& trace, double delta, double eta) {
  if (!std::isfinite(delta)) throw NumericError("nrl_apply: non-finite reward prediction error");
  if (trace.depth() != net.depth()) throw ShapeError("nrl_apply: trace depth does not match network");
  const double scale = eta * delta;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    if (scale != 0.0) axpy(scale, trace[l], net.weight(l));
  }
  trace.clear();
}

std::string_view to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::nrl: return "nrl";
    case RuleKind::rmhl: return "rmhl";
    case RuleKind::exact: return "exact";
  }
  return "?";
}

std::string_view to_string(NoiseScaling scaling) {
  switch (scaling) {
    case NoiseScaling::sample: return "sample";
    case NoiseScaling::expected: return "expected";
    case NoiseScaling::network: return "network";
  }
  return "?";
}

NoiseScaling parse_noise_scaling(std::string_view name) {
  if (name == "sample") return NoiseScaling::sample;
  if (name == "expected") return NoiseScaling::expected;
  if (name == "network") return NoiseScaling::network;
  throw std::invalid_argument("unknown noise scaling '" + std::string(name) + "'");
}

RuleKind parse_rule_kind(std::string_view name) {
  if (name == "nrl") return RuleKind::nrl;
  if (name == "rmhl") return RuleKind::rmhl;
  if (name == "exact" || name == "bp") return RuleKind::exact;
  throw std::invalid_argument("unknown rule '" + std::string(name) + "'");
}

Learner::Learner(RuleKind kind, RuleConfig cfg, double lambda, const PolicyNetwork& net)
    : kind_(kind), cfg_(cfg), trace_(net) {
  if (!(cfg_.eta > 0.0)) throw std::invalid_argument("Learner: eta must be positive");
  if (!(cfg_.sigma >= 0.0)) throw std::invalid_argument("Learner: sigma must be non-negative");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("Learner: lambda must lie in (0, 1]");
  if (!(cfg_.rpe_floor > 0.0)) throw std::invalid_argument("Learner: rpe_floor must be positive");
  predictor_.lambda = lambda;
}

void Learner::accumulate(const StepContext& ctx) {
  switch (kind_) {
    case RuleKind::nrl: nrl_accumulate(trace_, ctx, cfg_.noise_scaling); break;
    case RuleKind::rmhl: rmhl_accumulate(trace_, ctx); break;
    case RuleKind::exact:
      throw std::logic_error("Learner: exact-gradient rule accumulates gradients, not noise");
  }
}

void Learner::accumulate(const std::vector<Matrix>& grads) {
  if (kind_ != RuleKind::exact) {
    throw std::logic_error("Learner: only the exact-gradient rule accumulates gradients");
  }
  exact_gradient_accumulate(trace_, grads);
}

double Learner::reward(PolicyNetwork& net, double r) {
  const double delta = rpe(predictor_, r, cfg_);
  nrl_apply(net, trace_, delta, cfg_.eta);
  predictor_ = update_prediction(predictor_, r);
  ++applies_;
  return delta;
}

}  // namespace nrl
