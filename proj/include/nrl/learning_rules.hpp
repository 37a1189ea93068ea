#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "nrl/numerics.hpp"
#include "nrl/policy_net.hpp"

namespace nrl {

/// Running-average reward prediction r̄ ← r̄ + λ (r − r̄).
struct RewardPredictor {
  double r_bar = 0.0;
  double lambda = 0.66;
};

RewardPredictor update_prediction(RewardPredictor p, double reward);

/// How NRL turns a layer's noise ξˡ into the factor multiplying ρ x̃ᵀ.
///   sample:   ξˡ / ‖ξˡ‖²
///   expected: ξˡ / (mˡ σ²), the same mean as `sample` but with ‖ξˡ‖² replaced
///             by its expectation. For a 2-unit layer 1/‖ξˡ‖² has no finite
///             mean, and noise from other layers leaks into ρ, so `sample`
///             makes rare but huge steps there.
///   network:  ξˡ / Σₖ ‖ξᵏ‖², one norm over all layers.
enum class NoiseScaling { sample, expected, network };

std::string_view to_string(NoiseScaling scaling);
NoiseScaling parse_noise_scaling(std::string_view name);

struct RuleConfig {
  double eta = 1e-2;
  double sigma = 1e-3;
  bool normalize_rpe = false;
  double rpe_floor = 1e-6;
  NoiseScaling noise_scaling = NoiseScaling::expected;
};

/// Reward prediction error r − r̄. With normalization it is divided by
/// max(|r|, |r̄|, rpe_floor), which keeps δ in [−1, 1] for nonnegative rewards
/// and stays finite when r = 0. Reads the prediction only; update it afterwards.
double rpe(const RewardPredictor& p, double reward, const RuleConfig& cfg);

/// Per-layer accumulators shaped like the network's weights.
class EligibilityTrace {
 public:
  EligibilityTrace() = default;
  explicit EligibilityTrace(const PolicyNetwork& net);

  std::size_t depth() const { return layers_.size(); }
  Matrix& operator[](std::size_t l) { return layers_.at(l); }
  const Matrix& operator[](std::size_t l) const { return layers_.at(l); }
  const std::vector<Matrix>& layers() const { return layers_; }

  void clear();
  bool is_zero() const;
  void add(const EligibilityTrace& other);

  friend bool operator==(const EligibilityTrace&, const EligibilityTrace&) = default;

 private:
  std::vector<Matrix> layers_;
};

/// Everything the noise-driven rules need from a single timestep.
struct StepContext {
  NoiseRecord noise;
  /// x̃ⁱ⁻¹ for every layer: what each layer received on the noisy pass.
  std::vector<Vector> perturbed_inputs;
  double rho = 0.0;
  double clean_logp = 0.0;
  double noisy_logp = 0.0;
};

double compute_rho(double noisy_logp, double clean_logp);

/// Builds a StepContext from a noisy pass, its noise and the clean log-probability
/// of the chosen action.
StepContext make_step_context(const PassCache& noisy, NoiseRecord noise, std::size_t action,
                              double clean_logp);

/// Per-layer multipliers c such that the NRL step for layer l is c[l] ξˡ ρ x̃ᵀ.
std::vector<double> noise_scale_factors(const NoiseRecord& noise, NoiseScaling scaling);

/// trace[l] += ξ̄ˡ ρ (x̃ˡ⁻¹)ᵀ with ξ̄ˡ chosen by `scaling`.
void nrl_accumulate(EligibilityTrace& trace, const StepContext& ctx,
                    NoiseScaling scaling = NoiseScaling::expected);
/// trace[l] += ξˡ (x̃ˡ⁻¹)ᵀ
void rmhl_accumulate(EligibilityTrace& trace, const StepContext& ctx);
/// trace[l] += ∂ log π / ∂Wˡ
void exact_gradient_accumulate(EligibilityTrace& trace, const std::vector<Matrix>& grads);

/// W[l] += η δ trace[l] for every layer, then zeroes the trace. Shared by all
/// three rules.
void nrl_apply(PolicyNetwork& net, EligibilityTrace& trace, double delta, double eta);

enum class RuleKind { nrl, rmhl, exact };

std::string_view to_string(RuleKind kind);
RuleKind parse_rule_kind(std::string_view name);

/// One training run's learning state: the rule, its trace and the reward
/// predictor. Not shared between runs.
class Learner {
 public:
  Learner(RuleKind kind, RuleConfig cfg, double lambda, const PolicyNetwork& net);

  RuleKind kind() const { return kind_; }
  const RuleConfig& config() const { return cfg_; }
  const RewardPredictor& predictor() const { return predictor_; }
  const EligibilityTrace& trace() const { return trace_; }
  std::size_t apply_count() const { return applies_; }

  /// Noise-driven accumulation (nrl / rmhl).
  void accumulate(const StepContext& ctx);
  /// Gradient accumulation (exact).
  void accumulate(const std::vector<Matrix>& grads);

  /// Reward event: computes δ against the current prediction, applies the
  /// trace, then updates the prediction. Returns δ.
  double reward(PolicyNetwork& net, double r);

 private:
  RuleKind kind_;
  RuleConfig cfg_;
  RewardPredictor predictor_;
  EligibilityTrace trace_;
  std::size_t applies_ = 0;
};

}  // namespace nrl
