#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nrl/environments.hpp"
#include "nrl/learning_rules.hpp"
#include "nrl/policy_net.hpp"

namespace nrl {

enum class CleanMode { true_clean, averaged_noisy };

struct ExperimentConfig {
  int version = 1;
  std::string env = "reaching";
  RuleKind rule = RuleKind::nrl;
  std::vector<std::size_t> hidden_layers{128};
  std::size_t episodes = 1000;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  RuleConfig rule_config;
  double lambda = 0.66;
  CleanMode clean_mode = CleanMode::true_clean;
  /// Noisy passes averaged per step when clean_mode is averaged_noisy.
  std::size_t clean_samples = 1;
  /// Draw actions from the noisy output (true) or the clean output (false).
  /// The exact-gradient rule always runs noise-free.
  bool sample_from_noisy = true;
  double alpha = kDefaultLeakySlope;
  /// 0 selects the environment's default episode length.
  std::size_t max_steps = 0;
  std::filesystem::path output_dir;
  std::string label;
  bool save_checkpoints = false;

  /// `label` if set, otherwise `<env>_<rule>`.
  std::string run_label() const;
  void validate() const;
};

/// Defaults for an environment/rule pair: layer sizes, learning rates, noise
/// scales, episode counts and RPE normalization as used for the benchmark runs.
ExperimentConfig default_config(const std::string& env, RuleKind rule);

/// Key-value text: one `key = value` per line, `#` starts a comment. Keys not
/// present keep the defaults for the file's `env` and `rule`.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& out, const ExperimentConfig& cfg);

/// Applies one `key = value` override.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct EpisodeRecord {
  std::vector<Vector> observations;
  std::vector<std::size_t> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::size_t steps = 0;
  double total_return = 0.0;
  std::size_t apply_count = 0;
};

/// Independent random streams for one training run.
struct RunStreams {
  explicit RunStreams(std::uint64_t seed);

  RandomSource init;
  RandomSource env;
  RandomSource noise;
  RandomSource action;
};

/// Optional trajectory sink for debugging.
struct EpisodeOptions {
  TrajectoryWriter* trajectory = nullptr;
  bool keep_observations = true;
};

/// Runs one episode, learning online: accumulate every step, apply at every
/// reward event.
EpisodeRecord run_episode(Environment& env, PolicyNetwork& net, Learner& learner,
                          RunStreams& streams, const ExperimentConfig& cfg,
                          const EpisodeOptions& options = {});

/// Network layout for a config and environment.
std::vector<std::size_t> layer_sizes_for(const ExperimentConfig& cfg, const EnvSpec& spec);

inline constexpr std::size_t kFinalWindow = 50;

/// Mean of the last min(50, n) entries.
double final_performance(const std::vector<double>& returns);
/// Mean of the first min(window, n) entries.
double initial_performance(const std::vector<double>& returns, std::size_t window = kFinalWindow);
/// Trailing moving average with the given window (shorter at the start).
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);
/// First index at which the moving average reaches `threshold`, if any.
std::optional<std::size_t> episodes_to_threshold(const std::vector<double>& returns,
                                                 double threshold, std::size_t window);

struct RunMetrics {
  std::uint64_t seed = 0;
  std::vector<double> returns;
  std::vector<std::size_t> steps;
  double final_performance = 0.0;
  bool failed = false;
  std::string failure;
};

struct Aggregate {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t failed_runs = 0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunMetrics> runs;
  Aggregate aggregate;
  bool any_failed() const { return aggregate.failed_runs > 0; }
};

/// Single seed, no file output.
RunMetrics run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                    PolicyNetwork* final_net = nullptr);

/// One run per seed (in parallel up to `jobs` threads; 0 = hardware
/// concurrency), then aggregation. Writes metrics when output_dir is set.
ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned jobs = 0);

Aggregate aggregate_runs(const std::vector<RunMetrics>& runs);

/// `episode,return,steps` with round-trip precision.
void write_metrics_csv(std::ostream& out, const RunMetrics& run);
RunMetrics read_metrics_csv(std::istream& in);
RunMetrics load_metrics_csv(const std::filesystem::path& path);
void write_summary_json(std::ostream& out, const ExperimentResult& result);

/// Paths written by run_experiment for one seed.
std::filesystem::path metrics_path(const ExperimentConfig& cfg, std::uint64_t seed);
std::filesystem::path summary_path(const ExperimentConfig& cfg);

/// Sweep grid: the config format, where any value may list alternatives
/// separated by `|`. Expands to the cartesian product.
std::vector<ExperimentConfig> parse_grid(std::istream& in);
std::vector<ExperimentConfig> load_grid(const std::filesystem::path& path);

}  // namespace nrl
