#include "nrl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace nrl {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string current;
  std::istringstream in(s);
  while (std::getline(in, current, sep)) {
    auto t = trim(current);
    if (!t.empty()) parts.push_back(t);
  }
  return parts;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config: cannot parse '" + text + "' for key '" + key + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw std::invalid_argument("config: expected a boolean for '" + key + "', got '" + text + "'");
}

std::string format_double(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues read_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

ExperimentConfig config_from_key_values(const KeyValues& kv) {
  std::string env = "reaching";
  RuleKind rule = RuleKind::nrl;
  for (const auto& [k, v] : kv) {
    if (k == "env") env = v;
    if (k == "rule") rule = parse_rule_kind(v);
  }
  ExperimentConfig cfg = default_config(env, rule);
  for (const auto& [k, v] : kv) set_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

}  // namespace

std::string ExperimentConfig::run_label() const {
  if (!label.empty()) return label;
  return env + "_" + std::string(to_string(rule));
}

void ExperimentConfig::validate() const {
  if (version != 1) throw std::invalid_argument("config: unsupported version " + std::to_string(version));
  if (env != "reaching" && env != "cartpole" && env != "acrobot") {
    throw std::invalid_argument("config: unknown env '" + env + "'");
  }
  if (episodes < 1) throw std::invalid_argument("config: episodes must be at least 1");
  if (seeds.empty()) throw std::invalid_argument("config: seeds must not be empty");
  for (std::size_t h : hidden_layers) {
    if (h < 1) throw std::invalid_argument("config: hidden layer sizes must be at least 1");
  }
  if (!(rule_config.eta > 0.0)) throw std::invalid_argument("config: eta must be positive");
  if (!(rule_config.sigma >= 0.0)) throw std::invalid_argument("config: sigma must be non-negative");
  if (!(rule_config.rpe_floor > 0.0)) throw std::invalid_argument("config: rpe_floor must be positive");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("config: lambda must lie in (0, 1]");
  if (clean_mode == CleanMode::averaged_noisy && clean_samples < 1) {
    throw std::invalid_argument("config: averaged_noisy needs at least one pass");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("config: alpha must lie in (0, 1)");
}

ExperimentConfig default_config(const std::string& env, RuleKind rule) {
  ExperimentConfig cfg;
  cfg.env = env;
  cfg.rule = rule;
  RuleConfig& rc = cfg.rule_config;
  if (env == "acrobot") {
    cfg.hidden_layers = {64};
    cfg.episodes = 8000;
    rc.normalize_rpe = true;
    switch (rule) {
      case RuleKind::exact: rc.eta = 5e-3; rc.sigma = 0.0; break;
      case RuleKind::nrl: rc.eta = 5e-2; rc.sigma = 1e-3; break;
      case RuleKind::rmhl: rc.eta = 5e-2; rc.sigma = 1e-3; break;
    }
  } else if (env == "cartpole") {
    cfg.hidden_layers = {64};
    cfg.episodes = 20000;
    rc.normalize_rpe = true;
    switch (rule) {
      case RuleKind::exact: rc.eta = 5e-3; rc.sigma = 0.0; break;
      case RuleKind::nrl: rc.eta = 5e-2; rc.sigma = 1e-3; break;
      case RuleKind::rmhl: rc.eta = 1e-2; rc.sigma = 1e-1; break;
    }
  } else if (env == "reaching") {
    cfg.hidden_layers = {128};
    cfg.episodes = 1000;
    rc.normalize_rpe = false;
    switch (rule) {
      case RuleKind::exact: rc.eta = 1e-2; rc.sigma = 0.0; break;
      case RuleKind::nrl: rc.eta = 1e-2; rc.sigma = 1e-3; break;
      case RuleKind::rmhl: rc.eta = 1e-1; rc.sigma = 1e-1; break;
    }
  } else {
    throw std::invalid_argument("unknown environment '" + env + "'");
  }
  return cfg;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "version") {
    cfg.version = parse_number<int>(key, value);
  } else if (key == "env") {
    cfg.env = value;
  } else if (key == "rule") {
    cfg.rule = parse_rule_kind(value);
  } else if (key == "hidden_layers") {
    cfg.hidden_layers.clear();
    for (const auto& part : split(value, ',')) cfg.hidden_layers.push_back(parse_number<std::size_t>(key, part));
  } else if (key == "episodes") {
    cfg.episodes = parse_number<std::size_t>(key, value);
  } else if (key == "seeds") {
    cfg.seeds.clear();
    for (const auto& part : split(value, ',')) cfg.seeds.push_back(parse_number<std::uint64_t>(key, part));
  } else if (key == "eta") {
    cfg.rule_config.eta = parse_number<double>(key, value);
  } else if (key == "sigma") {
    cfg.rule_config.sigma = parse_number<double>(key, value);
  } else if (key == "normalize_rpe") {
    cfg.rule_config.normalize_rpe = parse_bool(key, value);
  } else if (key == "rpe_floor") {
    cfg.rule_config.rpe_floor = parse_number<double>(key, value);
  } else if (key == "noise_scaling") {
    cfg.rule_config.noise_scaling = parse_noise_scaling(value);
  } else if (key == "lambda") {
    cfg.lambda = parse_number<double>(key, value);
  } else if (key == "clean_mode") {
    if (value == "true_clean") {
      cfg.clean_mode = CleanMode::true_clean;
      cfg.clean_samples = 1;
    } else if (value.starts_with("averaged_noisy")) {
      auto open = value.find_first_of("(:");
      if (open == std::string::npos) throw std::invalid_argument("config: averaged_noisy needs a pass count, e.g. averaged_noisy(2)");
      auto close = value.find(')', open);
      std::string count = trim(value.substr(open + 1, close == std::string::npos ? std::string::npos : close - open - 1));
      cfg.clean_mode = CleanMode::averaged_noisy;
      cfg.clean_samples = parse_number<std::size_t>(key, count);
    } else {
      throw std::invalid_argument("config: unknown clean_mode '" + value + "'");
    }
  } else if (key == "sample_from") {
    if (value == "noisy") cfg.sample_from_noisy = true;
    else if (value == "clean") cfg.sample_from_noisy = false;
    else throw std::invalid_argument("config: sample_from must be noisy or clean");
  } else if (key == "alpha") {
    cfg.alpha = parse_number<double>(key, value);
  } else if (key == "max_steps") {
    cfg.max_steps = parse_number<std::size_t>(key, value);
  } else if (key == "output_dir") {
    cfg.output_dir = value;
  } else if (key == "label") {
    cfg.label = value;
  } else if (key == "save_checkpoints") {
    cfg.save_checkpoints = parse_bool(key, value);
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

ExperimentConfig parse_config(std::istream& in) { return config_from_key_values(read_key_values(in)); }

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return parse_config(in);
}

void write_config(std::ostream& out, const ExperimentConfig& cfg) {
  out << "version = " << cfg.version << '\n';
  out << "env = " << cfg.env << '\n';
  out << "rule = " << to_string(cfg.rule) << '\n';
  out << "hidden_layers = " << join_sizes(cfg.hidden_layers) << '\n';
  out << "episodes = " << cfg.episodes << '\n';
  out << "seeds = ";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? "," : "") << cfg.seeds[i];
  out << '\n';
  out << "eta = " << format_double(cfg.rule_config.eta) << '\n';
  out << "sigma = " << format_double(cfg.rule_config.sigma) << '\n';
  out << "normalize_rpe = " << (cfg.rule_config.normalize_rpe ? "true" : "false") << '\n';
  out << "rpe_floor = " << format_double(cfg.rule_config.rpe_floor) << '\n';
  out << "noise_scaling = " << to_string(cfg.rule_config.noise_scaling) << '\n';
  out << "lambda = " << format_double(cfg.lambda) << '\n';
  if (cfg.clean_mode == CleanMode::true_clean) {
    out << "clean_mode = true_clean\n";
  } else {
    out << "clean_mode = averaged_noisy(" << cfg.clean_samples << ")\n";
  }
  out << "sample_from = " << (cfg.sample_from_noisy ? "noisy" : "clean") << '\n';
  out << "alpha = " << format_double(cfg.alpha) << '\n';
  out << "max_steps = " << cfg.max_steps << '\n';
  if (!cfg.output_dir.empty()) out << "output_dir = " << cfg.output_dir.string() << '\n';
  if (!cfg.label.empty()) out << "label = " << cfg.label << '\n';
  out << "save_checkpoints = " << (cfg.save_checkpoints ? "true" : "false") << '\n';
}

RunStreams::RunStreams(std::uint64_t seed)
    : init(RandomSource(seed).split(0)),
      env(RandomSource(seed).split(1)),
      noise(RandomSource(seed).split(2)),
      action(RandomSource(seed).split(3)) {}

std::vector<std::size_t> layer_sizes_for(const ExperimentConfig& cfg, const EnvSpec& spec) {
  std::vector<std::size_t> sizes;
  sizes.push_back(spec.obs_dim);
  sizes.insert(sizes.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
  sizes.push_back(spec.action_count);
  return sizes;
}

EpisodeRecord run_episode(Environment& env, PolicyNetwork& net, Learner& learner,
                          RunStreams& streams, const ExperimentConfig& cfg,
                          const EpisodeOptions& options) {
  EpisodeRecord record;
  StepResult current = env.reset(streams.env);
  const double sigma = cfg.rule_config.sigma;
  const bool exact = learner.kind() == RuleKind::exact;

  while (!current.done) {
    const Vector& obs = current.observation;
    std::size_t action = 0;
    double logp = 0.0;

    if (exact) {
      PassCache clean = net.clean_pass(obs);
      action = sample_action(clean.probs, streams.action);
      logp = log_prob(clean.probs, action);
      learner.accumulate(net.grad_logpi(clean, action));
    } else {
      const bool need_clean = learner.kind() == RuleKind::nrl || !cfg.sample_from_noisy;
      Vector clean_probs;
      if (need_clean) {
        clean_probs = cfg.clean_mode == CleanMode::averaged_noisy
                          ? net.averaged_noisy_output(obs, streams.noise, sigma, cfg.clean_samples)
                          : net.clean_pass(obs).probs;
      }
      auto [noisy, noise] = net.noisy_pass(obs, streams.noise, sigma);
      action = sample_action(cfg.sample_from_noisy ? noisy.probs : clean_probs, streams.action);
      const double clean_logp = need_clean ? log_prob(clean_probs, action) : 0.0;
      StepContext ctx = make_step_context(noisy, std::move(noise), action, clean_logp);
      logp = ctx.noisy_logp;
      learner.accumulate(ctx);
    }

    if (options.keep_observations) record.observations.push_back(obs);
    record.actions.push_back(action);
    record.log_probs.push_back(logp);

    current = env.step(action);
    record.rewards.push_back(current.reward);
    record.total_return += current.reward;
    ++record.steps;

    if (options.trajectory != nullptr) {
      options.trajectory->record(record.steps, env.state(), action, current.reward, current.done);
    }

    if (current.reward_event) {
      learner.reward(net, current.reward);
      ++record.apply_count;
      if (!net.all_finite()) throw NumericError("non-finite weights after update");
    }
  }
  return record;
}

double final_performance(const std::vector<double>& returns) {
  if (returns.empty()) throw std::invalid_argument("final_performance: empty return series");
  const std::size_t n = std::min(kFinalWindow, returns.size());
  double total = 0.0;
  for (std::size_t i = returns.size() - n; i < returns.size(); ++i) total += returns[i];
  return total / static_cast<double>(n);
}

double initial_performance(const std::vector<double>& returns, std::size_t window) {
  if (returns.empty()) throw std::invalid_argument("initial_performance: empty return series");
  const std::size_t n = std::min(window, returns.size());
  return std::accumulate(returns.begin(), returns.begin() + static_cast<std::ptrdiff_t>(n), 0.0) /
         static_cast<double>(n);
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving_average: window must be positive");
  std::vector<double> out(values.size());
  double running = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    running += values[i];
    if (i >= window) running -= values[i - window];
    out[i] = running / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

std::optional<std::size_t> episodes_to_threshold(const std::vector<double>& returns,
                                                 double threshold, std::size_t window) {
  const auto avg = moving_average(returns, window);
  for (std::size_t i = 0; i < avg.size(); ++i) {
    if (avg[i] >= threshold) return i;
  }
  return std::nullopt;
}

RunMetrics run_seed(const ExperimentConfig& cfg, std::uint64_t seed, PolicyNetwork* final_net) {
  cfg.validate();
  RunMetrics metrics;
  metrics.seed = seed;
  auto env = make_environment(cfg.env, cfg.max_steps);
  RunStreams streams(seed);
  PolicyNetwork net = PolicyNetwork::random(layer_sizes_for(cfg, env->spec()), streams.init, cfg.alpha);
  Learner learner(cfg.rule, cfg.rule_config, cfg.lambda, net);
  EpisodeOptions options;
  options.keep_observations = false;

  metrics.returns.reserve(cfg.episodes);
  metrics.steps.reserve(cfg.episodes);
  try {
    for (std::size_t e = 0; e < cfg.episodes; ++e) {
      EpisodeRecord record = run_episode(*env, net, learner, streams, cfg, options);
      metrics.returns.push_back(record.total_return);
      metrics.steps.push_back(record.steps);
    }
  } catch (const NumericError& err) {
    metrics.failed = true;
    metrics.failure = "episode " + std::to_string(metrics.returns.size()) + ": " + err.what();
  }
  metrics.final_performance = metrics.returns.empty()
                                  ? std::numeric_limits<double>::quiet_NaN()
                                  : final_performance(metrics.returns);
  if (final_net != nullptr) *final_net = net;
  return metrics;
}

Aggregate aggregate_runs(const std::vector<RunMetrics>& runs) {
  Aggregate agg;
  std::vector<double> finals;
  for (const auto& r : runs) {
    if (r.failed) {
      ++agg.failed_runs;
    } else {
      finals.push_back(r.final_performance);
    }
  }
  if (!finals.empty()) {
    agg.mean = std::accumulate(finals.begin(), finals.end(), 0.0) / static_cast<double>(finals.size());
    agg.min = *std::min_element(finals.begin(), finals.end());
    agg.max = *std::max_element(finals.begin(), finals.end());
  } else {
    agg.mean = agg.min = agg.max = std::numeric_limits<double>::quiet_NaN();
  }
  return agg;
}

std::filesystem::path metrics_path(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.output_dir / (cfg.run_label() + "_seed" + std::to_string(seed) + ".csv");
}

std::filesystem::path summary_path(const ExperimentConfig& cfg) {
  return cfg.output_dir / (cfg.run_label() + "_summary.json");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned jobs) {
  cfg.validate();
  ExperimentResult result;
  result.config = cfg;
  result.runs.resize(cfg.seeds.size());
  std::vector<PolicyNetwork> nets;
  if (cfg.save_checkpoints) nets.assign(cfg.seeds.size(), PolicyNetwork({1, 1}));

  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(cfg.seeds.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      result.runs[i] = run_seed(cfg, cfg.seeds[i], cfg.save_checkpoints ? &nets[i] : nullptr);
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  result.aggregate = aggregate_runs(result.runs);

  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
      std::ofstream out(metrics_path(cfg, result.runs[i].seed));
      if (!out) throw std::runtime_error("cannot write metrics to " + cfg.output_dir.string());
      write_metrics_csv(out, result.runs[i]);
      if (cfg.save_checkpoints && !result.runs[i].failed) {
        save_checkpoint(cfg.output_dir / (cfg.run_label() + "_seed" +
                                          std::to_string(result.runs[i].seed) + ".net"),
                        nets[i]);
      }
    }
    std::ofstream summary(summary_path(cfg));
    write_summary_json(summary, result);
  }
  return result;
}

void write_metrics_csv(std::ostream& out, const RunMetrics& run) {
  out << "episode,return,steps\n";
  for (std::size_t i = 0; i < run.returns.size(); ++i) {
    out << i << ',' << format_double(run.returns[i]) << ',' << run.steps[i] << '\n';
  }
  if (run.failed) out << "# failed: " << run.failure << '\n';
}

RunMetrics read_metrics_csv(std::istream& in) {
  RunMetrics run;
  std::string line;
  if (!std::getline(in, line) || trim(line) != "episode,return,steps") {
    throw std::runtime_error("metrics csv: missing header");
  }
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line.starts_with("# failed:")) {
      run.failed = true;
      run.failure = trim(line.substr(9));
      continue;
    }
    const auto parts = split(line, ',');
    if (parts.size() != 3) throw std::runtime_error("metrics csv: malformed row '" + line + "'");
    if (parse_number<std::size_t>("episode", parts[0]) != expected++) {
      throw std::runtime_error("metrics csv: episodes out of order");
    }
    run.returns.push_back(parse_number<double>("return", parts[1]));
    run.steps.push_back(parse_number<std::size_t>("steps", parts[2]));
  }
  if (run.returns.empty() && !run.failed) throw std::runtime_error("metrics csv: no rows");
  run.final_performance = run.returns.empty() ? std::numeric_limits<double>::quiet_NaN()
                                              : final_performance(run.returns);
  return run;
}

RunMetrics load_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file " + path.string());
  return read_metrics_csv(in);
}

void write_summary_json(std::ostream& out, const ExperimentResult& result) {
  using nlohmann::ordered_json;
  const auto number = [](double v) -> ordered_json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  ordered_json runs = ordered_json::array();
  for (const auto& r : result.runs) {
    ordered_json entry;
    entry["seed"] = r.seed;
    entry["episodes"] = r.returns.size();
    entry["final_performance"] = number(r.final_performance);
    entry["failed"] = r.failed;
    if (r.failed) entry["failure"] = r.failure;
    runs.push_back(entry);
  }
  ordered_json doc;
  doc["label"] = result.config.run_label();
  doc["env"] = result.config.env;
  doc["rule"] = to_string(result.config.rule);
  doc["hidden_layers"] = result.config.hidden_layers;
  doc["runs"] = runs;
  doc["final_performance"] = {{"mean", number(result.aggregate.mean)},
                              {"min", number(result.aggregate.min)},
                              {"max", number(result.aggregate.max)}};
  doc["failed_runs"] = result.aggregate.failed_runs;
  out << doc.dump(2) << '\n';
}

std::vector<ExperimentConfig> parse_grid(std::istream& in) {
  const KeyValues kv = read_key_values(in);
  std::vector<std::vector<std::string>> choices;
  for (const auto& [k, v] : kv) {
    auto alts = split(v, '|');
    if (alts.empty()) alts.push_back(v);
    choices.push_back(std::move(alts));
  }
  bool has_label = std::any_of(kv.begin(), kv.end(), [](const auto& p) { return p.first == "label"; });

  std::vector<ExperimentConfig> cells;
  std::vector<std::size_t> index(kv.size(), 0);
  while (true) {
    KeyValues cell;
    std::string suffix;
    for (std::size_t i = 0; i < kv.size(); ++i) {
      const std::string& value = choices[i][index[i]];
      cell.emplace_back(kv[i].first, value);
      if (choices[i].size() > 1 && kv[i].first != "env" && kv[i].first != "rule") {
        std::string tag = value;
        std::replace_if(tag.begin(), tag.end(), [](char c) { return !std::isalnum(static_cast<unsigned char>(c)); }, '-');
        suffix += "_" + kv[i].first + "-" + tag;
      }
    }
    ExperimentConfig cfg = config_from_key_values(cell);
    if (!has_label && !suffix.empty()) cfg.label = cfg.env + "_" + std::string(to_string(cfg.rule)) + suffix;
    cells.push_back(std::move(cfg));

    std::size_t k = 0;
    while (k < index.size() && ++index[k] == choices[k].size()) index[k++] = 0;
    if (k == index.size()) break;
  }
  return cells;
}

std::vector<ExperimentConfig> load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid " + path.string());
  return parse_grid(in);
}

}  // namespace nrl
