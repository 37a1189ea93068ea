#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nrl/gradcheck.hpp"
#include "nrl/harness.hpp"
#include "nrl/plot.hpp"

namespace fs = std::filesystem;

namespace {

void apply_overrides(nrl::ExperimentConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    nrl::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

void print_result(const nrl::ExperimentResult& result) {
  std::cout << std::setprecision(6);
  for (const auto& run : result.runs) {
    std::cout << result.config.run_label() << " seed " << run.seed << ": ";
    if (run.failed) {
      std::cout << "FAILED (" << run.failure << ")\n";
    } else {
      std::cout << "initial " << nrl::initial_performance(run.returns) << ", final "
                << run.final_performance << '\n';
    }
  }
  const auto& agg = result.aggregate;
  std::cout << result.config.run_label() << " final mean " << agg.mean << " [" << agg.min << ", "
            << agg.max << "]";
  if (agg.failed_runs > 0) std::cout << ", " << agg.failed_runs << " failed";
  std::cout << '\n';
}

int run_configs(std::vector<nrl::ExperimentConfig> configs, unsigned jobs) {
  int status = 0;
  for (auto& cfg : configs) {
    cfg.validate();
    const auto result = nrl::run_experiment(cfg, jobs);
    print_result(result);
    if (result.any_failed()) status = 1;
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Node-perturbation policy learning experiments"};
  app.require_subcommand(1);

  unsigned jobs = 0;
  app.add_option("-j,--jobs", jobs, "Worker threads (0 = all cores)");

  // train
  auto* train = app.add_subcommand("train", "Train one configuration over its seeds");
  std::string config_path;
  std::string env_name;
  std::string rule_name;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::vector<std::string> sets;
  std::string trajectory_path;
  train->add_option("-c,--config", config_path, "Config file (key = value)")->check(CLI::ExistingFile);
  train->add_option("--env", env_name, "Environment when no config file is given");
  train->add_option("--rule", rule_name, "Rule when no config file is given (nrl, rmhl, exact)");
  train->add_option("--seeds", seeds, "Seeds, overriding the config")->delimiter(',');
  train->add_option("-o,--out", out_dir, "Output directory");
  train->add_option("--set", sets, "Extra key=value overrides");
  train->add_option("--trajectory", trajectory_path,
                    "Write the first episode of the first seed as JSON lines");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run every configuration in a grid file");
  std::string grid_path;
  sweep->add_option("-g,--grid", grid_path, "Grid file")->required()->check(CLI::ExistingFile);
  sweep->add_option("-o,--out", out_dir, "Output directory, overriding the grid");

  // config
  auto* show = app.add_subcommand("config", "Print the default config for an environment and rule");
  show->add_option("--env", env_name)->required();
  show->add_option("--rule", rule_name)->required();

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "Tabulate the directional-derivative estimator");
  std::vector<std::size_t> dims{10};
  std::vector<std::size_t> ks{100, 1000, 10000};
  std::vector<double> sigmas{1e-4};
  std::vector<std::string> family_names{"gaussian", "uniform", "rademacher_bimodal"};
  std::uint64_t seed = 1;
  std::string table_path;
  grad->add_option("--n", dims, "Dimensions")->delimiter(',');
  grad->add_option("--k", ks, "Sample counts")->delimiter(',');
  grad->add_option("--sigma", sigmas, "Noise scales")->delimiter(',');
  grad->add_option("--family", family_names, "Noise families")->delimiter(',');
  grad->add_option("--seed", seed);
  grad->add_option("-o,--out", table_path, "CSV path (default stdout)");

  // approx
  auto* approx = app.add_subcommand("approx", "Averaged-noisy vs clean output error by pass count");
  std::vector<std::size_t> layers{32, 128, 3};
  std::vector<std::size_t> passes{2, 4, 8, 16, 32, 64};
  double approx_sigma = 1e-1;
  std::size_t observations = 500;
  approx->add_option("--layers", layers, "Layer sizes")->delimiter(',');
  approx->add_option("--passes", passes, "Pass counts")->delimiter(',');
  approx->add_option("--sigma", approx_sigma);
  approx->add_option("--observations", observations);
  approx->add_option("--seed", seed);
  approx->add_option("-o,--out", table_path, "CSV path (default stdout)");

  // plot
  auto* plot = app.add_subcommand("plot", "Render metrics files as SVG");
  std::string kind_name = "learning_curve";
  std::vector<std::string> inputs;
  std::string svg_path;
  std::size_t window = 50;
  plot->add_option("--kind", kind_name, "learning_curve, final_bar or approx_error");
  plot->add_option("--in", inputs, "Input CSV files")->required()->check(CLI::ExistingFile);
  plot->add_option("-o,--out", svg_path, "SVG path")->required();
  plot->add_option("--window", window, "Moving-average window");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      nrl::ExperimentConfig cfg;
      if (!config_path.empty()) {
        cfg = nrl::load_config(config_path);
      } else if (!env_name.empty() && !rule_name.empty()) {
        cfg = nrl::default_config(env_name, nrl::parse_rule_kind(rule_name));
      } else {
        std::cerr << "train: give --config or both --env and --rule\n";
        return 2;
      }
      apply_overrides(cfg, sets);
      if (!seeds.empty()) cfg.seeds = seeds;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      const int status = run_configs({cfg}, jobs);
      if (!trajectory_path.empty()) {
        std::ofstream out(trajectory_path);
        if (!out) throw std::runtime_error("cannot open " + trajectory_path);
        nrl::ExperimentConfig one = cfg;
        one.episodes = 1;
        auto env = nrl::make_environment(one.env, one.max_steps);
        nrl::RunStreams streams(one.seeds.front());
        nrl::PolicyNetwork net =
            nrl::PolicyNetwork::random(nrl::layer_sizes_for(one, env->spec()), streams.init, one.alpha);
        nrl::Learner learner(one.rule, one.rule_config, one.lambda, net);
        nrl::TrajectoryWriter writer(out);
        nrl::run_episode(*env, net, learner, streams, one, {&writer, false});
      }
      return status;
    }
    if (*sweep) {
      auto configs = nrl::load_grid(grid_path);
      if (!out_dir.empty()) {
        for (auto& cfg : configs) cfg.output_dir = out_dir;
      }
      return run_configs(std::move(configs), jobs);
    }
    if (*show) {
      nrl::write_config(std::cout, nrl::default_config(env_name, nrl::parse_rule_kind(rule_name)));
      return 0;
    }
    if (*grad) {
      std::vector<nrl::NoiseFamily> families;
      for (const auto& name : family_names) families.push_back(nrl::parse_noise_family(name));
      if (table_path.empty()) {
        nrl::write_estimator_table(std::cout, dims, ks, sigmas, families, seed);
      } else {
        std::ofstream out(table_path);
        if (!out) throw std::runtime_error("cannot open " + table_path);
        nrl::write_estimator_table(out, dims, ks, sigmas, families, seed);
      }
      return 0;
    }
    if (*approx) {
      nrl::RandomSource rng(seed);
      const auto net = nrl::PolicyNetwork::random(layers, rng);
      std::vector<nrl::Vector> obs;
      for (std::size_t i = 0; i < observations; ++i) obs.push_back(nrl::gaussian_vector(rng, layers.front(), 1.0));
      const auto curve = nrl::clean_pass_error_curve(net, obs, approx_sigma, passes, rng);
      if (table_path.empty()) {
        nrl::write_error_curve_csv(std::cout, curve);
      } else {
        std::ofstream out(table_path);
        if (!out) throw std::runtime_error("cannot open " + table_path);
        nrl::write_error_curve_csv(out, curve);
      }
      return 0;
    }
    if (*plot) {
      std::vector<fs::path> paths(inputs.begin(), inputs.end());
      nrl::emit_plot(nrl::parse_plot_kind(kind_name), paths, svg_path, window);
      std::cout << "wrote " << svg_path << '\n';
      return 0;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
