#include "nrl/policy_net.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace nrl {

namespace {

void validate_layout(const std::vector<std::size_t>& sizes, double alpha) {
  if (sizes.size() < 2) throw ShapeError("PolicyNetwork: need at least input and output sizes");
  for (std::size_t s : sizes) {
    if (s == 0) throw ShapeError("PolicyNetwork: layer sizes must be positive");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("PolicyNetwork: LeakyReLU slope must lie in (0, 1)");
  }
}

}  // namespace

PolicyNetwork::PolicyNetwork(std::vector<std::size_t> layer_sizes, double alpha)
    : sizes_(std::move(layer_sizes)), alpha_(alpha) {
  validate_layout(sizes_, alpha_);
  for (std::size_t l = 1; l < sizes_.size(); ++l) weights_.emplace_back(sizes_[l], sizes_[l - 1]);
}

PolicyNetwork::PolicyNetwork(std::vector<std::size_t> layer_sizes, std::vector<Matrix> weights,
                             double alpha)
    : sizes_(std::move(layer_sizes)), weights_(std::move(weights)), alpha_(alpha) {
  validate_layout(sizes_, alpha_);
  if (weights_.size() != sizes_.size() - 1) {
    throw ShapeError("PolicyNetwork: expected " + std::to_string(sizes_.size() - 1) +
                     " weight matrices, got " + std::to_string(weights_.size()));
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].rows() != sizes_[l + 1] || weights_[l].cols() != sizes_[l]) {
      throw ShapeError("PolicyNetwork: weight " + std::to_string(l) + " has the wrong shape");
    }
    if (!weights_[l].all_finite()) throw NumericError("PolicyNetwork: non-finite weight");
  }
}

PolicyNetwork PolicyNetwork::random(std::vector<std::size_t> layer_sizes, RandomSource& rng,
                                    double alpha) {
  PolicyNetwork net(std::move(layer_sizes), alpha);
  for (auto& w : net.weights_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (double& x : w.data()) x = bound * (2.0 * rng.uniform() - 1.0);
  }
  return net;
}

bool PolicyNetwork::all_finite() const {
  for (const auto& w : weights_) {
    if (!w.all_finite()) return false;
  }
  return true;
}

void PolicyNetwork::check_input(std::span<const double> obs) const {
  if (obs.size() != input_dim()) {
    throw ShapeError("PolicyNetwork: observation has " + std::to_string(obs.size()) +
                     " entries, network expects " + std::to_string(input_dim()));
  }
}

PassCache PolicyNetwork::forward(std::span<const double> obs, NoiseRecord* noise,
                                 RandomSource* rng) const {
  check_input(obs);
  const std::size_t depth = weights_.size();
  PassCache cache;
  cache.noisy = noise != nullptr;
  cache.inputs.reserve(depth);
  cache.pre.reserve(depth);
  cache.post.reserve(depth);
  cache.inputs.emplace_back(obs.begin(), obs.end());
  for (std::size_t l = 0; l < depth; ++l) {
    Vector h = matvec(weights_[l], cache.inputs[l]);
    if (noise != nullptr) {
      Vector xi = gaussian_vector(*rng, h.size(), noise->sigma);
      const double sq = squared_norm(xi);
      Vector scaled(xi.size(), 0.0);
      if (sq > 0.0) {
        for (std::size_t i = 0; i < xi.size(); ++i) scaled[i] = xi[i] / sq;
      }
      for (std::size_t i = 0; i < h.size(); ++i) h[i] += xi[i];
      noise->raw.push_back(std::move(xi));
      noise->scaled.push_back(std::move(scaled));
    }
    const bool last = l + 1 == depth;
    Vector x = last ? softmax(h) : leaky_relu(h, alpha_);
    cache.pre.push_back(std::move(h));
    if (!last) cache.inputs.push_back(x);
    cache.post.push_back(std::move(x));
  }
  cache.probs = cache.post.back();
  return cache;
}

PassCache PolicyNetwork::clean_pass(std::span<const double> obs) const {
  return forward(obs, nullptr, nullptr);
}

std::pair<PassCache, NoiseRecord> PolicyNetwork::noisy_pass(std::span<const double> obs,
                                                            RandomSource& rng,
                                                            double sigma) const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("noisy_pass: sigma must be finite and non-negative");
  }
  NoiseRecord noise;
  noise.sigma = sigma;
  noise.raw.reserve(depth());
  noise.scaled.reserve(depth());
  PassCache cache = forward(obs, &noise, &rng);
  return {std::move(cache), std::move(noise)};
}

std::vector<Matrix> PolicyNetwork::grad_logpi(const PassCache& cache, std::size_t action) const {
  if (cache.noisy) throw std::invalid_argument("grad_logpi: requires a clean-pass cache");
  if (cache.depth() != depth()) throw ShapeError("grad_logpi: cache depth does not match network");
  if (action >= output_dim()) throw std::out_of_range("grad_logpi: action index out of range");

  std::vector<Matrix> grads(depth());
  // d log softmax_a / d h = onehot(a) - y
  Vector delta = cache.probs;
  for (double& d : delta) d = -d;
  delta[action] += 1.0;
  for (std::size_t l = depth(); l-- > 0;) {
    grads[l] = outer(delta, cache.inputs[l]);
    if (l == 0) break;
    Vector back = matvec_transposed(weights_[l], delta);
    const Vector& h_prev = cache.pre[l - 1];
    for (std::size_t i = 0; i < back.size(); ++i) back[i] *= leaky_relu_derivative(h_prev[i], alpha_);
    delta = std::move(back);
  }
  return grads;
}

Vector PolicyNetwork::averaged_noisy_output(std::span<const double> obs, RandomSource& rng,
                                            double sigma, std::size_t samples) const {
  if (samples == 0) throw std::invalid_argument("averaged_noisy_output: need at least one pass");
  Vector mean(output_dim(), 0.0);
  for (std::size_t i = 0; i < samples; ++i) {
    auto [cache, noise] = noisy_pass(obs, rng, sigma);
    axpy(1.0, cache.probs, mean);
  }
  double total = 0.0;
  for (double p : mean) total += p;
  for (double& p : mean) p /= total;
  return mean;
}

std::size_t sample_action(std::span<const double> probs, RandomSource& rng) {
  if (probs.empty()) throw std::invalid_argument("sample_action: empty distribution");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("sample_action: probabilities must be finite and non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("sample_action: probabilities do not sum to one");
  }
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cumulative += probs[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;
}

std::size_t greedy_action(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

double log_prob(std::span<const double> probs, std::size_t action) {
  if (action >= probs.size()) throw std::out_of_range("log_prob: action index out of range");
  return std::log(std::max(probs[action], kLogProbFloor));
}

void write_checkpoint(std::ostream& out, const PolicyNetwork& net) {
  out << "nrl-policy " << kCheckpointVersion << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "alpha " << net.alpha() << '\n';
  out << "layers";
  for (std::size_t s : net.layer_sizes()) out << ' ' << s;
  out << '\n';
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Matrix& w = net.weight(l);
    out << "weights " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
    for (std::size_t r = 0; r < w.rows(); ++r) {
      auto row = w.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << row[c];
      out << '\n';
    }
  }
}

PolicyNetwork read_checkpoint(std::istream& in) {
  auto fail = [](const std::string& why) {
    return std::runtime_error("read_checkpoint: " + why);
  };
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "nrl-policy") throw fail("missing header");
  if (version != kCheckpointVersion) throw fail("unsupported version " + std::to_string(version));

  double alpha = 0.0;
  if (!(in >> tag >> alpha) || tag != "alpha") throw fail("missing alpha");

  if (!(in >> tag) || tag != "layers") throw fail("missing layers");
  std::string line;
  std::getline(in, line);
  std::istringstream sizes_in(line);
  std::vector<std::size_t> sizes;
  for (std::size_t s; sizes_in >> s;) sizes.push_back(s);
  if (sizes.size() < 2) throw fail("need at least two layer sizes");

  std::vector<Matrix> weights;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    std::size_t index = 0, rows = 0, cols = 0;
    if (!(in >> tag >> index >> rows >> cols) || tag != "weights" || index != l) {
      throw fail("malformed weights block " + std::to_string(l));
    }
    std::vector<double> data(rows * cols);
    for (double& x : data) {
      if (!(in >> x)) throw fail("truncated weights block " + std::to_string(l));
    }
    weights.emplace_back(rows, cols, std::move(data));
  }
  return PolicyNetwork(std::move(sizes), std::move(weights), alpha);
}

void save_checkpoint(const std::filesystem::path& path, const PolicyNetwork& net) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  write_checkpoint(out, net);
}

PolicyNetwork load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace nrl
