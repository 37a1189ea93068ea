#include "nrl/environments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include <json.hpp>

namespace nrl {

namespace {

void require_running(const Environment& env) {
  if (env.done()) throw EnvironmentError(env.spec().name + ": step called on a finished episode");
}

void require_action(const Environment& env, std::size_t action) {
  if (action >= env.spec().action_count) {
    throw EnvironmentError(env.spec().name + ": invalid action " + std::to_string(action));
  }
}

double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(a + std::numbers::pi, two_pi);
  if (wrapped < 0.0) wrapped += two_pi;
  return wrapped - std::numbers::pi;
}

}  // namespace

// Reaching

Reaching::Reaching(std::size_t ring_size, std::size_t max_steps) : ring_(ring_size) {
  if (ring_size < 2 || ring_size % 2 != 0) {
    throw std::invalid_argument("Reaching: ring size must be even and at least 2");
  }
  if (max_steps == 0) throw std::invalid_argument("Reaching: max_steps must be positive");
  spec_ = EnvSpec{"reaching", 2 * ring_size, 3, max_steps, RewardMode::per_step};
}

StepResult Reaching::reset(RandomSource& rng) {
  const std::size_t target =
      std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(ring_)), ring_ - 1);
  return reset_to(ring_ / 2, target);
}

StepResult Reaching::reset_to(std::size_t agent, std::size_t target) {
  if (agent >= ring_ || target >= ring_) throw std::out_of_range("Reaching: position off the ring");
  agent_ = agent;
  target_ = target;
  steps_ = 0;
  done_ = false;
  return StepResult{observe(), 0.0, false, false};
}

std::size_t Reaching::circular_distance() const {
  const std::size_t d = agent_ > target_ ? agent_ - target_ : target_ - agent_;
  return std::min(d, ring_ - d);
}

double Reaching::proximity_reward() const {
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(circular_distance()) /
                      static_cast<double>(ring_);
  return std::max(1.0 - angle, kFloorReward);
}

StepResult Reaching::step(std::size_t action) {
  require_running(*this);
  require_action(*this, action);
  if (action == left) agent_ = (agent_ + ring_ - 1) % ring_;
  if (action == right) agent_ = (agent_ + 1) % ring_;
  ++steps_;
  done_ = steps_ >= spec_.max_steps;
  return StepResult{observe(), proximity_reward(), done_, true};
}

Vector Reaching::state() const {
  return {static_cast<double>(agent_), static_cast<double>(target_)};
}

Vector Reaching::observe() const {
  Vector obs(2 * ring_);
  const double cell = 2.0 * std::numbers::pi / static_cast<double>(ring_);
  for (std::size_t i = 0; i < ring_; ++i) {
    const double theta = cell * static_cast<double>(i);
    obs[i] = std::cos(theta - cell * static_cast<double>(agent_));
    obs[ring_ + i] = std::cos(theta - cell * static_cast<double>(target_));
  }
  return obs;
}

// CartPole

CartPole::CartPole(std::size_t max_steps) {
  if (max_steps == 0) throw std::invalid_argument("CartPole: max_steps must be positive");
  spec_ = EnvSpec{"cartpole", 4, 2, max_steps, RewardMode::terminal};
}

StepResult CartPole::reset(RandomSource& rng) {
  CartPoleState s;
  s.x = 0.1 * rng.uniform() - 0.05;
  s.x_dot = 0.1 * rng.uniform() - 0.05;
  s.theta = 0.1 * rng.uniform() - 0.05;
  s.theta_dot = 0.1 * rng.uniform() - 0.05;
  return reset_to(s);
}

StepResult CartPole::reset_to(const CartPoleState& s) {
  state_ = s;
  steps_ = 0;
  done_ = false;
  return StepResult{observe(), 0.0, false, false};
}

std::array<double, 2> CartPole::accelerations(const CartPoleState& s, double force) {
  constexpr double total_mass = kCartMass + kPoleMass;
  constexpr double pole_mass_length = kPoleMass * kHalfLength;
  const double cos_t = std::cos(s.theta);
  const double sin_t = std::sin(s.theta);
  const double temp = (force + pole_mass_length * s.theta_dot * s.theta_dot * sin_t) / total_mass;
  const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                           (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
  const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;
  return {x_acc, theta_acc};
}

CartPoleState CartPole::integrate(const CartPoleState& s, double force) {
  const auto [x_acc, theta_acc] = accelerations(s, force);
  CartPoleState n;
  n.x_dot = s.x_dot + kTau * x_acc;
  n.x = s.x + kTau * n.x_dot;
  n.theta_dot = s.theta_dot + kTau * theta_acc;
  n.theta = s.theta + kTau * n.theta_dot;
  return n;
}

bool CartPole::out_of_bounds(const CartPoleState& s) {
  return std::abs(s.x) >= kXLimit || std::abs(s.theta) >= kThetaLimit;
}

StepResult CartPole::step(std::size_t action) {
  require_running(*this);
  require_action(*this, action);
  state_ = integrate(state_, action == push_right ? kForce : -kForce);
  ++steps_;
  done_ = out_of_bounds(state_) || steps_ >= spec_.max_steps;
  StepResult result{observe(), 0.0, done_, done_};
  if (done_) result.reward = static_cast<double>(steps_);
  return result;
}

Vector CartPole::state() const { return observe(); }

Vector CartPole::observe() const { return {state_.x, state_.x_dot, state_.theta, state_.theta_dot}; }

// Acrobot

Acrobot::Acrobot(std::size_t max_steps) {
  if (max_steps == 0) throw std::invalid_argument("Acrobot: max_steps must be positive");
  spec_ = EnvSpec{"acrobot", 6, 3, max_steps, RewardMode::terminal};
}

StepResult Acrobot::reset(RandomSource& rng) {
  AcrobotState s;
  s.theta1 = 0.2 * rng.uniform() - 0.1;
  s.theta2 = 0.2 * rng.uniform() - 0.1;
  s.dtheta1 = 0.2 * rng.uniform() - 0.1;
  s.dtheta2 = 0.2 * rng.uniform() - 0.1;
  return reset_to(s);
}

StepResult Acrobot::reset_to(const AcrobotState& s) {
  state_ = s;
  steps_ = 0;
  done_ = false;
  succeeded_ = false;
  return StepResult{observe(), 0.0, false, false};
}

double Acrobot::torque_for(std::size_t action) { return static_cast<double>(action) - 1.0; }

std::array<double, 4> Acrobot::derivatives(const AcrobotState& s, double torque) {
  constexpr double m1 = kLinkMass1, m2 = kLinkMass2, l1 = kLinkLength1;
  constexpr double lc1 = kLinkCom1, lc2 = kLinkCom2, i1 = kLinkMoi, i2 = kLinkMoi, g = kGravity;
  const double sin2 = std::sin(s.theta2);
  const double cos2 = std::cos(s.theta2);
  const double d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * cos2) + i1 + i2;
  const double d2 = m2 * (lc2 * lc2 + l1 * lc2 * cos2) + i2;
  // Gravity terms written with sin so the hanging rest state is an exact equilibrium.
  const double phi2 = m2 * lc2 * g * std::sin(s.theta1 + s.theta2);
  const double phi1 = -m2 * l1 * lc2 * s.dtheta2 * s.dtheta2 * sin2 -
                      2.0 * m2 * l1 * lc2 * s.dtheta2 * s.dtheta1 * sin2 +
                      (m1 * lc1 + m2 * l1) * g * std::sin(s.theta1) + phi2;
  const double ddtheta2 =
      (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * s.dtheta1 * s.dtheta1 * sin2 - phi2) /
      (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
  const double ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
  return {s.dtheta1, s.dtheta2, ddtheta1, ddtheta2};
}

AcrobotState Acrobot::integrate(const AcrobotState& s, double torque) {
  const auto shifted = [&](const std::array<double, 4>& k, double h) {
    return AcrobotState{s.theta1 + h * k[0], s.theta2 + h * k[1], s.dtheta1 + h * k[2],
                        s.dtheta2 + h * k[3]};
  };
  const auto k1 = derivatives(s, torque);
  const auto k2 = derivatives(shifted(k1, kDt / 2.0), torque);
  const auto k3 = derivatives(shifted(k2, kDt / 2.0), torque);
  const auto k4 = derivatives(shifted(k3, kDt), torque);
  std::array<double, 4> next{};
  const double y0[4] = {s.theta1, s.theta2, s.dtheta1, s.dtheta2};
  for (std::size_t i = 0; i < 4; ++i) {
    next[i] = y0[i] + kDt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return AcrobotState{wrap_angle(next[0]), wrap_angle(next[1]),
                      std::clamp(next[2], -kMaxVel1, kMaxVel1),
                      std::clamp(next[3], -kMaxVel2, kMaxVel2)};
}

bool Acrobot::reached_goal(const AcrobotState& s) {
  return -std::cos(s.theta1) - std::cos(s.theta2 + s.theta1) > 1.0;
}

double Acrobot::energy(const AcrobotState& s) {
  constexpr double m1 = kLinkMass1, m2 = kLinkMass2, l1 = kLinkLength1;
  constexpr double lc1 = kLinkCom1, lc2 = kLinkCom2, i1 = kLinkMoi, i2 = kLinkMoi, g = kGravity;
  const double cos2 = std::cos(s.theta2);
  const double d11 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * cos2) + i1 + i2;
  const double d12 = m2 * (lc2 * lc2 + l1 * lc2 * cos2) + i2;
  const double d22 = m2 * lc2 * lc2 + i2;
  const double kinetic = 0.5 * (d11 * s.dtheta1 * s.dtheta1 + 2.0 * d12 * s.dtheta1 * s.dtheta2 +
                                d22 * s.dtheta2 * s.dtheta2);
  const double potential = -(m1 * lc1 + m2 * l1) * g * std::cos(s.theta1) -
                           m2 * lc2 * g * std::cos(s.theta1 + s.theta2);
  return kinetic + potential;
}

StepResult Acrobot::step(std::size_t action) {
  require_running(*this);
  require_action(*this, action);
  state_ = integrate(state_, torque_for(action));
  ++steps_;
  succeeded_ = reached_goal(state_);
  done_ = succeeded_ || steps_ >= spec_.max_steps;
  StepResult result{observe(), 0.0, done_, done_};
  if (succeeded_) {
    result.reward = static_cast<double>(spec_.max_steps - steps_) / static_cast<double>(spec_.max_steps);
  }
  return result;
}

Vector Acrobot::state() const {
  return {state_.theta1, state_.theta2, state_.dtheta1, state_.dtheta2};
}

Vector Acrobot::observe() const {
  return {std::cos(state_.theta1), std::sin(state_.theta1), std::cos(state_.theta2),
          std::sin(state_.theta2), state_.dtheta1,          state_.dtheta2};
}

std::unique_ptr<Environment> make_environment(std::string_view name, std::size_t max_steps) {
  if (name == "reaching") return std::make_unique<Reaching>(16, max_steps ? max_steps : 100);
  if (name == "cartpole") return std::make_unique<CartPole>(max_steps ? max_steps : 500);
  if (name == "acrobot") return std::make_unique<Acrobot>(max_steps ? max_steps : 500);
  throw std::invalid_argument("unknown environment '" + std::string(name) + "'");
}

void TrajectoryWriter::record(std::size_t step, const Vector& state, std::size_t action,
                              double reward, bool done) {
  nlohmann::json line = {
      {"step", step}, {"state", state}, {"action", action}, {"reward", reward}, {"done", done}};
  out_ << line.dump() << '\n';
}

}  // namespace nrl
