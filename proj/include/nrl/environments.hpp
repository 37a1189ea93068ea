#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>

#include "nrl/numerics.hpp"

namespace nrl {

enum class RewardMode { per_step, terminal };

struct EnvSpec {
  std::string name;
  std::size_t obs_dim = 0;
  std::size_t action_count = 0;
  std::size_t max_steps = 0;
  RewardMode reward_mode = RewardMode::per_step;
};

struct StepResult {
  Vector observation;
  double reward = 0.0;
  bool done = false;
  /// A reward was delivered on this step and a weight update should fire.
  bool reward_event = false;
};

/// Raised when an environment is stepped after its episode ended or is
/// handed an action outside its action set.
class EnvironmentError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual StepResult reset(RandomSource& rng) = 0;
  virtual StepResult step(std::size_t action) = 0;
  /// Raw simulator state (not the observation), for trajectory dumps.
  virtual Vector state() const = 0;
  virtual std::size_t steps_taken() const = 0;
  virtual bool done() const = 0;
};

/// Agent and target on a ring of cells at angles θᵢ = 2πi / ring_size. The
/// agent moves one cell left, stays, or moves one cell right.
///
/// Observation: cosine tuning curves cos(θᵢ − θ_agent) for every cell, then
/// cos(θᵢ − θ_target). Each episode starts the agent at cell ring_size / 2 and
/// draws the target uniformly. Every step pays max(1 − Δθ, −0.1), with Δθ the
/// angular distance in radians after the move.
class Reaching final : public Environment {
 public:
  enum Action : std::size_t { left = 0, stay = 1, right = 2 };

  explicit Reaching(std::size_t ring_size = 16, std::size_t max_steps = 100);

  const EnvSpec& spec() const override { return spec_; }
  StepResult reset(RandomSource& rng) override;
  StepResult step(std::size_t action) override;
  Vector state() const override;
  std::size_t steps_taken() const override { return steps_; }
  bool done() const override { return done_; }

  /// Places agent and target directly; starts a fresh episode.
  StepResult reset_to(std::size_t agent, std::size_t target);

  std::size_t agent() const { return agent_; }
  std::size_t target() const { return target_; }
  std::size_t circular_distance() const;
  double proximity_reward() const;

  static constexpr double kFloorReward = -0.1;

 private:
  Vector observe() const;

  EnvSpec spec_;
  std::size_t ring_;
  std::size_t agent_ = 0;
  std::size_t target_ = 0;
  std::size_t steps_ = 0;
  bool done_ = true;
};

struct CartPoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
};

/// Classic cart-pole balancing with a single terminal reward equal to the
/// number of steps survived.
class CartPole final : public Environment {
 public:
  enum Action : std::size_t { push_left = 0, push_right = 1 };

  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForce = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kThetaLimit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
  static constexpr double kXLimit = 2.4;

  explicit CartPole(std::size_t max_steps = 500);

  const EnvSpec& spec() const override { return spec_; }
  StepResult reset(RandomSource& rng) override;
  StepResult step(std::size_t action) override;
  Vector state() const override;
  std::size_t steps_taken() const override { return steps_; }
  bool done() const override { return done_; }

  StepResult reset_to(const CartPoleState& s);
  const CartPoleState& physical_state() const { return state_; }

  /// (ẍ, θ̈) for a state and applied horizontal force.
  static std::array<double, 2> accelerations(const CartPoleState& s, double force);
  /// One semi-implicit Euler step of length kTau.
  static CartPoleState integrate(const CartPoleState& s, double force);
  static bool out_of_bounds(const CartPoleState& s);

 private:
  Vector observe() const;

  EnvSpec spec_;
  CartPoleState state_;
  std::size_t steps_ = 0;
  bool done_ = true;
};

struct AcrobotState {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double dtheta1 = 0.0;
  double dtheta2 = 0.0;
};

/// Two-link underactuated swing-up. Torque acts on the second joint; the
/// episode succeeds once the tip rises one link length above the pivot. The
/// single terminal reward is the fraction of the step budget left unused, or
/// zero on timeout.
class Acrobot final : public Environment {
 public:
  static constexpr double kDt = 0.2;
  static constexpr double kLinkLength1 = 1.0;
  static constexpr double kLinkMass1 = 1.0;
  static constexpr double kLinkMass2 = 1.0;
  static constexpr double kLinkCom1 = 0.5;
  static constexpr double kLinkCom2 = 0.5;
  static constexpr double kLinkMoi = 1.0;
  static constexpr double kGravity = 9.8;
  static constexpr double kMaxVel1 = 4.0 * 3.14159265358979323846;
  static constexpr double kMaxVel2 = 9.0 * 3.14159265358979323846;

  explicit Acrobot(std::size_t max_steps = 500);

  const EnvSpec& spec() const override { return spec_; }
  StepResult reset(RandomSource& rng) override;
  StepResult step(std::size_t action) override;
  Vector state() const override;
  std::size_t steps_taken() const override { return steps_; }
  bool done() const override { return done_; }

  StepResult reset_to(const AcrobotState& s);
  const AcrobotState& physical_state() const { return state_; }
  bool succeeded() const { return succeeded_; }

  static double torque_for(std::size_t action);
  /// Time derivative of (θ₁, θ₂, θ̇₁, θ̇₂) under a torque.
  static std::array<double, 4> derivatives(const AcrobotState& s, double torque);
  /// One RK4 step of length kDt followed by angle wrapping and velocity clipping.
  static AcrobotState integrate(const AcrobotState& s, double torque);
  static bool reached_goal(const AcrobotState& s);
  /// Kinetic plus potential energy, with zero potential at the pivot.
  static double energy(const AcrobotState& s);

 private:
  Vector observe() const;

  EnvSpec spec_;
  AcrobotState state_;
  std::size_t steps_ = 0;
  bool done_ = true;
  bool succeeded_ = false;
};

std::unique_ptr<Environment> make_environment(std::string_view name, std::size_t max_steps = 0);

/// Writes one JSON object per line: step, state, action, reward, done.
class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(std::ostream& out) : out_(out) {}
  void record(std::size_t step, const Vector& state, std::size_t action, double reward, bool done);

 private:
  std::ostream& out_;
};

}  // namespace nrl
