#include "cfil/envs/env.hpp"

#include <cmath>

#include "cfil/numcore/errors.hpp"

namespace cfil::envs {

namespace {

constexpr double kFriction = 0.1;
constexpr double kArenaHalf = 3.0;   // walled arena: positions live in [-3, 3]^2
constexpr double kGoalX = 0.8;       // goal sits away from the origin so that
constexpr double kGoalY = 0.6;       // no expert-visited coordinate is ~0
constexpr double kStartX = 1.8;
constexpr double kStartY = 0.6;
constexpr double kGravity = 10.0;   // g/l for the pendulum
constexpr double kTorqueGain = 2.0; // underactuated: max torque < peak gravity torque
constexpr double kMaxSpeed = 8.0;

double clip_unit(double v, bool* clipped) {
  if (v > 1.0) {
    if (clipped) *clipped = true;
    return 1.0;
  }
  if (v < -1.0) {
    if (clipped) *clipped = true;
    return -1.0;
  }
  return v;
}

double wrap_pi(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace

std::pair<double, double> pointmass_goal() { return {kGoalX, kGoalY}; }

EnvSpec make_env(const std::string& name) {
  if (name == "pointmass") return EnvSpec{"pointmass", 4, 2, 200, 0.05};
  if (name == "pendulum") return EnvSpec{"pendulum", 3, 1, 200, 0.05};
  throw ArgumentError("make_env: unknown environment '" + name + "'");
}

void step_dynamics(const EnvSpec& spec, std::span<const double> s, std::span<const double> a,
                   std::span<double> s_next, bool* clipped) {
  if (static_cast<int>(s.size()) != spec.state_dim || static_cast<int>(a.size()) != spec.action_dim)
    throw DimensionError("step_dynamics: state or action dimension mismatch");
  for (double v : s)
    if (!std::isfinite(v)) throw NumericError("step_dynamics received non-finite state");

  if (spec.name == "pointmass") {
    // State (px, py, vx, vy); semi-implicit Euler with linear friction
    // inside a walled arena. Hitting a wall stops that velocity component.
    const double fx = clip_unit(a[0], clipped);
    const double fy = clip_unit(a[1], clipped);
    double vx = s[2] + spec.dt * (fx - kFriction * s[2]);
    double vy = s[3] + spec.dt * (fy - kFriction * s[3]);
    double px = s[0] + spec.dt * vx;
    double py = s[1] + spec.dt * vy;
    if (px > kArenaHalf || px < -kArenaHalf) {
      px = std::clamp(px, -kArenaHalf, kArenaHalf);
      vx = 0.0;
    }
    if (py > kArenaHalf || py < -kArenaHalf) {
      py = std::clamp(py, -kArenaHalf, kArenaHalf);
      vy = 0.0;
    }
    s_next[0] = px;
    s_next[1] = py;
    s_next[2] = vx;
    s_next[3] = vy;
    return;
  }
  if (spec.name == "pendulum") {
    // State (cos th, sin th, omega), th measured from the hanging position;
    // the upright target is th = pi.
    const double torque = kTorqueGain * clip_unit(a[0], clipped);
    const double th = std::atan2(s[1], s[0]);
    double omega = s[2] + spec.dt * (-kGravity * std::sin(th) + torque);
    omega = std::clamp(omega, -kMaxSpeed, kMaxSpeed);
    const double th_next = th + spec.dt * omega;
    s_next[0] = std::cos(th_next);
    s_next[1] = std::sin(th_next);
    s_next[2] = omega;
    return;
  }
  throw ArgumentError("step_dynamics: unknown environment '" + spec.name + "'");
}

double env_reward(const EnvSpec& spec, std::span<const double> s, std::span<const double> a,
                  std::span<const double> s_next) {
  (void)s;
  if (spec.name == "pointmass") {
    const double dx = s_next[0] - kGoalX, dy = s_next[1] - kGoalY;
    return -std::sqrt(dx * dx + dy * dy);
  }
  if (spec.name == "pendulum") {
    const double th = std::atan2(s_next[1], s_next[0]);
    const double up_err = wrap_pi(th - M_PI);
    return -(up_err * up_err + 0.1 * s_next[2] * s_next[2] + 0.001 * a[0] * a[0]);
  }
  throw ArgumentError("env_reward: unknown environment '" + spec.name + "'");
}

void initial_state(const EnvSpec& spec, Rng& rng, std::span<double> s_out) {
  if (spec.name == "pointmass") {
    // Start at rest, unit distance from the goal.
    s_out[0] = kStartX + rng.uniform(-0.02, 0.02);
    s_out[1] = kStartY + rng.uniform(-0.02, 0.02);
    s_out[2] = 0.0;
    s_out[3] = 0.0;
    return;
  }
  if (spec.name == "pendulum") {
    const double th = rng.uniform(-0.02, 0.02);  // hanging down
    s_out[0] = std::cos(th);
    s_out[1] = std::sin(th);
    s_out[2] = 0.0;
    return;
  }
  throw ArgumentError("initial_state: unknown environment '" + spec.name + "'");
}

void Env::reset(Rng& rng) {
  initial_state(spec_, rng, state_);
  t_ = 0;
}

Env::StepOut Env::step(std::span<const double> a) {
  std::vector<double> next(spec_.state_dim);
  bool clipped = false;
  step_dynamics(spec_, state_, a, next, &clipped);
  if (clipped) ++clipped_;
  const double r = env_reward(spec_, state_, a, next);
  state_ = std::move(next);
  ++t_;
  return StepOut{r, t_ >= spec_.horizon};
}

}  // namespace cfil::envs
