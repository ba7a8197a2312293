#pragma once

#include <span>
#include <string>
#include <vector>

#include "cfil/numcore/rng.hpp"

namespace cfil::envs {

using numcore::Rng;

// Immutable environment description. Dynamics are deterministic given
// (state, action); the true reward exists for evaluation only and is never
// visible to the imitation learner.
struct EnvSpec {
  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  int horizon = 200;
  double dt = 0.05;
};

// Built-in environments: "pointmass" and "pendulum".
EnvSpec make_env(const std::string& name);

// Point-mass goal position (the true-reward target; evaluation only).
std::pair<double, double> pointmass_goal();

// One dynamics step from an arbitrary state. Actions outside [-1,1] are
// clipped; *clipped reports whether clipping occurred.
void step_dynamics(const EnvSpec& spec, std::span<const double> s, std::span<const double> a,
                   std::span<double> s_next, bool* clipped = nullptr);

// True environment reward for the transition (evaluation only).
double env_reward(const EnvSpec& spec, std::span<const double> s, std::span<const double> a,
                  std::span<const double> s_next);

void initial_state(const EnvSpec& spec, Rng& rng, std::span<double> s_out);

// Episode bookkeeping around the stateless dynamics.
class Env {
 public:
  explicit Env(EnvSpec spec) : spec_(std::move(spec)), state_(spec_.state_dim) {}

  const EnvSpec& spec() const { return spec_; }
  void reset(Rng& rng);

  struct StepOut {
    double reward = 0.0;
    bool done = false;  // horizon reached (no terminal failure states)
  };
  StepOut step(std::span<const double> a);

  const std::vector<double>& state() const { return state_; }
  int t() const { return t_; }
  long clipped_actions() const { return clipped_; }

 private:
  EnvSpec spec_;
  std::vector<double> state_;
  int t_ = 0;
  long clipped_ = 0;
};

}  // namespace cfil::envs
