#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cfil/numcore/adam.hpp"
#include "cfil/numcore/graph.hpp"
#include "cfil/numcore/mlp.hpp"
#include "cfil/numcore/rng.hpp"
#include "cfil/rl/replay.hpp"

namespace cfil::rl {

using numcore::Adam;
using numcore::Graph;
using numcore::MlpSpec;
using numcore::ParamStore;
using numcore::Tensor;
using numcore::Var;

// Squashed-Gaussian policy head: the network emits per-dimension mean and
// log-std; actions are tanh of the reparameterized Gaussian sample.
struct TanhGaussianPolicy {
  int state_dim = 0;
  int action_dim = 0;
  MlpSpec spec;
  ParamStore params;

  void init(const std::vector<int>& hidden, numcore::Rng& rng);
  std::vector<double> act(std::span<const double> s, bool deterministic, numcore::Rng& rng) const;
  // (mean, clamped log-std) nodes for a state batch.
  std::pair<Var, Var> dist_node(Graph& g, Var states) const;
  // Per-sample log pi(a|s) for squashed actions a = tanh(u), u = mean + std*eps.
  // eps is the (n x da) noise that generated the actions.
  Var log_prob_node(Graph& g, Var mean, Var log_std, const Tensor& eps) const;
};

struct SacConfig {
  int state_dim = 0;
  int action_dim = 0;
  std::vector<int> hidden = {64, 64};
  double gamma = 0.99;
  double polyak = 0.995;
  double lr = 1e-3;
  int batch_size = 100;
  double target_entropy = 0.0;  // 0 means -action_dim
  double init_alpha = 0.2;
  bool learned_alpha = false;   // fixed entropy coefficient by default
  uint64_t seed = 0;
};

// Soft actor-critic with twin critics, target networks and a learned
// entropy temperature. Rewards are recomputed by the caller at update time,
// so stored rewards never go stale against the current estimator.
class SacLearner {
 public:
  explicit SacLearner(const SacConfig& cfg);

  const SacConfig& config() const { return cfg_; }
  std::vector<double> act(std::span<const double> s, bool deterministic, numcore::Rng& rng) const {
    return policy_.act(s, deterministic, rng);
  }

  using RewardFn = std::function<std::vector<double>(const std::vector<const Transition*>&)>;

  struct UpdateDiag {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double alpha = 0.0;
    double mean_q = 0.0;
    double mean_reward = 0.0;
  };

  UpdateDiag update(const ReplayBuffer& buffer, const RewardFn& reward_fn, numcore::Rng& rng);

  // Twin-critic regression loss against fixed targets (used by update and
  // by gradient checks).
  Var critic_loss_node(Graph& g, const Tensor& states, const Tensor& actions, const Tensor& targets) const;

  double alpha() const;

  TanhGaussianPolicy& policy() { return policy_; }
  ParamStore& q1_params() { return q1_; }
  ParamStore& q2_params() { return q2_; }
  ParamStore& q1_target_params() { return q1_targ_; }
  ParamStore& q2_target_params() { return q2_targ_; }
  double polyak() const { return cfg_.polyak; }
  void set_polyak(double p) { cfg_.polyak = p; }

  void save_policy(const std::string& path) const { policy_.params.save(path); }

 private:
  Var q_node(Graph& g, const ParamStore& store, Var state_action) const;

  SacConfig cfg_;
  MlpSpec q_spec_;
  TanhGaussianPolicy policy_;
  ParamStore q1_, q2_, q1_targ_, q2_targ_;
  ParamStore alpha_;  // single log-temperature parameter
  Adam pi_opt_, q_opt_, alpha_opt_;
};

void polyak_update(ParamStore& target, const ParamStore& online, double rho);

}  // namespace cfil::rl
