#include "cfil/analysis/bc.hpp"

#include <cmath>

#include "cfil/numcore/adam.hpp"
#include "cfil/numcore/errors.hpp"

namespace cfil::analysis {

using envs::Transition;
using numcore::Adam;
using numcore::Graph;
using numcore::Rng;
using numcore::Tensor;
using numcore::Var;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Trajectory rollout_policy(const envs::EnvSpec& spec, const rl::TanhGaussianPolicy& policy, Rng er) {
  envs::Env env(spec);
  env.reset(er);
  Trajectory traj;
  Rng unused(0);
  while (true) {
    Transition tr;
    tr.t = env.t();
    tr.s = env.state();
    tr.a = policy.act(env.state(), /*deterministic=*/true, unused);
    const auto out = env.step(tr.a);
    tr.s_next = env.state();
    tr.env_reward = out.reward;
    tr.done = out.done;
    traj.transitions.push_back(std::move(tr));
    if (out.done) break;
  }
  return traj;
}

}  // namespace

BcSnapshotSet train_bc(const DemoSet& demos, int iters, int snapshot_every, uint64_t seed) {
  if (iters < 0 || snapshot_every < 1) throw ArgumentError("train_bc: bad iteration counts");
  const envs::EnvSpec& spec = demos.spec();

  BcSnapshotSet out;
  out.spec = spec;
  out.policy.state_dim = spec.state_dim;
  out.policy.action_dim = spec.action_dim;
  Rng root(seed);
  Rng init_rng = root.split(1);
  out.policy.init({64, 64}, init_rng);

  // Flat list of (s, a) pairs of the demo set.
  std::vector<const Transition*> pairs;
  for (const auto& traj : demos.trajectories())
    for (const auto& tr : traj.transitions) pairs.push_back(&tr);
  if (pairs.empty()) throw ArgumentError("train_bc: empty demos");

  const int batch = std::min<int>(100, static_cast<int>(pairs.size()));
  Adam opt;
  Rng batch_rng = root.split(2);
  Rng rollout_root = root.split(3);

  auto snapshot = [&](int iter) {
    BcSnapshot snap;
    snap.iteration = iter;
    snap.policy_params = out.policy.params;
    snap.rollout = rollout_policy(spec, out.policy, rollout_root.split(static_cast<uint64_t>(iter)));
    snap.true_return = snap.rollout.total_return();
    out.snapshots.push_back(std::move(snap));
  };

  if (iters == 0) {
    snapshot(0);
    return out;
  }

  Tensor states(batch, spec.state_dim);
  Tensor pre_actions(batch, spec.action_dim);  // atanh of the demo actions
  Tensor squash_corr(batch, 1);
  for (int it = 1; it <= iters; ++it) {
    for (int i = 0; i < batch; ++i) {
      const Transition& tr = *pairs[static_cast<size_t>(batch_rng.randint(static_cast<int>(pairs.size())))];
      double corr = 0.0;
      for (int j = 0; j < spec.state_dim; ++j) states.at(i, j) = tr.s[j];
      for (int j = 0; j < spec.action_dim; ++j) {
        const double a = std::clamp(tr.a[j], -1.0 + 1e-6, 1.0 - 1e-6);
        pre_actions.at(i, j) = std::atanh(a);
        corr -= std::log(1.0 - a * a);
      }
      squash_corr.at(i, 0) = corr;
    }

    Graph g;
    auto [mean, log_std] = out.policy.dist_node(g, g.constant(states));
    Var z = g.mul(g.sub(g.constant(pre_actions), mean), g.exp(g.neg(log_std)));
    Var gauss = g.row_sum(g.add_scalar(g.sub(g.scale(g.square(z), -0.5), log_std), -0.5 * kLog2Pi));
    Var logp = g.add(gauss, g.constant(squash_corr));
    Var loss = g.neg(g.mean(logp));
    out.loss_curve.push_back(loss.scalar());
    g.backward(loss);
    const auto grads = g.grads_for(out.policy.params);
    opt.step(out.policy.params, grads, 1e-4);

    if (it % snapshot_every == 0) snapshot(it);
  }
  if (out.snapshots.empty()) snapshot(iters);
  return out;
}

}  // namespace cfil::analysis
