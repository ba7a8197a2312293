#pragma once

#include <vector>

#include "cfil/envs/demos.hpp"
#include "cfil/rl/sac.hpp"

namespace cfil::analysis {

using envs::DemoSet;
using envs::Trajectory;
using numcore::ParamStore;

// One intermediate behavioral-cloning policy with its recorded rollout.
struct BcSnapshot {
  int iteration = 0;
  ParamStore policy_params;
  Trajectory rollout;
  double true_return = 0.0;
};

struct BcSnapshotSet {
  envs::EnvSpec spec;
  rl::TanhGaussianPolicy policy;  // architecture; params swapped per snapshot
  std::vector<BcSnapshot> snapshots;
  std::vector<double> loss_curve;  // per-iteration BC loss
};

// Maximum-likelihood behavioral cloning of a tanh-Gaussian policy on the
// demo state-action pairs, with a deterministic rollout recorded every
// snapshot_every iterations. iters = 0 records the untrained policy once.
BcSnapshotSet train_bc(const DemoSet& demos, int iters, int snapshot_every, uint64_t seed);

}  // namespace cfil::analysis
