#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cfil/envs/demos.hpp"
#include "cfil/rl/sac.hpp"
#include "cfil/run/variants.hpp"

namespace cfil::run {

// One metrics row per epoch (eval_period env steps).
struct EpochMetrics {
  int epoch = 0;
  long env_steps = 0;
  double eval_mean = 0.0;
  double eval_std = 0.0;
  double normalized = 0.0;
  double dv = 0.0;   // mean J over the epoch's density updates
  double reg = 0.0;  // mean L over the epoch's density updates
  double mean_synthetic_reward = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  double expert_ref = 0.0;
  double random_ref = 0.0;
  double normalized_score = 0.0;  // asymptotic (last 5 evaluations)
  long density_updates = 0;       // update blocks executed
  bool diverged = false;
  std::string divergence_reason;
  long divergence_step = -1;
};

// Min-max normalization of the asymptotic return: the mean of the last five
// evaluations, mapped so the random reference scores 0 and the expert
// reference scores 1.
double normalized_score(std::span<const double> eval_returns, double expert_ref, double random_ref);

struct TrainCallbacks {
  // Called after each evaluation epoch; gives access to the current learner
  // and agent for checkpointing.
  std::function<void(const EpochMetrics&, RewardLearner&, rl::SacLearner&)> on_epoch;
};

// The alternating loop: every step acts and updates the off-policy learner
// with reward -x; every density_update_period steps (including step 0) the
// estimator runs one update block on the expert demos versus the replay
// buffer. Non-finite losses abort the run with diagnostics; metrics up to
// the crash are kept and scored.
TrainResult train_cfil(const CfilConfig& cfg, const envs::DemoSet& demos,
                       const TrainCallbacks& callbacks = {});

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics);
void write_rl_epoch_csv(const std::string& path, const std::vector<EpochMetrics>& metrics);

}  // namespace cfil::run
