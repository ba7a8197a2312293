#pragma once

#include <cstdint>
#include <string>

#include "cfil/ratio/estimator.hpp"

namespace cfil::run {

enum class VariantTag { CFIL, NoSquash, IndFlow, IndFlowNS, RegularNet, Numerator };

VariantTag variant_from_string(const std::string& s);
std::string to_string(VariantTag tag);

// One training run. Defaults are the standard preset: density updates of 10
// batches of 100 every 1000 steps, alpha = 1, beta = 0.5, squasher
// 6*tanh(x/15). The subsampled preset drops alpha to 0 and tightens the
// squasher to 3*tanh(x/10).
struct CfilConfig {
  std::string env = "pointmass";
  ratio::ViewTag regime = ratio::ViewTag::StateAction;
  int stride = 1;
  int density_update_period = 1000;  // k, in env steps
  int n_batches = 10;
  int batch_size = 100;
  double alpha = 1.0;
  double beta = 0.5;
  double squash_outer = 6.0;
  double squash_inner = 15.0;
  long total_steps = 100000;
  int eval_period = 2000;
  int eval_episodes = 10;
  uint64_t seed = 0;
  VariantTag variant = VariantTag::CFIL;

  void apply_subsampled_preset() {
    alpha = 0.0;
    squash_outer = 3.0;
    squash_inner = 10.0;
  }
};

// Off-policy learner settings (fixed at desk scale).
inline constexpr int kSacStartSteps = 2000;
inline constexpr int kSacUpdateAfter = 1000;
inline constexpr double kEstimatorLr = 1e-3;
inline constexpr size_t kReplayCapacity = 1000000;

}  // namespace cfil::run
