#pragma once

#include <memory>
#include <vector>

#include "cfil/run/config.hpp"

namespace cfil::run {

using numcore::ParamStore;
using numcore::Rng;
using numcore::Tensor;
using ratio::BatchSource;
using ratio::InputView;
using ratio::LossTraceRow;

// A learned synthetic-reward function with a periodic density update.
class RewardLearner {
 public:
  virtual ~RewardLearner() = default;

  virtual const InputView& view() const = 0;
  virtual std::vector<LossTraceRow> update(const BatchSource& expert_source, const BatchSource& agent_source,
                                           int n_batches, int batch_size, double lr, Rng& rng) = 0;
  virtual std::vector<double> reward_batch(const Tensor& inputs) const = 0;

  // Deep parameter snapshots, in a fixed per-variant order.
  virtual std::vector<ParamStore> snapshot_params() const = 0;
  virtual void restore_params(const std::vector<ParamStore>& stores) = 0;
};

// Builds the reward learner for a variant tag:
//   CFIL       coupled flows, squashed, DV loss (+ alpha-weighted flow reg)
//   NoSquash   CFIL with the identity squasher
//   IndFlow    independently MLE-trained flows, reward squash(log q - log p)
//   IndFlowNS  IndFlow without the squasher
//   RegularNet x is a plain tanh MLP trained on the DV loss
//   Numerator  single expert-side flow, reward log q (agent-independent)
std::unique_ptr<RewardLearner> make_variant(VariantTag tag, const CfilConfig& cfg, const InputView& view);

}  // namespace cfil::run
