#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cfil/flow/flow_model.hpp"
#include "cfil/numcore/rng.hpp"

namespace cfil::ratio {

using flow::FlowModel;
using numcore::Adam;
using numcore::Graph;
using numcore::Rng;
using numcore::Tensor;
using numcore::Var;

// Bounded odd squashing applied to the raw log-ratio: outer*tanh(x/inner).
// Disabled means the identity map (the NoSquash ablation).
struct Squasher {
  double outer = 6.0;
  double inner = 15.0;
  bool enabled = true;

  double operator()(double x) const { return enabled ? outer * std::tanh(x / inner) : x; }
  Var apply(Graph& g, Var x) const { return enabled ? g.scale(g.tanh(g.scale(x, 1.0 / inner)), outer) : x; }
};

enum class ViewTag { StateAction, StatePair, SingleState };

ViewTag view_tag_from_string(const std::string& s);
std::string to_string(ViewTag tag);

// Which slice of a transition the estimator sees, and its width.
struct InputView {
  ViewTag tag = ViewTag::StateAction;
  int dim = 0;
};

InputView make_view(ViewTag tag, int state_dim, int action_dim);

// Anything that can be sampled into estimator input batches.
struct BatchSource {
  virtual ~BatchSource() = default;
  virtual size_t size() const = 0;
  virtual void fill_row(size_t index, std::span<double> out) const = 0;
};

// A fixed matrix of input rows.
class MatrixSource : public BatchSource {
 public:
  explicit MatrixSource(Tensor rows) : rows_(std::move(rows)) {}
  size_t size() const override { return static_cast<size_t>(rows_.rows()); }
  void fill_row(size_t index, std::span<double> out) const override {
    for (int j = 0; j < rows_.cols(); ++j) out[j] = rows_.at(static_cast<int>(index), j);
  }
  const Tensor& rows() const { return rows_; }

 private:
  Tensor rows_;
};

// Multiplicative uniform smoothing: v + beta * v (.) u, u ~ U(-1/2, 1/2) per
// coordinate, fresh draws per vector. beta = 0 returns the batch unchanged.
Tensor smooth_batch(const Tensor& batch, double beta, Rng& rng);

// Donsker-Varadhan minibatch objective on precomputed test-function values:
// log(mean_e exp(x)) - mean_a x. The log-mean-exp minibatch bias is left
// uncorrected.
double dv_objective(std::span<const double> x_expert, std::span<const double> x_agent);

// One row of the loss trace CSV (step, J, L, mean_x_expert, mean_x_agent).
struct LossTraceRow {
  long step = 0;
  double dv = 0.0;
  double reg = 0.0;
  double mean_x_expert = 0.0;
  double mean_x_agent = 0.0;
};

void write_loss_trace_csv(const std::string& path, const std::vector<LossTraceRow>& rows);

struct EstimatorConfig {
  InputView view;
  Squasher squasher;
  double alpha = 1.0;        // flow regularization weight
  double beta = 0.5;         // smoothing scale
  int flow_depth = 1;
  std::vector<int> flow_hidden = {64, 64};
  uint64_t seed = 0;
};

// Pair of flows coupled through the Donsker-Varadhan optimum: the test
// function is x = squash(log p_agent - log q_expert) and the synthetic
// reward is -x. Both flows train jointly on the DV loss, optionally with
// per-flow maximum-likelihood regularization, under one optimizer.
class CoupledEstimator {
 public:
  explicit CoupledEstimator(const EstimatorConfig& cfg);

  const InputView& view() const { return cfg_.view; }
  const Squasher& squasher() const { return cfg_.squasher; }
  double alpha() const { return cfg_.alpha; }
  double beta() const { return cfg_.beta; }

  FlowModel& agent_flow() { return agent_flow_; }
  FlowModel& expert_flow() { return expert_flow_; }
  const FlowModel& agent_flow() const { return agent_flow_; }
  const FlowModel& expert_flow() const { return expert_flow_; }

  double x_value(std::span<const double> input) const;
  std::vector<double> x_batch(const Tensor& inputs) const;
  // Synthetic reward -x on raw inputs (no smoothing at evaluation time).
  std::vector<double> reward_batch(const Tensor& inputs) const;

  // Loss values on already-smoothed batches (evaluation only, no update).
  double dv_loss(const Tensor& expert_batch, const Tensor& agent_batch) const;
  double reg_loss(const Tensor& expert_batch, const Tensor& agent_batch) const;

  // Full loss graph over both batches; the four flow evaluations are shared
  // between the DV and regularization terms.
  struct LossNodes {
    Var total;
    Var dv;
    Var reg;  // invalid when has_reg is false
    bool has_reg = false;
    Var x_expert;
    Var x_agent;
  };
  LossNodes build_loss(Graph& g, const Tensor& expert_batch, const Tensor& agent_batch) const;

  // n_batches iterations of: sample both batches, smooth, one joint Adam
  // step on J (+ alpha * L). Returns one trace row per batch.
  std::vector<LossTraceRow> update(const BatchSource& expert_source, const BatchSource& agent_source,
                                   int n_batches, int batch_size, double lr, Rng& rng);

  long updates_taken() const { return update_count_; }

 private:
  Var x_node(Graph& g, Var inputs) const;

  EstimatorConfig cfg_;
  FlowModel agent_flow_;
  FlowModel expert_flow_;
  Adam opt_;
  long update_count_ = 0;
};

}  // namespace cfil::ratio
