#include "cfil/run/variants.hpp"

#include "cfil/numcore/adam.hpp"
#include "cfil/numcore/errors.hpp"
#include "cfil/numcore/mlp.hpp"

namespace cfil::run {

using flow::FlowModel;
using numcore::Adam;
using numcore::Graph;
using numcore::Var;
using ratio::CoupledEstimator;
using ratio::EstimatorConfig;
using ratio::Squasher;

namespace {

constexpr int kFlowDepth = 1;
const std::vector<int> kFlowHidden = {64, 64};
const std::vector<int> kMlpHidden = {64, 64};

Squasher squasher_from(const CfilConfig& cfg, bool enabled) {
  return Squasher{cfg.squash_outer, cfg.squash_inner, enabled};
}

void sample_rows(const BatchSource& source, int n, int dim, Rng& rng, Tensor& out) {
  for (int i = 0; i < n; ++i) {
    const size_t idx = static_cast<size_t>(rng.randint(static_cast<int>(source.size())));
    source.fill_row(idx, {out.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)});
  }
}

// CFIL proper and the NoSquash ablation.
class CoupledVariant : public RewardLearner {
 public:
  CoupledVariant(const CfilConfig& cfg, const InputView& view, bool squashed) {
    EstimatorConfig ec;
    ec.view = view;
    ec.squasher = squasher_from(cfg, squashed);
    ec.alpha = cfg.alpha;
    ec.beta = cfg.beta;
    ec.flow_depth = kFlowDepth;
    ec.flow_hidden = kFlowHidden;
    ec.seed = cfg.seed;
    est_ = std::make_unique<CoupledEstimator>(ec);
  }

  const InputView& view() const override { return est_->view(); }

  std::vector<LossTraceRow> update(const BatchSource& expert_source, const BatchSource& agent_source,
                                   int n_batches, int batch_size, double lr, Rng& rng) override {
    return est_->update(expert_source, agent_source, n_batches, batch_size, lr, rng);
  }

  std::vector<double> reward_batch(const Tensor& inputs) const override { return est_->reward_batch(inputs); }

  std::vector<ParamStore> snapshot_params() const override {
    return {est_->agent_flow().params(), est_->expert_flow().params()};
  }

  void restore_params(const std::vector<ParamStore>& stores) override {
    est_->agent_flow().params().unflatten(stores.at(0).flatten());
    est_->expert_flow().params().unflatten(stores.at(1).flatten());
  }

  CoupledEstimator& estimator() { return *est_; }

 private:
  std::unique_ptr<CoupledEstimator> est_;
};

// Independently MLE-trained flows; the trace reports the two NLL losses in
// the J and L columns.
class IndependentFlowsVariant : public RewardLearner {
 public:
  IndependentFlowsVariant(const CfilConfig& cfg, const InputView& view, bool squashed)
      : view_(view),
        beta_(cfg.beta),
        squash_(squasher_from(cfg, squashed)),
        agent_flow_(FlowModel::make_maf(view.dim, kFlowDepth, kFlowHidden, numcore::splitmix64(cfg.seed ^ 0x51u))),
        expert_flow_(FlowModel::make_maf(view.dim, kFlowDepth, kFlowHidden, numcore::splitmix64(cfg.seed ^ 0x52u))) {}

  const InputView& view() const override { return view_; }

  std::vector<LossTraceRow> update(const BatchSource& expert_source, const BatchSource& agent_source,
                                   int n_batches, int batch_size, double lr, Rng& rng) override {
    if (agent_source.size() == 0) throw StateError("update: agent source is empty");
    std::vector<LossTraceRow> trace;
    Tensor expert_batch(batch_size, view_.dim), agent_batch(batch_size, view_.dim);
    for (int it = 0; it < n_batches; ++it) {
      sample_rows(expert_source, batch_size, view_.dim, rng, expert_batch);
      sample_rows(agent_source, batch_size, view_.dim, rng, agent_batch);
      LossTraceRow row;
      row.step = steps_;
      row.dv = expert_flow_.fit_mle_step(ratio::smooth_batch(expert_batch, beta_, rng), lr);
      row.reg = agent_flow_.fit_mle_step(ratio::smooth_batch(agent_batch, beta_, rng), lr);
      trace.push_back(row);
      ++steps_;
    }
    return trace;
  }

  std::vector<double> reward_batch(const Tensor& inputs) const override {
    const auto lq = expert_flow_.log_prob_batch(inputs);
    const auto lp = agent_flow_.log_prob_batch(inputs);
    std::vector<double> out(lq.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = squash_(lq[i] - lp[i]);
    return out;
  }

  std::vector<ParamStore> snapshot_params() const override {
    return {agent_flow_.params(), expert_flow_.params()};
  }

  void restore_params(const std::vector<ParamStore>& stores) override {
    agent_flow_.params().unflatten(stores.at(0).flatten());
    expert_flow_.params().unflatten(stores.at(1).flatten());
  }

 private:
  InputView view_;
  double beta_;
  Squasher squash_;
  FlowModel agent_flow_;
  FlowModel expert_flow_;
  long steps_ = 0;
};

// The changed-inductive-bias ablation: x is a plain MLP trained on the DV
// loss, squashed like CFIL; no flow regularization exists for it.
class RegularNetVariant : public RewardLearner {
 public:
  RegularNetVariant(const CfilConfig& cfg, const InputView& view)
      : view_(view), beta_(cfg.beta), squash_(squasher_from(cfg, true)) {
    std::vector<int> sizes{view.dim};
    std::vector<numcore::Act> acts;
    for (int h : kMlpHidden) {
      sizes.push_back(h);
      acts.push_back(numcore::Act::Tanh);
    }
    sizes.push_back(1);
    acts.push_back(numcore::Act::Identity);
    spec_ = numcore::MlpSpec{sizes, acts};
    Rng rng(numcore::splitmix64(cfg.seed ^ 0x61u));
    numcore::init_mlp(params_, "x.", spec_, rng, /*zero_last=*/true);
  }

  const InputView& view() const override { return view_; }

  std::vector<LossTraceRow> update(const BatchSource& expert_source, const BatchSource& agent_source,
                                   int n_batches, int batch_size, double lr, Rng& rng) override {
    if (agent_source.size() == 0) throw StateError("update: agent source is empty");
    std::vector<LossTraceRow> trace;
    Tensor expert_batch(batch_size, view_.dim), agent_batch(batch_size, view_.dim);
    for (int it = 0; it < n_batches; ++it) {
      sample_rows(expert_source, batch_size, view_.dim, rng, expert_batch);
      sample_rows(agent_source, batch_size, view_.dim, rng, agent_batch);
      const Tensor e_sm = ratio::smooth_batch(expert_batch, beta_, rng);
      const Tensor a_sm = ratio::smooth_batch(agent_batch, beta_, rng);

      Graph g;
      Var xe = x_node(g, g.constant(e_sm));
      Var xa = x_node(g, g.constant(a_sm));
      Var loss = g.sub(g.log_mean_exp(xe), g.mean(xa));
      LossTraceRow row;
      row.step = steps_;
      row.dv = loss.scalar();
      for (int i = 0; i < batch_size; ++i) {
        row.mean_x_expert += xe.value().at(i, 0);
        row.mean_x_agent += xa.value().at(i, 0);
      }
      row.mean_x_expert /= batch_size;
      row.mean_x_agent /= batch_size;
      g.backward(loss);
      const auto grads = g.grads_for(params_);
      opt_.step(params_, grads, lr);
      trace.push_back(row);
      ++steps_;
    }
    return trace;
  }

  std::vector<double> reward_batch(const Tensor& inputs) const override {
    Graph g;
    Var x = x_node(g, g.constant(inputs));
    std::vector<double> out(inputs.rows());
    for (int i = 0; i < inputs.rows(); ++i) out[i] = -x.value().at(i, 0);
    return out;
  }

  std::vector<ParamStore> snapshot_params() const override { return {params_}; }
  void restore_params(const std::vector<ParamStore>& stores) override {
    params_.unflatten(stores.at(0).flatten());
  }

 private:
  Var x_node(Graph& g, Var inputs) const {
    return squash_.apply(g, numcore::mlp_forward(g, params_, "x.", spec_, inputs));
  }

  InputView view_;
  double beta_;
  Squasher squash_;
  numcore::MlpSpec spec_;
  ParamStore params_;
  Adam opt_;
  long steps_ = 0;
};

// Numerator-only: a single flow fitted to the expert; reward log q, never
// squashed, independent of the agent buffer.
class NumeratorVariant : public RewardLearner {
 public:
  NumeratorVariant(const CfilConfig& cfg, const InputView& view)
      : view_(view),
        beta_(cfg.beta),
        expert_flow_(FlowModel::make_maf(view.dim, kFlowDepth, kFlowHidden, numcore::splitmix64(cfg.seed ^ 0x71u))) {}

  const InputView& view() const override { return view_; }

  std::vector<LossTraceRow> update(const BatchSource& expert_source, const BatchSource& /*agent_source*/,
                                   int n_batches, int batch_size, double lr, Rng& rng) override {
    std::vector<LossTraceRow> trace;
    Tensor expert_batch(batch_size, view_.dim);
    for (int it = 0; it < n_batches; ++it) {
      sample_rows(expert_source, batch_size, view_.dim, rng, expert_batch);
      LossTraceRow row;
      row.step = steps_;
      row.dv = expert_flow_.fit_mle_step(ratio::smooth_batch(expert_batch, beta_, rng), lr);
      trace.push_back(row);
      ++steps_;
    }
    return trace;
  }

  std::vector<double> reward_batch(const Tensor& inputs) const override {
    return expert_flow_.log_prob_batch(inputs);
  }

  std::vector<ParamStore> snapshot_params() const override { return {expert_flow_.params()}; }
  void restore_params(const std::vector<ParamStore>& stores) override {
    expert_flow_.params().unflatten(stores.at(0).flatten());
  }

 private:
  InputView view_;
  double beta_;
  FlowModel expert_flow_;
  long steps_ = 0;
};

}  // namespace

VariantTag variant_from_string(const std::string& s) {
  if (s == "CFIL") return VariantTag::CFIL;
  if (s == "NoSquash") return VariantTag::NoSquash;
  if (s == "IndFlow") return VariantTag::IndFlow;
  if (s == "IndFlowNS") return VariantTag::IndFlowNS;
  if (s == "RegularNet") return VariantTag::RegularNet;
  if (s == "Numerator") return VariantTag::Numerator;
  throw ArgumentError("unknown variant '" + s + "'");
}

std::string to_string(VariantTag tag) {
  switch (tag) {
    case VariantTag::CFIL: return "CFIL";
    case VariantTag::NoSquash: return "NoSquash";
    case VariantTag::IndFlow: return "IndFlow";
    case VariantTag::IndFlowNS: return "IndFlowNS";
    case VariantTag::RegularNet: return "RegularNet";
    case VariantTag::Numerator: return "Numerator";
  }
  throw ArgumentError("make_variant: bad tag");
}

std::unique_ptr<RewardLearner> make_variant(VariantTag tag, const CfilConfig& cfg, const InputView& view) {
  switch (tag) {
    case VariantTag::CFIL: return std::make_unique<CoupledVariant>(cfg, view, /*squashed=*/true);
    case VariantTag::NoSquash: return std::make_unique<CoupledVariant>(cfg, view, /*squashed=*/false);
    case VariantTag::IndFlow: return std::make_unique<IndependentFlowsVariant>(cfg, view, /*squashed=*/true);
    case VariantTag::IndFlowNS: return std::make_unique<IndependentFlowsVariant>(cfg, view, /*squashed=*/false);
    case VariantTag::RegularNet: return std::make_unique<RegularNetVariant>(cfg, view);
    case VariantTag::Numerator: return std::make_unique<NumeratorVariant>(cfg, view);
  }
  throw ArgumentError("make_variant: bad tag");
}

}  // namespace cfil::run
