#include "cfil/ratio/estimator.hpp"

#include <cstdio>
#include <fstream>

#include "cfil/numcore/errors.hpp"

namespace cfil::ratio {

ViewTag view_tag_from_string(const std::string& s) {
  if (s == "state-action") return ViewTag::StateAction;
  if (s == "state-pair") return ViewTag::StatePair;
  if (s == "single-state") return ViewTag::SingleState;
  throw ArgumentError("unknown input view '" + s + "'");
}

std::string to_string(ViewTag tag) {
  switch (tag) {
    case ViewTag::StateAction: return "state-action";
    case ViewTag::StatePair: return "state-pair";
    case ViewTag::SingleState: return "single-state";
  }
  return "?";
}

InputView make_view(ViewTag tag, int state_dim, int action_dim) {
  switch (tag) {
    case ViewTag::StateAction: return {tag, state_dim + action_dim};
    case ViewTag::StatePair: return {tag, 2 * state_dim};
    case ViewTag::SingleState: return {tag, state_dim};
  }
  throw ArgumentError("make_view: bad tag");
}

Tensor smooth_batch(const Tensor& batch, double beta, Rng& rng) {
  if (beta < 0.0) throw ArgumentError("smooth_batch: beta must be non-negative");
  if (beta == 0.0) return batch;
  Tensor out = batch;
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j) {
      const double u = rng.uniform() - 0.5;
      out.at(i, j) += beta * out.at(i, j) * u;
    }
  return out;
}

double dv_objective(std::span<const double> x_expert, std::span<const double> x_agent) {
  if (x_expert.empty() || x_agent.empty()) throw ArgumentError("dv_objective: empty batch");
  double m = x_expert[0];
  for (double v : x_expert) m = std::max(m, v);
  double acc = 0.0;
  for (double v : x_expert) acc += std::exp(v - m);
  const double lme = m + std::log(acc / static_cast<double>(x_expert.size()));
  double mean_a = 0.0;
  for (double v : x_agent) mean_a += v;
  mean_a /= static_cast<double>(x_agent.size());
  return lme - mean_a;
}

void write_loss_trace_csv(const std::string& path, const std::vector<LossTraceRow>& rows) {
  std::ofstream f(path);
  if (!f) throw StateError("write_loss_trace_csv: cannot open '" + path + "'");
  f << "step,J,L,mean_x_expert,mean_x_agent\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g\n", r.step, r.dv, r.reg, r.mean_x_expert,
                  r.mean_x_agent);
    f << buf;
  }
}

CoupledEstimator::CoupledEstimator(const EstimatorConfig& cfg)
    : cfg_(cfg),
      agent_flow_(FlowModel::make_maf(cfg.view.dim, cfg.flow_depth, cfg.flow_hidden,
                                      numcore::splitmix64(cfg.seed ^ 0x41u))),
      expert_flow_(FlowModel::make_maf(cfg.view.dim, cfg.flow_depth, cfg.flow_hidden,
                                       numcore::splitmix64(cfg.seed ^ 0x42u))) {
  if (cfg.view.dim < 1) throw ArgumentError("CoupledEstimator: view dimension must be positive");
  if (cfg.alpha < 0.0) throw ArgumentError("CoupledEstimator: alpha must be non-negative");
  if (cfg.beta < 0.0) throw ArgumentError("CoupledEstimator: beta must be non-negative");
}

Var CoupledEstimator::x_node(Graph& g, Var inputs) const {
  Var diff = g.sub(agent_flow_.log_prob_node(g, inputs), expert_flow_.log_prob_node(g, inputs));
  return cfg_.squasher.apply(g, diff);
}

double CoupledEstimator::x_value(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != cfg_.view.dim)
    throw ArgumentError("x_value: input does not match the estimator view dimension");
  return x_batch(Tensor::from_row(input))[0];
}

std::vector<double> CoupledEstimator::x_batch(const Tensor& inputs) const {
  if (inputs.cols() != cfg_.view.dim)
    throw ArgumentError("x_batch: input does not match the estimator view dimension");
  Graph g;
  Var x = x_node(g, g.constant(inputs));
  std::vector<double> out(inputs.rows());
  for (int i = 0; i < inputs.rows(); ++i) out[i] = x.value().at(i, 0);
  return out;
}

std::vector<double> CoupledEstimator::reward_batch(const Tensor& inputs) const {
  std::vector<double> r = x_batch(inputs);
  for (double& v : r) v = -v;
  return r;
}

double CoupledEstimator::dv_loss(const Tensor& expert_batch, const Tensor& agent_batch) const {
  return dv_objective(x_batch(expert_batch), x_batch(agent_batch));
}

double CoupledEstimator::reg_loss(const Tensor& expert_batch, const Tensor& agent_batch) const {
  if (expert_batch.rows() == 0 || agent_batch.rows() == 0) throw ArgumentError("reg_loss: empty batch");
  const auto lq = expert_flow_.log_prob_batch(expert_batch);
  const auto lp = agent_flow_.log_prob_batch(agent_batch);
  double acc = 0.0;
  for (double v : lq) acc -= v;
  double out = acc / static_cast<double>(lq.size());
  acc = 0.0;
  for (double v : lp) acc -= v;
  return out + acc / static_cast<double>(lp.size());
}

CoupledEstimator::LossNodes CoupledEstimator::build_loss(Graph& g, const Tensor& expert_batch,
                                                         const Tensor& agent_batch) const {
  if (expert_batch.rows() == 0 || agent_batch.rows() == 0) throw ArgumentError("build_loss: empty batch");
  Var e_in = g.constant(expert_batch);
  Var a_in = g.constant(agent_batch);
  Var lp_agent_e = agent_flow_.log_prob_node(g, e_in);
  Var lq_expert_e = expert_flow_.log_prob_node(g, e_in);
  Var lp_agent_a = agent_flow_.log_prob_node(g, a_in);
  Var lq_expert_a = expert_flow_.log_prob_node(g, a_in);

  LossNodes out;
  out.x_expert = cfg_.squasher.apply(g, g.sub(lp_agent_e, lq_expert_e));
  out.x_agent = cfg_.squasher.apply(g, g.sub(lp_agent_a, lq_expert_a));
  out.dv = g.sub(g.log_mean_exp(out.x_expert), g.mean(out.x_agent));
  out.total = out.dv;
  if (cfg_.alpha > 0.0) {
    out.reg = g.neg(g.add(g.mean(lq_expert_e), g.mean(lp_agent_a)));
    out.has_reg = true;
    out.total = g.add(out.dv, g.scale(out.reg, cfg_.alpha));
  }
  return out;
}

std::vector<LossTraceRow> CoupledEstimator::update(const BatchSource& expert_source,
                                                   const BatchSource& agent_source, int n_batches,
                                                   int batch_size, double lr, Rng& rng) {
  if (agent_source.size() == 0) throw StateError("update_estimator: agent source is empty");
  if (expert_source.size() == 0) throw StateError("update_estimator: expert source is empty");
  if (batch_size < 1) throw ArgumentError("update_estimator: batch_size must be positive");

  std::vector<LossTraceRow> trace;
  trace.reserve(static_cast<size_t>(std::max(0, n_batches)));
  const int dim = cfg_.view.dim;
  Tensor expert_batch(batch_size, dim);
  Tensor agent_batch(batch_size, dim);

  for (int it = 0; it < n_batches; ++it) {
    // Uniform with replacement on both sides; the expert set may be smaller
    // than the batch in the subsampled regime.
    for (int i = 0; i < batch_size; ++i) {
      const size_t idx = static_cast<size_t>(rng.randint(static_cast<int>(expert_source.size())));
      expert_source.fill_row(idx, {expert_batch.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)});
    }
    for (int i = 0; i < batch_size; ++i) {
      const size_t idx = static_cast<size_t>(rng.randint(static_cast<int>(agent_source.size())));
      agent_source.fill_row(idx, {agent_batch.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)});
    }
    // Smoothing applies to both batches and, through the shared inputs,
    // inside the regularization term as well.
    const Tensor expert_sm = smooth_batch(expert_batch, cfg_.beta, rng);
    const Tensor agent_sm = smooth_batch(agent_batch, cfg_.beta, rng);

    Graph g;
    LossNodes nodes = build_loss(g, expert_sm, agent_sm);

    LossTraceRow row;
    row.step = update_count_;
    row.dv = nodes.dv.scalar();
    row.reg = nodes.has_reg ? nodes.reg.scalar() : 0.0;
    for (int i = 0; i < batch_size; ++i) {
      row.mean_x_expert += nodes.x_expert.value().at(i, 0);
      row.mean_x_agent += nodes.x_agent.value().at(i, 0);
    }
    row.mean_x_expert /= batch_size;
    row.mean_x_agent /= batch_size;

    g.backward(nodes.total);
    const auto agent_grads = g.grads_for(agent_flow_.params());
    const auto expert_grads = g.grads_for(expert_flow_.params());
    opt_.step({{&agent_flow_.params(), &agent_grads}, {&expert_flow_.params(), &expert_grads}}, lr);

    ++update_count_;
    trace.push_back(row);
  }
  return trace;
}

}  // namespace cfil::ratio
