#include "cfil/rl/sac.hpp"

#include <cmath>

#include "cfil/numcore/errors.hpp"

namespace cfil::rl {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kLog2 = 0.6931471805599453;
constexpr double kLogStdMin = -10.0;
constexpr double kLogStdMax = 2.0;

// Smooth saturation of the raw log-std head into (kLogStdMin, kLogStdMax).
// Identity near zero; a hard clamp would zero the gradient once the head
// drifts past a bound and the entropy term could never pull it back.
double squash_log_std(double raw) {
  if (raw >= 0.0) return kLogStdMax * std::tanh(raw / kLogStdMax);
  return kLogStdMin * std::tanh(raw / kLogStdMin);
}

}  // namespace

void TanhGaussianPolicy::init(const std::vector<int>& hidden, numcore::Rng& rng) {
  std::vector<int> sizes{state_dim};
  std::vector<numcore::Act> acts;
  for (int h : hidden) {
    sizes.push_back(h);
    acts.push_back(numcore::Act::Relu);
  }
  sizes.push_back(2 * action_dim);
  acts.push_back(numcore::Act::Identity);
  spec = MlpSpec{sizes, acts};
  // Zero head: the initial policy is mean 0, std 1 everywhere.
  numcore::init_mlp(params, "pi.", spec, rng, /*zero_last=*/true);
}

std::vector<double> TanhGaussianPolicy::act(std::span<const double> s, bool deterministic,
                                            numcore::Rng& rng) const {
  const auto out = numcore::eval_mlp(params, "pi.", spec, s);
  std::vector<double> a(static_cast<size_t>(action_dim));
  for (int j = 0; j < action_dim; ++j) {
    const double mean = out[j];
    if (deterministic) {
      a[j] = std::tanh(mean);
    } else {
      const double log_std = squash_log_std(out[action_dim + j]);
      a[j] = std::tanh(mean + std::exp(log_std) * rng.normal());
    }
  }
  return a;
}

std::pair<Var, Var> TanhGaussianPolicy::dist_node(Graph& g, Var states) const {
  Var out = numcore::mlp_forward(g, params, "pi.", spec, states);
  Var mean = g.slice_cols(out, 0, action_dim);
  Var raw = g.slice_cols(out, action_dim, 2 * action_dim);
  // squash_log_std as graph ops: relu splits the positive and negative lobes.
  Var pos = g.scale(g.tanh(g.scale(g.relu(raw), 1.0 / kLogStdMax)), kLogStdMax);
  Var neg = g.scale(g.tanh(g.scale(g.relu(g.neg(raw)), -1.0 / kLogStdMin)), kLogStdMin);
  Var log_std = g.add(pos, neg);
  return {mean, log_std};
}

Var TanhGaussianPolicy::log_prob_node(Graph& g, Var mean, Var log_std, const Tensor& eps) const {
  Var eps_c = g.constant(eps);
  Var u = g.add(mean, g.mul(g.exp(log_std), eps_c));
  // log N(u; mean, std) with u = mean + std*eps reduces to -eps^2/2 - log_std - log(2pi)/2.
  Var gauss = g.add_scalar(g.sub(g.scale(g.square(eps_c), -0.5), log_std), -0.5 * kLog2Pi);
  // Squash correction: log(1 - tanh(u)^2) = 2(log 2 - u - softplus(-2u)).
  Var corr = g.scale(g.add_scalar(g.add(u, g.softplus(g.scale(u, -2.0))), -kLog2), 2.0);
  return g.row_sum(g.add(gauss, corr));
}

SacLearner::SacLearner(const SacConfig& cfg) : cfg_(cfg) {
  if (cfg.state_dim < 1 || cfg.action_dim < 1) throw ArgumentError("SacLearner: bad dimensions");
  if (cfg_.target_entropy == 0.0) cfg_.target_entropy = -static_cast<double>(cfg.action_dim);

  numcore::Rng root(cfg.seed);
  policy_.state_dim = cfg.state_dim;
  policy_.action_dim = cfg.action_dim;
  numcore::Rng pi_rng = root.split(1);
  policy_.init(cfg.hidden, pi_rng);

  std::vector<int> sizes{cfg.state_dim + cfg.action_dim};
  std::vector<numcore::Act> acts;
  for (int h : cfg.hidden) {
    sizes.push_back(h);
    acts.push_back(numcore::Act::Relu);
  }
  sizes.push_back(1);
  acts.push_back(numcore::Act::Identity);
  q_spec_ = MlpSpec{sizes, acts};
  numcore::Rng q1_rng = root.split(2);
  numcore::Rng q2_rng = root.split(3);
  numcore::init_mlp(q1_, "q.", q_spec_, q1_rng);
  numcore::init_mlp(q2_, "q.", q_spec_, q2_rng);
  numcore::init_mlp(q1_targ_, "q.", q_spec_, q1_rng);  // overwritten below
  numcore::init_mlp(q2_targ_, "q.", q_spec_, q2_rng);
  q1_targ_.unflatten(q1_.flatten());
  q2_targ_.unflatten(q2_.flatten());

  alpha_.add("log_alpha", 1, 1).at(0, 0) = std::log(cfg_.init_alpha);
}

double SacLearner::alpha() const { return std::exp(alpha_.at("log_alpha").at(0, 0)); }

Var SacLearner::q_node(Graph& g, const ParamStore& store, Var state_action) const {
  return numcore::mlp_forward(g, store, "q.", q_spec_, state_action);
}

Var SacLearner::critic_loss_node(Graph& g, const Tensor& states, const Tensor& actions,
                                 const Tensor& targets) const {
  Var sa = g.concat_cols(g.constant(states), g.constant(actions));
  Var y = g.constant(targets);
  Var l1 = g.mean(g.square(g.sub(q_node(g, q1_, sa), y)));
  Var l2 = g.mean(g.square(g.sub(q_node(g, q2_, sa), y)));
  return g.add(l1, l2);
}

SacLearner::UpdateDiag SacLearner::update(const ReplayBuffer& buffer, const RewardFn& reward_fn,
                                          numcore::Rng& rng) {
  const int n = cfg_.batch_size;
  if (buffer.size() < static_cast<size_t>(n)) throw StateError("SacLearner::update: buffer smaller than batch");

  const auto idx = buffer.sample_indices(n, rng);
  std::vector<const Transition*> batch(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) batch[i] = &buffer.at(idx[i]);

  Tensor states(n, cfg_.state_dim), actions(n, cfg_.action_dim), next_states(n, cfg_.state_dim);
  std::vector<double> done(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < cfg_.state_dim; ++j) {
      states.at(i, j) = batch[i]->s[j];
      next_states.at(i, j) = batch[i]->s_next[j];
    }
    for (int j = 0; j < cfg_.action_dim; ++j) actions.at(i, j) = batch[i]->a[j];
    // Horizon cutoffs are time limits, not terminal states; never cut the
    // bootstrap on them.
    done[i] = 0.0;
  }

  const std::vector<double> rewards = reward_fn(batch);
  if (rewards.size() != static_cast<size_t>(n)) throw DimensionError("SacLearner::update: reward batch size");

  UpdateDiag diag;
  diag.alpha = alpha();
  for (double r : rewards) diag.mean_reward += r;
  diag.mean_reward /= n;

  Tensor eps_next(n, cfg_.action_dim), eps_cur(n, cfg_.action_dim);
  for (double& v : eps_next.flat()) v = rng.normal();
  for (double& v : eps_cur.flat()) v = rng.normal();

  // Bellman targets from the target critics (forward only, no backward).
  Tensor targets(n, 1);
  {
    Graph g;
    auto [mean, log_std] = policy_.dist_node(g, g.constant(next_states));
    Var eps_c = g.constant(eps_next);
    Var u = g.add(mean, g.mul(g.exp(log_std), eps_c));
    Var a_next = g.tanh(u);
    Var logp = policy_.log_prob_node(g, mean, log_std, eps_next);
    Var sa = g.concat_cols(g.constant(next_states), a_next);
    Var qmin = g.minimum(q_node(g, q1_targ_, sa), q_node(g, q2_targ_, sa));
    const double a = diag.alpha;
    for (int i = 0; i < n; ++i) {
      const double soft_v = qmin.value().at(i, 0) - a * logp.value().at(i, 0);
      targets.at(i, 0) = rewards[static_cast<size_t>(i)] + cfg_.gamma * (1.0 - done[static_cast<size_t>(i)]) * soft_v;
      if (!std::isfinite(targets.at(i, 0))) throw NumericError("SacLearner::update: non-finite critic target");
    }
  }

  // Critic step.
  {
    Graph g;
    Var loss = critic_loss_node(g, states, actions, targets);
    diag.critic_loss = loss.scalar();
    g.backward(loss);
    const auto g1 = g.grads_for(q1_);
    const auto g2 = g.grads_for(q2_);
    q_opt_.step({{&q1_, &g1}, {&q2_, &g2}}, cfg_.lr);
  }

  // Actor step (critics frozen; gradients still flow through the action).
  double mean_logp = 0.0;
  {
    Graph g;
    g.freeze_store(&q1_);
    g.freeze_store(&q2_);
    auto [mean, log_std] = policy_.dist_node(g, g.constant(states));
    Var eps_c = g.constant(eps_cur);
    Var u = g.add(mean, g.mul(g.exp(log_std), eps_c));
    Var a_cur = g.tanh(u);
    Var logp = policy_.log_prob_node(g, mean, log_std, eps_cur);
    Var sa = g.concat_cols(g.constant(states), a_cur);
    Var qmin = g.minimum(q_node(g, q1_, sa), q_node(g, q2_, sa));
    Var loss = g.mean(g.sub(g.scale(logp, diag.alpha), qmin));
    diag.actor_loss = loss.scalar();
    for (int i = 0; i < n; ++i) {
      mean_logp += logp.value().at(i, 0);
      diag.mean_q += qmin.value().at(i, 0);
    }
    mean_logp /= n;
    diag.mean_q /= n;
    g.backward(loss);
    const auto gp = g.grads_for(policy_.params);
    pi_opt_.step(policy_.params, gp, cfg_.lr);
  }

  // Temperature step toward the entropy target; linear in log-alpha so the
  // gradient does not vanish when alpha collapses.
  if (cfg_.learned_alpha) {
    Graph g;
    Var log_alpha = g.param(alpha_, "log_alpha");
    Var loss = g.mul_scalar_node(g.constant_scalar(-(mean_logp + cfg_.target_entropy)), log_alpha);
    g.backward(g.sum(loss));
    const auto ga = g.grads_for(alpha_);
    alpha_opt_.step(alpha_, ga, cfg_.lr);
  }

  polyak_update(q1_targ_, q1_, cfg_.polyak);
  polyak_update(q2_targ_, q2_, cfg_.polyak);
  return diag;
}

void polyak_update(ParamStore& target, const ParamStore& online, double rho) {
  if (target.flat_size() != online.flat_size()) throw DimensionError("polyak_update: store shape mismatch");
  for (size_t i = 0; i < target.count(); ++i) {
    double* t = target.tensor(i).data();
    const double* o = online.tensor(i).data();
    for (size_t k = 0; k < target.tensor(i).size(); ++k) t[k] = rho * t[k] + (1.0 - rho) * o[k];
  }
}

}  // namespace cfil::rl
