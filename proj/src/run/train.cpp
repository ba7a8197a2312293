#include "cfil/run/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "cfil/envs/expert.hpp"
#include "cfil/numcore/errors.hpp"

namespace cfil::run {

using envs::Env;
using envs::EnvSpec;
using envs::Transition;
using numcore::Rng;
using numcore::Tensor;
using ratio::ViewTag;
using rl::ReplayBuffer;
using rl::SacLearner;

namespace {

// Deterministic-policy return over the fixed evaluation episodes.
std::pair<double, double> evaluate(const EnvSpec& spec, const SacLearner& sac, int episodes, Rng eval_root) {
  std::vector<double> returns(static_cast<size_t>(episodes));
  for (int ep = 0; ep < episodes; ++ep) {
    Rng er = eval_root.split(static_cast<uint64_t>(ep));
    Env env(spec);
    env.reset(er);
    double total = 0.0;
    while (true) {
      Rng unused(0);
      const auto out = env.step(sac.act(env.state(), true, unused));
      total += out.reward;
      if (out.done) break;
    }
    returns[static_cast<size_t>(ep)] = total;
  }
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= episodes;
  double var = 0.0;
  for (double r : returns) var += (r - mean) * (r - mean);
  return {mean, std::sqrt(var / episodes)};
}

double random_policy_return(const EnvSpec& spec, int episodes, Rng root) {
  double mean = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    Rng er = root.split(static_cast<uint64_t>(ep));
    Rng ar = root.split(1000 + static_cast<uint64_t>(ep));
    Env env(spec);
    env.reset(er);
    std::vector<double> a(static_cast<size_t>(spec.action_dim));
    while (true) {
      for (double& v : a) v = ar.uniform(-1.0, 1.0);
      const auto out = env.step(a);
      mean += out.reward;
      if (out.done) break;
    }
  }
  return mean / episodes;
}

}  // namespace

double normalized_score(std::span<const double> eval_returns, double expert_ref, double random_ref) {
  if (!(expert_ref > random_ref)) throw ArgumentError("normalized_score: expert_ref must exceed random_ref");
  if (eval_returns.empty()) throw ArgumentError("normalized_score: no evaluations");
  const size_t take = std::min<size_t>(5, eval_returns.size());
  double asym = 0.0;
  for (size_t i = eval_returns.size() - take; i < eval_returns.size(); ++i) asym += eval_returns[i];
  asym /= static_cast<double>(take);
  return (asym - random_ref) / (expert_ref - random_ref);
}

TrainResult train_cfil(const CfilConfig& cfg, const envs::DemoSet& demos, const TrainCallbacks& callbacks) {
  if (demos.transition_count() == 0) throw ArgumentError("train_cfil: demos are empty");
  const EnvSpec spec = envs::make_env(cfg.env);
  if (demos.spec().name != spec.name) throw ArgumentError("train_cfil: demo environment mismatch");

  // View selection is the only regime-dependent step.
  const InputView view = ratio::make_view(cfg.regime, spec.state_dim, spec.action_dim);
  envs::DemoSet expert_source = demos;
  expert_source.set_view(cfg.regime);
  expert_source.set_stride(cfg.stride);

  std::unique_ptr<RewardLearner> learner = make_variant(cfg.variant, cfg, view);

  rl::SacConfig sac_cfg;
  sac_cfg.state_dim = spec.state_dim;
  sac_cfg.action_dim = spec.action_dim;
  sac_cfg.seed = numcore::splitmix64(cfg.seed ^ 0x5acu);
  SacLearner sac(sac_cfg);

  ReplayBuffer buffer(kReplayCapacity);
  const ReplayBuffer::ViewSource agent_source = buffer.view_source(cfg.regime);

  Rng root(cfg.seed);
  Rng env_rng = root.split(1);
  Rng act_rng = root.split(2);
  Rng sac_rng = root.split(3);
  Rng est_rng = root.split(4);
  const Rng eval_root = root.split(5);

  TrainResult result;
  result.expert_ref = demos.mean_return();
  result.random_ref = random_policy_return(spec, cfg.eval_episodes, root.split(6));

  // Rewards are recomputed on the raw transition view at update time.
  Tensor reward_inputs(sac_cfg.batch_size, view.dim);
  auto reward_fn = [&](const std::vector<const Transition*>& batch) {
    for (size_t i = 0; i < batch.size(); ++i)
      envs::fill_transition_view(cfg.regime, *batch[i],
                                 {reward_inputs.data() + i * static_cast<size_t>(view.dim),
                                  static_cast<size_t>(view.dim)});
    return learner->reward_batch(reward_inputs);
  };

  Env env(spec);
  env.reset(env_rng);
  std::vector<double> eval_curve;
  double epoch_dv = 0.0, epoch_reg = 0.0, epoch_synth = 0.0;
  long epoch_dv_n = 0, epoch_synth_n = 0;

  for (long t = 0; t < cfg.total_steps; ++t) {
    try {
      Transition tr;
      tr.t = env.t();
      tr.s = env.state();
      if (t < kSacStartSteps) {
        tr.a.resize(static_cast<size_t>(spec.action_dim));
        for (double& v : tr.a) v = act_rng.uniform(-1.0, 1.0);
      } else {
        tr.a = sac.act(env.state(), false, act_rng);
      }
      const auto out = env.step(tr.a);
      tr.s_next = env.state();
      tr.env_reward = out.reward;
      tr.done = out.done;
      buffer.push(std::move(tr));
      if (out.done) env.reset(env_rng);

      if (t >= kSacUpdateAfter) {
        const auto diag = sac.update(buffer, reward_fn, sac_rng);
        epoch_synth += diag.mean_reward;
        ++epoch_synth_n;
      }

      if (t % cfg.density_update_period == 0) {
        const auto trace =
            learner->update(expert_source, agent_source, cfg.n_batches, cfg.batch_size, kEstimatorLr, est_rng);
        ++result.density_updates;
        for (const auto& row : trace) {
          epoch_dv += row.dv;
          epoch_reg += row.reg;
          ++epoch_dv_n;
        }
      }
    } catch (const NumericError& e) {
      result.diverged = true;
      result.divergence_reason = e.what();
      result.divergence_step = t;
      break;
    }

    if ((t + 1) % cfg.eval_period == 0) {
      const auto [mean, stddev] = evaluate(spec, sac, cfg.eval_episodes, eval_root);
      eval_curve.push_back(mean);
      EpochMetrics m;
      m.epoch = static_cast<int>(eval_curve.size());
      m.env_steps = t + 1;
      m.eval_mean = mean;
      m.eval_std = stddev;
      m.normalized = normalized_score(eval_curve, result.expert_ref, result.random_ref);
      m.dv = epoch_dv_n ? epoch_dv / epoch_dv_n : 0.0;
      m.reg = epoch_dv_n ? epoch_reg / epoch_dv_n : 0.0;
      m.mean_synthetic_reward = epoch_synth_n ? epoch_synth / epoch_synth_n : 0.0;
      result.metrics.push_back(m);
      if (callbacks.on_epoch) callbacks.on_epoch(m, *learner, sac);
      epoch_dv = epoch_reg = epoch_synth = 0.0;
      epoch_dv_n = epoch_synth_n = 0;
    }
  }

  // A diverged run scores its last valid evaluations.
  if (!eval_curve.empty())
    result.normalized_score = normalized_score(eval_curve, result.expert_ref, result.random_ref);
  return result;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics) {
  std::ofstream f(path);
  if (!f) throw StateError("write_metrics_csv: cannot open '" + path + "'");
  f << "epoch,env_steps,eval_mean,eval_std,normalized,J,L\n";
  char buf[256];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof(buf), "%d,%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n", m.epoch, m.env_steps, m.eval_mean,
                  m.eval_std, m.normalized, m.dv, m.reg);
    f << buf;
  }
}

void write_rl_epoch_csv(const std::string& path, const std::vector<EpochMetrics>& metrics) {
  std::ofstream f(path);
  if (!f) throw StateError("write_rl_epoch_csv: cannot open '" + path + "'");
  f << "epoch,env_steps,eval_return_mean,eval_return_std,mean_synthetic_reward\n";
  char buf[256];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof(buf), "%d,%ld,%.17g,%.17g,%.17g\n", m.epoch, m.env_steps, m.eval_mean, m.eval_std,
                  m.mean_synthetic_reward);
    f << buf;
  }
}

}  // namespace cfil::run
