#include <doctest.h>

#include <cmath>

#include "cfil/envs/expert.hpp"
#include "cfil/numcore/errors.hpp"
#include "cfil/rl/sac.hpp"
#include "test_util.hpp"

using namespace cfil;
using namespace cfil::rl;
using envs::EnvSpec;
using envs::Transition;
using numcore::Rng;
using numcore::Tensor;

namespace {

Transition make_transition(Rng& rng, int sd, int ad) {
  Transition tr;
  tr.s.resize(sd);
  tr.a.resize(ad);
  tr.s_next.resize(sd);
  for (auto& v : tr.s) v = rng.normal();
  for (auto& v : tr.a) v = std::tanh(rng.normal());
  for (auto& v : tr.s_next) v = rng.normal();
  tr.env_reward = rng.normal();
  return tr;
}

SacConfig small_cfg(uint64_t seed, int batch = 8) {
  SacConfig cfg;
  cfg.state_dim = 3;
  cfg.action_dim = 2;
  cfg.hidden = {16, 16};
  cfg.batch_size = batch;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("replay buffer: FIFO eviction at capacity") {
  ReplayBuffer buf(3);
  Rng rng(0);
  for (int i = 0; i < 5; ++i) {
    Transition tr = make_transition(rng, 2, 1);
    tr.t = i;
    buf.push(std::move(tr));
  }
  CHECK(buf.size() == 3);
  CHECK(buf.at(0).t == 2);
  CHECK(buf.at(1).t == 3);
  CHECK(buf.at(2).t == 4);
}

TEST_CASE("replay buffer: sampling is uniform over stored items") {
  ReplayBuffer buf(100);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    Transition tr = make_transition(rng, 2, 1);
    tr.t = i;
    buf.push(std::move(tr));
  }
  std::vector<int> counts(100, 0);
  Rng sample_rng(2);
  for (int rep = 0; rep < 1000; ++rep)
    for (size_t i : buf.sample_indices(100, sample_rng)) counts[i]++;
  for (int c : counts) {
    CHECK(c > 600);  // expectation 1000, loose uniformity band
    CHECK(c < 1400);
  }
}

TEST_CASE("replay buffer: empty buffer raises a state error") {
  ReplayBuffer buf(10);
  Rng rng(3);
  CHECK_THROWS_AS(buf.sample_indices(1, rng), StateError);
}

TEST_CASE("act: zero-initialized policy head gives the zero action deterministically") {
  SacLearner sac(small_cfg(0));
  Rng rng(4);
  auto a = sac.act(std::vector<double>{0.5, -1.0, 2.0}, /*deterministic=*/true, rng);
  for (double v : a) CHECK(v == 0.0);
}

TEST_CASE("act: stochastic draws are seed-reproducible and inside the action box") {
  SacLearner sac(small_cfg(1));
  std::vector<double> s{0.2, 0.8, -0.3};
  Rng r1(7), r2(7), r3(8);
  auto a1 = sac.act(s, false, r1);
  auto a2 = sac.act(s, false, r2);
  auto a3 = sac.act(s, false, r3);
  CHECK(a1 == a2);
  CHECK(a1 != a3);
  for (double v : a1) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("polyak factor 1.0 freezes the target networks") {
  SacLearner sac(small_cfg(2));
  sac.set_polyak(1.0);
  ReplayBuffer buf(64);
  Rng rng(9);
  for (int i = 0; i < 32; ++i) buf.push(make_transition(rng, 3, 2));
  const auto before1 = sac.q1_target_params().flatten();
  const auto before2 = sac.q2_target_params().flatten();
  auto reward = [](const std::vector<const Transition*>& b) {
    return std::vector<double>(b.size(), 0.5);
  };
  Rng up(10);
  for (int i = 0; i < 5; ++i) sac.update(buf, reward, up);
  CHECK(sac.q1_target_params().flatten() == before1);
  CHECK(sac.q2_target_params().flatten() == before2);
  CHECK(sac.q1_params().flatten() != before1);  // online critics did move
}

TEST_CASE("critic gradient matches finite differences on a 4-transition toy problem") {
  SacLearner sac(small_cfg(3, 4));
  Rng rng(11);
  Tensor states(4, 3), actions(4, 2), targets(4, 1);
  for (double& v : states.flat()) v = rng.normal();
  for (double& v : actions.flat()) v = std::tanh(rng.normal());
  for (double& v : targets.flat()) v = rng.normal();

  for (auto* store : {&sac.q1_params(), &sac.q2_params()}) {
    auto loss = [&](numcore::Graph& g) { return sac.critic_loss_node(g, states, actions, targets); };
    auto analytic = testutil::flatten_grads(numcore::grad_scalar(*store, loss));
    auto fd = testutil::finite_diff_grads(*store, loss);
    CHECK(testutil::max_rel_err(analytic, fd) <= 1e-4);
  }
}

TEST_CASE("zero reward keeps Q magnitudes at the entropy-only scale") {
  SacLearner sac(small_cfg(4, 32));
  ReplayBuffer buf(512);
  Rng rng(12);
  for (int i = 0; i < 256; ++i) buf.push(make_transition(rng, 3, 2));
  auto reward = [](const std::vector<const Transition*>& b) {
    return std::vector<double>(b.size(), 0.0);
  };
  Rng up(13);
  double mean_q = 0.0;
  for (int i = 0; i < 300; ++i) mean_q = sac.update(buf, reward, up).mean_q;
  // Entropy-only fixed point is around alpha*H/(1-gamma); with alpha <= 0.2
  // and |H| of a few nats that is tens, not thousands.
  CHECK(std::fabs(mean_q) < 100.0);
}

TEST_CASE("rewards are recomputed at update time (freshness)") {
  SacLearner sac(small_cfg(5, 16));
  ReplayBuffer buf(64);
  Rng rng(14);
  for (int i = 0; i < 32; ++i) {
    Transition tr = make_transition(rng, 3, 2);
    tr.env_reward = -123.0;  // stored value must never be used
    buf.push(std::move(tr));
  }
  double captured = 0.0;
  auto reward = [&](const std::vector<const Transition*>& b) {
    captured += 1.0;
    return std::vector<double>(b.size(), 3.0);
  };
  Rng up(15);
  auto diag = sac.update(buf, reward, up);
  CHECK(captured == 1.0);
  CHECK(diag.mean_reward == 3.0);
}

TEST_CASE("sac on the true point-mass reward approaches the scripted expert") {
  // RL-only sanity run: dense true reward, no imitation machinery.
  using namespace cfil::envs;
  EnvSpec spec = make_env("pointmass");
  SacConfig cfg;
  cfg.state_dim = spec.state_dim;
  cfg.action_dim = spec.action_dim;
  cfg.seed = 0;
  SacLearner sac(cfg);
  ReplayBuffer buf(100000);
  Env env(spec);
  Rng env_rng(100), act_rng(101), up_rng(102);
  env.reset(env_rng);

  auto reward = [&](const std::vector<const Transition*>& b) {
    std::vector<double> out(b.size());
    for (size_t i = 0; i < b.size(); ++i) out[i] = b[i]->env_reward;
    return out;
  };

  const int total_steps = 40000, start_steps = 2000, update_after = 1000;
  std::vector<double> evals;
  for (int t = 0; t < total_steps; ++t) {
    Transition tr;
    tr.t = env.t();
    tr.s = env.state();
    if (t < start_steps) {
      tr.a = {act_rng.uniform(-1.0, 1.0), act_rng.uniform(-1.0, 1.0)};
    } else {
      tr.a = sac.act(env.state(), false, act_rng);
    }
    const auto out = env.step(tr.a);
    tr.s_next = env.state();
    tr.env_reward = out.reward;
    tr.done = out.done;
    buf.push(std::move(tr));
    if (out.done) env.reset(env_rng);
    if (t >= update_after) sac.update(buf, reward, up_rng);

    if ((t + 1) % 2000 == 0) {
      double ret = 0.0;
      for (int ep = 0; ep < 10; ++ep) {
        Rng er(200 + ep);
        Env eval_env(spec);
        eval_env.reset(er);
        while (true) {
          Rng unused(0);
          const auto o = eval_env.step(sac.act(eval_env.state(), true, unused));
          ret += o.reward;
          if (o.done) break;
        }
      }
      evals.push_back(ret / 10.0);
    }
  }

  // Asymptotic performance: mean of the last 4 evaluations, within 10% of
  // the scripted expert reference.
  double asym = 0.0;
  for (size_t i = evals.size() - 4; i < evals.size(); ++i) asym += evals[i];
  asym /= 4.0;
  CHECK(asym >= expert_ref_return(spec) * 1.10);
}
