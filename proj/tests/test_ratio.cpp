#include <doctest.h>

#include <cmath>

#include "cfil/numcore/errors.hpp"
#include "cfil/ratio/estimator.hpp"
#include "test_util.hpp"

using namespace cfil;
using namespace cfil::ratio;
using numcore::Graph;
using numcore::Rng;
using numcore::Tensor;

namespace {

EstimatorConfig desk_config(int dim, uint64_t seed, double alpha = 1.0, double beta = 0.5) {
  EstimatorConfig cfg;
  cfg.view = InputView{ViewTag::StateAction, dim};
  cfg.squasher = Squasher{6.0, 15.0, true};
  cfg.alpha = alpha;
  cfg.beta = beta;
  cfg.flow_hidden = {32, 32};
  cfg.seed = seed;
  return cfg;
}

Tensor gaussian_rows(int n, int dim, double mean, Rng& rng) {
  Tensor t(n, dim);
  for (double& v : t.flat()) v = mean + rng.normal();
  return t;
}

}  // namespace

TEST_CASE("smooth_batch: beta = 0 returns the batch unchanged") {
  Rng rng(0);
  Tensor batch = gaussian_rows(16, 3, 0.5, rng);
  Tensor out = smooth_batch(batch, 0.0, rng);
  CHECK(out.flat().size() == batch.flat().size());
  for (size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == batch.data()[i]);
}

TEST_CASE("smooth_batch: zero vectors stay zero (noise scales with the value)") {
  Rng rng(1);
  Tensor batch(8, 4);
  Tensor out = smooth_batch(batch, 2.0, rng);
  for (double v : out.flat()) CHECK(v == 0.0);
}

TEST_CASE("smooth_batch: bounds and empirical mean for v = (2, -4), beta = 0.5") {
  Rng rng(2);
  const int n = 100000;
  Tensor batch(n, 2);
  for (int i = 0; i < n; ++i) {
    batch.at(i, 0) = 2.0;
    batch.at(i, 1) = -4.0;
  }
  Tensor out = smooth_batch(batch, 0.5, rng);
  double m0 = 0.0, m1 = 0.0;
  for (int i = 0; i < n; ++i) {
    CHECK(out.at(i, 0) >= 1.5);
    CHECK(out.at(i, 0) <= 2.5);
    CHECK(out.at(i, 1) >= -5.0);
    CHECK(out.at(i, 1) <= -3.0);
    m0 += out.at(i, 0);
    m1 += out.at(i, 1);
  }
  CHECK(std::fabs(m0 / n - 2.0) < 0.01);
  CHECK(std::fabs(m1 / n + 4.0) < 0.01);
}

TEST_CASE("squasher: odd, bounded, slope c1/c2 at zero") {
  Squasher s{6.0, 15.0, true};
  CHECK(s(0.0) == 0.0);
  CHECK(s(3.0) == doctest::Approx(-s(-3.0)));
  // tanh saturates to exactly 1.0 in doubles, so the bound closes at c1.
  CHECK(std::fabs(s(1e9)) <= 6.0);
  CHECK(s(1e9) == doctest::Approx(6.0).epsilon(1e-9));
  const double h = 1e-6;
  CHECK((s(h) - s(-h)) / (2 * h) == doctest::Approx(6.0 / 15.0).epsilon(1e-6));
}

TEST_CASE("x_value: freshly initialized estimator is exactly zero everywhere") {
  CoupledEstimator est(desk_config(3, 7));
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> v{rng.normal(), rng.normal(), rng.normal()};
    CHECK(est.x_value(v) == 0.0);
  }
}

TEST_CASE("x_value: dimension mismatch raises an argument error") {
  CoupledEstimator est(desk_config(3, 7));
  CHECK_THROWS_AS(est.x_value(std::vector<double>{1.0, 2.0}), ArgumentError);
}

TEST_CASE("reward is bounded by the squasher for arbitrary flow parameters") {
  CoupledEstimator est(desk_config(2, 11));
  Rng rng(4);
  for (auto* fm : {&est.agent_flow(), &est.expert_flow()})
    for (size_t i = 0; i < fm->params().count(); ++i)
      for (double& v : fm->params().tensor(i).flat()) v = 2.0 * rng.normal();
  Tensor inputs = gaussian_rows(200, 2, 0.0, rng);
  for (double r : est.reward_batch(inputs)) {
    CHECK(r >= -6.0);
    CHECK(r <= 6.0);
  }
}

TEST_CASE("dv_objective: identical zero test function gives zero") {
  std::vector<double> xe(32, 0.0), xa(32, 0.0);
  CHECK(dv_objective(xe, xa) == doctest::Approx(0.0));
}

TEST_CASE("dv_objective: constant test function cancels") {
  std::vector<double> xe(32, 2.4), xa(64, 2.4);
  CHECK(dv_objective(xe, xa) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dv_objective: oracle log-ratio recovers the negated Gaussian KL") {
  // expert ~ N(1,1), agent ~ N(0,1); KL(agent||expert) = 0.5. The DV value
  // at the true (squasher-clipped) log-ratio x(s) = 0.5 - s is -KL.
  Rng rng(5);
  const int n = 10000;
  std::vector<double> xe(n), xa(n);
  for (int i = 0; i < n; ++i) {
    const double se = 1.0 + rng.normal();
    const double sa = rng.normal();
    xe[i] = std::clamp(0.5 - se, -6.0, 6.0);
    xa[i] = std::clamp(0.5 - sa, -6.0, 6.0);
  }
  CHECK(std::fabs(dv_objective(xe, xa) - (-0.5)) < 0.05);
}

TEST_CASE("x_value: flows fitted to N(0,1) and N(1,1) are balanced at the midpoint") {
  EstimatorConfig cfg = desk_config(1, 13);
  cfg.flow_hidden = {16};
  CoupledEstimator est(cfg);
  Rng rng(6);
  Tensor batch(256, 1);
  for (int step = 0; step < 12000; ++step) {
    for (double& v : batch.flat()) v = rng.normal();
    est.agent_flow().fit_mle_step(batch, 1e-3);
    for (double& v : batch.flat()) v = 1.0 + rng.normal();
    est.expert_flow().fit_mle_step(batch, 1e-3);
  }
  CHECK(std::fabs(est.x_value(std::vector<double>{0.5})) <= 0.1);
}

TEST_CASE("reg_loss: identity flows on zero batches give 2*log(2*pi)") {
  CoupledEstimator est(desk_config(2, 17));
  Tensor zeros(16, 2);
  CHECK(est.reg_loss(zeros, zeros) == doctest::Approx(2.0 * std::log(2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("update: alpha = 0 skips the regularization branch") {
  CoupledEstimator est(desk_config(2, 19, /*alpha=*/0.0));
  Rng rng(7);
  MatrixSource expert(gaussian_rows(64, 2, 1.0, rng));
  MatrixSource agent(gaussian_rows(64, 2, 0.0, rng));
  Rng up(8);
  auto trace = est.update(expert, agent, 5, 32, 1e-3, up);
  for (const auto& row : trace) CHECK(row.reg == 0.0);

  Graph g;
  auto nodes = est.build_loss(g, expert.rows(), agent.rows());
  CHECK_FALSE(nodes.has_reg);
  CHECK(nodes.total.id == nodes.dv.id);
}

TEST_CASE("update: n_batches = 0 leaves parameters unchanged") {
  CoupledEstimator est(desk_config(2, 23));
  Rng rng(9);
  MatrixSource expert(gaussian_rows(32, 2, 1.0, rng));
  MatrixSource agent(gaussian_rows(32, 2, 0.0, rng));
  auto before_p = est.agent_flow().params().flatten();
  auto before_q = est.expert_flow().params().flatten();
  Rng up(10);
  auto trace = est.update(expert, agent, 0, 16, 1e-3, up);
  CHECK(trace.empty());
  CHECK(est.agent_flow().params().flatten() == before_p);
  CHECK(est.expert_flow().params().flatten() == before_q);
}

TEST_CASE("update: empty agent source raises a state error") {
  CoupledEstimator est(desk_config(2, 29));
  Rng rng(11);
  MatrixSource expert(gaussian_rows(32, 2, 1.0, rng));
  MatrixSource agent(Tensor(0, 2));
  Rng up(12);
  CHECK_THROWS_AS(est.update(expert, agent, 1, 16, 1e-3, up), StateError);
}

TEST_CASE("dv and reg gradients match finite differences on both flows") {
  EstimatorConfig cfg = desk_config(2, 31);
  cfg.flow_hidden = {8};
  cfg.beta = 0.0;
  CoupledEstimator est(cfg);
  Rng rng(13);
  for (auto* fm : {&est.agent_flow(), &est.expert_flow()})
    for (size_t i = 0; i < fm->params().count(); ++i)
      for (double& v : fm->params().tensor(i).flat()) v = 0.3 * rng.normal();

  Tensor expert_batch = gaussian_rows(6, 2, 1.0, rng);
  Tensor agent_batch = gaussian_rows(6, 2, 0.0, rng);

  for (auto* fm : {&est.agent_flow(), &est.expert_flow()}) {
    auto loss = [&](Graph& g) { return est.build_loss(g, expert_batch, agent_batch).total; };
    auto analytic = testutil::flatten_grads(numcore::grad_scalar(fm->params(), loss));
    auto fd = testutil::finite_diff_grads(fm->params(), loss);
    CHECK(testutil::max_rel_err(analytic, fd) <= 1e-4);
  }
}

TEST_CASE("update: regularization trend decreases over 500 coupled updates") {
  EstimatorConfig cfg = desk_config(2, 37, /*alpha=*/1.0, /*beta=*/0.5);
  cfg.flow_hidden = {32, 32};
  CoupledEstimator est(cfg);
  Rng rng(14);
  MatrixSource expert(gaussian_rows(512, 2, 1.0, rng));
  MatrixSource agent(gaussian_rows(512, 2, 0.0, rng));
  Rng up(15);
  auto trace = est.update(expert, agent, 500, 100, 1e-3, up);
  double early = 0.0, late = 0.0;
  for (int i = 0; i < 50; ++i) early += trace[i].reg;
  for (int i = 450; i < 500; ++i) late += trace[i].reg;
  CHECK(late < early);
}

TEST_CASE("converged coupled estimator recovers the Gaussian log-ratio (DV oracle)") {
  // expert ~ N((1,1), I), agent ~ N(0, I) in D=2; true KL = 1.0 and the
  // true unsquashed log-ratio at v is 1 - v1 - v2.
  EstimatorConfig cfg = desk_config(2, 41);
  cfg.flow_hidden = {32, 32};
  CoupledEstimator est(cfg);
  Rng rng(16);
  MatrixSource expert([&] {
    Tensor t(2000, 2);
    for (double& v : t.flat()) v = 1.0 + rng.normal();
    return t;
  }());
  MatrixSource agent([&] {
    Tensor t(2000, 2);
    for (double& v : t.flat()) v = rng.normal();
    return t;
  }());
  Rng up(17);
  auto trace = est.update(expert, agent, 2000, 100, 1e-3, up);

  Rng eval_rng(18);
  const int n = 1000;
  std::vector<double> reward(n), true_ratio(n);
  Tensor points(n, 2);
  for (int i = 0; i < n; ++i) {
    points.at(i, 0) = eval_rng.normal();
    points.at(i, 1) = eval_rng.normal();
    true_ratio[i] = -(1.0 - points.at(i, 0) - points.at(i, 1));  // -x* = log(expert/agent)
  }
  reward = est.reward_batch(points);
  CHECK(testutil::pearson(reward, true_ratio) >= 0.9);
}
