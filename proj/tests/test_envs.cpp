#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cfil/envs/demos.hpp"
#include "cfil/envs/expert.hpp"
#include "cfil/numcore/errors.hpp"

using namespace cfil;
using namespace cfil::envs;
using numcore::Rng;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("pointmass: zero action at rest is a fixed point of the dynamics") {
  EnvSpec spec = make_env("pointmass");
  std::vector<double> s{0.3, -0.2, 0.0, 0.0}, a{0.0, 0.0}, next(4);
  step_dynamics(spec, s, a, next);
  CHECK(next == s);
}

TEST_CASE("pointmass: two steps of unit force match a hand-stepped Euler oracle") {
  EnvSpec spec = make_env("pointmass");
  std::vector<double> s{0.0, 0.0, 0.0, 0.0}, a{1.0, 0.0}, next(4);
  step_dynamics(spec, s, a, next);
  std::vector<double> next2(4);
  step_dynamics(spec, next, a, next2);

  // Independent integration: v' = v + dt (f - 0.1 v); p' = p + dt v'.
  const double dt = 0.05;
  double v = 0.0, p = 0.0;
  for (int i = 0; i < 2; ++i) {
    v = v + dt * (1.0 - 0.1 * v);
    p = p + dt * v;
  }
  CHECK(next2[0] == doctest::Approx(p).epsilon(1e-15));
  CHECK(next2[2] == doctest::Approx(v).epsilon(1e-15));
  CHECK(next2[1] == 0.0);
  CHECK(next2[3] == 0.0);
}

TEST_CASE("pointmass: out-of-box action is clipped and flagged") {
  EnvSpec spec = make_env("pointmass");
  std::vector<double> s{0.0, 0.0, 0.0, 0.0}, a{5.0, 0.0}, next(4), next_unit(4);
  bool clipped = false;
  step_dynamics(spec, s, a, next, &clipped);
  CHECK(clipped);
  step_dynamics(spec, s, std::vector<double>{1.0, 0.0}, next_unit);
  CHECK(next == next_unit);
}

TEST_CASE("pendulum: hanging at rest with zero torque stays at rest") {
  EnvSpec spec = make_env("pendulum");
  std::vector<double> s{1.0, 0.0, 0.0}, a{0.0}, next(3);
  step_dynamics(spec, s, a, next);
  CHECK(next[0] == 1.0);
  CHECK(next[1] == 0.0);
  CHECK(next[2] == 0.0);
}

TEST_CASE("pendulum: non-finite state raises a numeric error") {
  EnvSpec spec = make_env("pendulum");
  std::vector<double> s{std::nan(""), 0.0, 0.0}, next(3);
  CHECK_THROWS_AS(step_dynamics(spec, s, std::vector<double>{0.0}, next), NumericError);
}

TEST_CASE("scripted expert: point mass at the goal takes a near-zero action") {
  EnvSpec spec = make_env("pointmass");
  auto a = scripted_expert(spec, std::vector<double>{0.0, 0.0, 0.0, 0.0});
  CHECK(std::fabs(a[0]) < 1e-12);
  CHECK(std::fabs(a[1]) < 1e-12);
}

TEST_CASE("scripted expert: returns match the frozen references within 5%") {
  for (const char* name : {"pointmass", "pendulum"}) {
    EnvSpec spec = make_env(name);
    double sum = 0.0;
    for (int ep = 0; ep < 20; ++ep)
      sum += rollout_return(spec, [&](std::span<const double> s) { return scripted_expert(spec, s); },
                            Rng(500 + ep));
    const double mean = sum / 20.0;
    CHECK(std::fabs(mean - expert_ref_return(spec)) <= 0.05 * std::fabs(expert_ref_return(spec)));
  }
}

TEST_CASE("scripted expert: pendulum swings up within 150 steps") {
  EnvSpec spec = make_env("pendulum");
  Env env(spec);
  Rng rng(3);
  env.reset(rng);
  int reached = -1;
  for (int t = 0; t < 200 && reached < 0; ++t) {
    env.step(scripted_expert(spec, env.state()));
    const double th = std::atan2(env.state()[1], env.state()[0]);
    if (std::fabs(std::remainder(th - M_PI, 2.0 * M_PI)) < 0.1) reached = t + 1;
  }
  CHECK(reached > 0);
  CHECK(reached <= 150);
}

TEST_CASE("record_demos: one trajectory has exactly horizon transitions") {
  EnvSpec spec = make_env("pointmass");
  DemoSet demos = record_demos(spec, [&](std::span<const double> s) { return scripted_expert(spec, s); }, 1, 0);
  CHECK(demos.trajectories().size() == 1);
  CHECK(demos.transition_count() == 200);
  CHECK(demos.trajectories()[0].transitions.back().done);
}

TEST_CASE("record_demos: quality gate rejects a bad policy") {
  EnvSpec spec = make_env("pointmass");
  auto lazy = [](std::span<const double>) { return std::vector<double>{0.0, 0.0}; };
  CHECK_THROWS_AS(record_demos(spec, lazy, 1, 0), StateError);
  DemoSet demos = record_demos(spec, lazy, 1, 0, /*expert_gate=*/false);
  CHECK(demos.transition_count() == 200);
}

TEST_CASE("demo views: stride and view projections are consistent") {
  EnvSpec spec = make_env("pointmass");
  DemoSet demos = record_demos(spec, [&](std::span<const double> s) { return scripted_expert(spec, s); }, 1, 0);

  demos.set_view(ViewTag::StateAction);
  CHECK(demos.view_dim() == 6);
  CHECK(demos.size() == 200);
  demos.set_stride(10);
  CHECK(demos.size() == 20);
  demos.set_stride(100);
  CHECK(demos.size() == 2);
  demos.set_stride(1);

  // The three views of one transition are projections of the same data.
  std::vector<double> sa(6), sp(8), ss(4);
  demos.set_view(ViewTag::StateAction);
  demos.fill_row(7, sa);
  demos.set_view(ViewTag::StatePair);
  CHECK(demos.view_dim() == 8);
  demos.fill_row(7, sp);
  demos.set_view(ViewTag::SingleState);
  CHECK(demos.view_dim() == 4);
  demos.fill_row(7, ss);
  for (int j = 0; j < 4; ++j) {
    CHECK(sa[j] == sp[j]);
    CHECK(sa[j] == ss[j]);
  }
  const auto& tr = demos.trajectories()[0].transitions[7];
  for (int j = 0; j < 2; ++j) CHECK(sa[4 + j] == tr.a[j]);
  for (int j = 0; j < 4; ++j) CHECK(sp[4 + j] == tr.s_next[j]);

  // Strided rows follow the keep-every-Nth rule.
  demos.set_view(ViewTag::StateAction);
  demos.set_stride(10);
  std::vector<double> row(6);
  demos.fill_row(3, row);
  const auto& tr30 = demos.trajectories()[0].transitions[30];
  for (int j = 0; j < 4; ++j) CHECK(row[j] == tr30.s[j]);
}

TEST_CASE("demo files: identical seed gives byte-identical files; round-trips") {
  EnvSpec spec = make_env("pointmass");
  auto expert = [&](std::span<const double> s) { return scripted_expert(spec, s); };
  const auto dir = std::filesystem::temp_directory_path();
  const std::string p1 = (dir / "cfil_demo_a.txt").string();
  const std::string p2 = (dir / "cfil_demo_b.txt").string();
  record_demos(spec, expert, 2, 11).save(p1);
  record_demos(spec, expert, 2, 11).save(p2);
  CHECK(slurp(p1) == slurp(p2));

  DemoSet loaded = DemoSet::load(p1);
  DemoSet orig = record_demos(spec, expert, 2, 11);
  CHECK(loaded.trajectories().size() == 2);
  CHECK(loaded.mean_return() == doctest::Approx(orig.mean_return()).epsilon(1e-15));
  CHECK(loaded.seed() == 11);
  const auto& a = orig.trajectories()[1].transitions[5];
  const auto& b = loaded.trajectories()[1].transitions[5];
  CHECK(a.s == b.s);
  CHECK(a.a == b.a);
  CHECK(a.s_next == b.s_next);
  CHECK(a.env_reward == b.env_reward);
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("transitions satisfy s_next = dynamics(s, a) exactly") {
  EnvSpec spec = make_env("pendulum");
  DemoSet demos = record_demos(spec, [&](std::span<const double> s) { return scripted_expert(spec, s); }, 1, 4);
  std::vector<double> next(spec.state_dim);
  for (const auto& tr : demos.trajectories()[0].transitions) {
    step_dynamics(spec, tr.s, tr.a, next);
    CHECK(next == tr.s_next);
  }
}
