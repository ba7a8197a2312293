#pragma once

#include <span>
#include <vector>

#include "cfil/envs/env.hpp"

namespace cfil::envs {

// Frozen expert reference returns, measured over 50 tuning episodes; the
// demo recorder's quality gate checks fresh recordings against these.
inline constexpr double kExpertRefReturn_PointMass = -41.09;
inline constexpr double kExpertRefReturn_Pendulum = -729.11;

double expert_ref_return(const EnvSpec& spec);

// Deterministic scripted controllers: PD to the goal for the point mass,
// energy pumping plus PD capture for the pendulum swing-up.
std::vector<double> scripted_expert(const EnvSpec& spec, std::span<const double> s);

// Mean true-reward return of a policy over n seeded episodes.
template <typename PolicyFn>
double rollout_return(const EnvSpec& spec, const PolicyFn& policy, Rng rng) {
  Env env(spec);
  env.reset(rng);
  double total = 0.0;
  while (true) {
    const auto a = policy(std::span<const double>(env.state()));
    const auto out = env.step(a);
    total += out.reward;
    if (out.done) break;
  }
  return total;
}

}  // namespace cfil::envs
