#include "cfil/envs/expert.hpp"

#include <cmath>

#include "cfil/numcore/errors.hpp"

namespace cfil::envs {

namespace {

constexpr double kGravity = 10.0;

double wrap_pi(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace

double expert_ref_return(const EnvSpec& spec) {
  if (spec.name == "pointmass") return kExpertRefReturn_PointMass;
  if (spec.name == "pendulum") return kExpertRefReturn_Pendulum;
  throw ArgumentError("expert_ref_return: unknown environment '" + spec.name + "'");
}

std::vector<double> scripted_expert(const EnvSpec& spec, std::span<const double> s) {
  if (spec.name == "pointmass") {
    // Pursuit of a point ahead on a small station-keeping circle around the
    // goal: the expert transits in and then holds a steady orbit, so every
    // state and action coordinate keeps a healthy nonzero scale.
    const auto [gx, gy] = pointmass_goal();
    const double kp = 8.0, kd = 2.5;
    const double r_orbit = 0.1, lead = 1.0;
    const double dx = s[0] - gx, dy = s[1] - gy;
    const double dist = std::sqrt(dx * dx + dy * dy);
    const double ux = dist > 1e-6 ? dx / dist : 1.0;
    const double uy = dist > 1e-6 ? dy / dist : 0.0;
    const double c = std::cos(-lead), sn = std::sin(-lead);
    const double tx = gx + r_orbit * (c * ux - sn * uy);
    const double ty = gy + r_orbit * (sn * ux + c * uy);
    return {std::clamp(kp * (tx - s[0]) - kd * s[2], -1.0, 1.0),
            std::clamp(kp * (ty - s[1]) - kd * s[3], -1.0, 1.0)};
  }
  if (spec.name == "pendulum") {
    const double th = std::atan2(s[1], s[0]);
    const double omega = s[2];
    const double up_err = wrap_pi(th - M_PI);
    if (std::fabs(up_err) < 0.4 && std::fabs(omega) < 3.0) {
      // Capture region: PD stabilization at the upright position.
      return {std::clamp(-8.0 * up_err - 2.0 * omega, -1.0, 1.0)};
    }
    // Energy shaping toward the upright energy level E* = +g/l
    // (E = omega^2/2 - (g/l) cos th, zero at the bottom with unit speed^0).
    const double energy = 0.5 * omega * omega - kGravity * std::cos(th);
    const double deficit = kGravity - energy;
    double pump = (std::fabs(omega) < 1e-6) ? 1.0 : (omega > 0.0 ? 1.0 : -1.0);
    return {std::clamp(2.0 * deficit * pump, -1.0, 1.0)};
  }
  throw ArgumentError("scripted_expert: unknown environment '" + spec.name + "'");
}

}  // namespace cfil::envs
