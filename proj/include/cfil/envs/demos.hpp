#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cfil/envs/env.hpp"
#include "cfil/ratio/estimator.hpp"

namespace cfil::envs {

using ratio::BatchSource;
using ratio::InputView;
using ratio::ViewTag;

// One environment transition; s_next is exactly dynamics(s, a).
struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  std::vector<double> s_next;
  double env_reward = 0.0;
  bool done = false;
  int t = 0;
};

struct Trajectory {
  std::vector<Transition> transitions;

  double total_return() const {
    double r = 0.0;
    for (const auto& tr : transitions) r += tr.env_reward;
    return r;
  }
};

// Copies the view slice of a transition into out.
void fill_transition_view(ViewTag tag, const Transition& tr, std::span<double> out);

// Ordered expert demonstrations with non-mutating view and subsample
// projections. As a BatchSource it serves rows of the active view over the
// strided transitions.
class DemoSet : public BatchSource {
 public:
  DemoSet(EnvSpec spec, std::vector<Trajectory> trajectories, uint64_t seed);

  const EnvSpec& spec() const { return spec_; }
  uint64_t seed() const { return seed_; }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }

  ViewTag view() const { return view_; }
  int stride() const { return stride_; }
  void set_view(ViewTag tag) { view_ = tag; }
  // Keeps transitions with index = 0 (mod stride) within each trajectory.
  void set_stride(int stride);

  int view_dim() const;
  double mean_return() const;
  size_t transition_count() const;  // across all trajectories, before stride

  // BatchSource over the active view and stride.
  size_t size() const override;
  void fill_row(size_t index, std::span<double> out) const override;

  void save(const std::string& path) const;
  static DemoSet load(const std::string& path);

 private:
  const Transition& strided(size_t index) const;

  EnvSpec spec_;
  std::vector<Trajectory> trajectories_;
  uint64_t seed_ = 0;
  ViewTag view_ = ViewTag::StateAction;
  int stride_ = 1;
};

using PolicyFn = std::function<std::vector<double>(std::span<const double>)>;

// Records n_traj full-horizon trajectories of `policy`. Fails loudly when
// the recorded mean return misses the frozen expert reference by over 5%
// (set expert_gate = false when recording non-expert policies).
DemoSet record_demos(const EnvSpec& spec, const PolicyFn& policy, int n_traj, uint64_t seed,
                     bool expert_gate = true);

}  // namespace cfil::envs
