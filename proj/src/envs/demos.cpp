#include "cfil/envs/demos.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cfil/envs/expert.hpp"
#include "cfil/numcore/errors.hpp"

namespace cfil::envs {

void fill_transition_view(ViewTag tag, const Transition& tr, std::span<double> out) {
  size_t k = 0;
  switch (tag) {
    case ViewTag::StateAction:
      for (double v : tr.s) out[k++] = v;
      for (double v : tr.a) out[k++] = v;
      return;
    case ViewTag::StatePair:
      for (double v : tr.s) out[k++] = v;
      for (double v : tr.s_next) out[k++] = v;
      return;
    case ViewTag::SingleState:
      for (double v : tr.s) out[k++] = v;
      return;
  }
  throw ArgumentError("fill_transition_view: bad tag");
}

DemoSet::DemoSet(EnvSpec spec, std::vector<Trajectory> trajectories, uint64_t seed)
    : spec_(std::move(spec)), trajectories_(std::move(trajectories)), seed_(seed) {
  if (trajectories_.empty()) throw ArgumentError("DemoSet: no trajectories");
}

void DemoSet::set_stride(int stride) {
  if (stride < 1) throw ArgumentError("DemoSet::set_stride: stride must be positive");
  stride_ = stride;
}

int DemoSet::view_dim() const {
  return ratio::make_view(view_, spec_.state_dim, spec_.action_dim).dim;
}

double DemoSet::mean_return() const {
  double r = 0.0;
  for (const auto& tr : trajectories_) r += tr.total_return();
  return r / static_cast<double>(trajectories_.size());
}

size_t DemoSet::transition_count() const {
  size_t n = 0;
  for (const auto& tr : trajectories_) n += tr.transitions.size();
  return n;
}

size_t DemoSet::size() const {
  size_t n = 0;
  for (const auto& tr : trajectories_)
    n += (tr.transitions.size() + static_cast<size_t>(stride_) - 1) / static_cast<size_t>(stride_);
  return n;
}

const Transition& DemoSet::strided(size_t index) const {
  for (const auto& tr : trajectories_) {
    const size_t here = (tr.transitions.size() + static_cast<size_t>(stride_) - 1) / static_cast<size_t>(stride_);
    if (index < here) return tr.transitions[index * static_cast<size_t>(stride_)];
    index -= here;
  }
  throw ArgumentError("DemoSet: row index out of range");
}

void DemoSet::fill_row(size_t index, std::span<double> out) const {
  fill_transition_view(view_, strided(index), out);
}

void DemoSet::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw StateError("DemoSet::save: cannot open '" + path + "'");
  f << "cfil-demos v1\n";
  f << "env " << spec_.name << "\n";
  f << "state_dim " << spec_.state_dim << "\n";
  f << "action_dim " << spec_.action_dim << "\n";
  f << "horizon " << spec_.horizon << "\n";
  f << "n_traj " << trajectories_.size() << "\n";
  f << "seed " << seed_ << "\n";
  f << "t";
  for (int i = 0; i < spec_.state_dim; ++i) f << ",s" << i;
  for (int i = 0; i < spec_.action_dim; ++i) f << ",a" << i;
  f << ",r_env";
  for (int i = 0; i < spec_.state_dim; ++i) f << ",sp" << i;
  f << ",done\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), ",%.17g", v);
    f << buf;
  };
  for (const auto& traj : trajectories_) {
    for (const auto& tr : traj.transitions) {
      f << tr.t;
      for (double v : tr.s) put(v);
      for (double v : tr.a) put(v);
      put(tr.env_reward);
      for (double v : tr.s_next) put(v);
      f << "," << (tr.done ? 1 : 0) << "\n";
    }
  }
}

DemoSet DemoSet::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw StateError("DemoSet::load: cannot open '" + path + "'");
  std::string magic, version;
  f >> magic >> version;
  if (magic != "cfil-demos" || version != "v1") throw StateError("DemoSet::load: bad header in '" + path + "'");
  std::string key, env_name;
  int state_dim = 0, action_dim = 0, horizon = 0;
  size_t n_traj = 0;
  uint64_t seed = 0;
  f >> key >> env_name >> key >> state_dim >> key >> action_dim >> key >> horizon >> key >> n_traj >> key >> seed;
  std::string line;
  std::getline(f, line);  // rest of seed line
  std::getline(f, line);  // column header
  EnvSpec spec = make_env(env_name);
  if (spec.state_dim != state_dim || spec.action_dim != action_dim)
    throw StateError("DemoSet::load: dimensions disagree with the built-in environment");

  std::vector<Trajectory> trajectories;
  Trajectory current;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    auto next_cell = [&]() {
      if (!std::getline(ss, cell, ',')) throw StateError("DemoSet::load: short row");
      return cell;
    };
    Transition tr;
    tr.t = std::stoi(next_cell());
    tr.s.resize(state_dim);
    for (auto& v : tr.s) v = std::stod(next_cell());
    tr.a.resize(action_dim);
    for (auto& v : tr.a) v = std::stod(next_cell());
    tr.env_reward = std::stod(next_cell());
    tr.s_next.resize(state_dim);
    for (auto& v : tr.s_next) v = std::stod(next_cell());
    tr.done = std::stoi(next_cell()) != 0;
    if (tr.t == 0 && !current.transitions.empty()) {
      trajectories.push_back(std::move(current));
      current = Trajectory{};
    }
    current.transitions.push_back(std::move(tr));
  }
  if (!current.transitions.empty()) trajectories.push_back(std::move(current));
  if (trajectories.size() != n_traj) throw StateError("DemoSet::load: trajectory count mismatch");
  return DemoSet(spec, std::move(trajectories), seed);
}

DemoSet record_demos(const EnvSpec& spec, const PolicyFn& policy, int n_traj, uint64_t seed,
                     bool expert_gate) {
  if (n_traj < 1) throw ArgumentError("record_demos: n_traj must be positive");
  Rng root(seed);
  std::vector<Trajectory> trajectories;
  trajectories.reserve(static_cast<size_t>(n_traj));
  Env env(spec);
  for (int k = 0; k < n_traj; ++k) {
    Rng episode = root.split(static_cast<uint64_t>(k));
    env.reset(episode);
    Trajectory traj;
    traj.transitions.reserve(static_cast<size_t>(spec.horizon));
    while (true) {
      Transition tr;
      tr.t = env.t();
      tr.s = env.state();
      tr.a = policy(std::span<const double>(env.state()));
      const auto out = env.step(tr.a);
      tr.s_next = env.state();
      tr.env_reward = out.reward;
      tr.done = out.done;
      traj.transitions.push_back(std::move(tr));
      if (out.done) break;
    }
    trajectories.push_back(std::move(traj));
  }
  DemoSet demos(spec, std::move(trajectories), seed);
  if (expert_gate) {
    const double ref = expert_ref_return(spec);
    const double got = demos.mean_return();
    if (std::fabs(got - ref) > 0.05 * std::fabs(ref))
      throw StateError("record_demos: expert quality gate failed: mean return " + std::to_string(got) +
                       " vs reference " + std::to_string(ref));
  }
  return demos;
}

}  // namespace cfil::envs
