#include "cfil/analysis/bc_graph.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "cfil/numcore/errors.hpp"
#include "cfil/rl/replay.hpp"

namespace cfil::analysis {

using numcore::Rng;
using numcore::Tensor;

namespace {

// Mean per-step synthetic reward of a trajectory under the current learner.
double mean_reward_on(const run::RewardLearner& learner, const Trajectory& traj, ratio::ViewTag tag) {
  const int dim = learner.view().dim;
  Tensor rows(static_cast<int>(traj.transitions.size()), dim);
  for (size_t i = 0; i < traj.transitions.size(); ++i)
    envs::fill_transition_view(tag, traj.transitions[i],
                               {rows.data() + i * static_cast<size_t>(dim), static_cast<size_t>(dim)});
  const auto r = learner.reward_batch(rows);
  double mean = 0.0;
  for (double v : r) mean += v;
  return mean / static_cast<double>(r.size());
}

std::vector<double> ranks_with_ties(const std::vector<double>& v) {
  const size_t n = v.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  return rank;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks_with_ties(x);
  const auto ry = ranks_with_ties(y);
  const size_t n = x.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericError("spearman: zero rank variance");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

BcGraphResult bc_graph(const BcSnapshotSet& snapshots, run::RewardLearner& learner,
                       const envs::DemoSet& expert_demo, const run::CfilConfig& cfg, uint64_t seed,
                       int save_stride) {
  if (snapshots.snapshots.empty()) throw ArgumentError("bc_graph: no snapshots");
  if (expert_demo.view() != cfg.regime || learner.view().dim != expert_demo.view_dim())
    throw ArgumentError("bc_graph: view mismatch between learner and demos");

  rl::ReplayBuffer agent_buffer(run::kReplayCapacity);
  const rl::ReplayBuffer::ViewSource agent_source = agent_buffer.view_source(cfg.regime);
  Rng est_rng(seed);

  BcGraphResult out;
  int i = 0;
  for (const BcSnapshot& snap : snapshots.snapshots) {
    ++i;
    for (const auto& tr : snap.rollout.transitions) agent_buffer.push(tr);
    learner.update(expert_demo, agent_source, cfg.n_batches, cfg.batch_size, run::kEstimatorLr, est_rng);

    BcGraphPoint point;
    point.index = i;
    point.true_return = snap.true_return;
    point.synthetic = mean_reward_on(learner, snap.rollout, cfg.regime);
    out.points.push_back(point);

    if (i == 1 || (save_stride > 0 && i % save_stride == 0)) {
      out.saved_indices.push_back(i);
      out.saved_states.push_back(learner.snapshot_params());
    }
  }
  return out;
}

double monotonicity_score(const std::vector<BcGraphPoint>& points, double expert_ref) {
  std::vector<double> x, y;
  for (const auto& p : points) {
    if (p.true_return < expert_ref) {
      x.push_back(p.true_return);
      y.push_back(p.synthetic);
    }
  }
  if (x.size() < 3) throw ArgumentError("monotonicity_score: fewer than 3 sub-expert points");
  return spearman(x, y);
}

BcGrid bc_2d_grid(const BcSnapshotSet& snapshots, const BcGraphResult& graph, run::RewardLearner& learner) {
  if (graph.saved_states.empty()) throw ArgumentError("bc_2d_grid: no saved estimator states");
  BcGrid grid;
  grid.estimator_indices = graph.saved_indices;
  for (const auto& snap : snapshots.snapshots) grid.true_returns.push_back(snap.true_return);

  const ratio::ViewTag tag = learner.view().tag;
  for (const auto& state : graph.saved_states) {
    learner.restore_params(state);
    std::vector<double> row;
    row.reserve(snapshots.snapshots.size());
    for (const auto& snap : snapshots.snapshots) row.push_back(mean_reward_on(learner, snap.rollout, tag));
    grid.mean_rewards.push_back(std::move(row));
  }
  return grid;
}

void write_bc_graph_csv(const std::string& path, const std::vector<BcGraphPoint>& points) {
  std::ofstream f(path);
  if (!f) throw StateError("write_bc_graph_csv: cannot open '" + path + "'");
  f << "index,true_return,synthetic_reward\n";
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", p.index, p.true_return, p.synthetic);
    f << buf;
  }
}

void write_bc_grid_csv(const std::string& path, const BcGrid& grid) {
  std::ofstream f(path);
  if (!f) throw StateError("write_bc_grid_csv: cannot open '" + path + "'");
  f << "estimator_index,trajectory_index,true_return,mean_synthetic_reward\n";
  char buf[160];
  for (size_t e = 0; e < grid.mean_rewards.size(); ++e)
    for (size_t j = 0; j < grid.mean_rewards[e].size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%d,%zu,%.17g,%.17g\n", grid.estimator_indices[e], j + 1,
                    grid.true_returns[j], grid.mean_rewards[e][j]);
      f << buf;
    }
}

}  // namespace cfil::analysis
