#pragma once

#include <string>
#include <vector>

#include "cfil/analysis/bc.hpp"
#include "cfil/run/train.hpp"

namespace cfil::analysis {

struct BcGraphPoint {
  int index = 0;          // 1-based snapshot number
  double true_return = 0.0;
  double synthetic = 0.0;  // mean per-step synthetic reward on that rollout
};

struct BcGraphResult {
  std::vector<BcGraphPoint> points;
  // Estimator parameter snapshots taken after every save_stride-th update
  // (plus the first), for the two-dimensional analysis.
  std::vector<int> saved_indices;  // 1-based, aligned with saved_states
  std::vector<std::vector<ParamStore>> saved_states;
};

// The diagnostic: train the estimator analogously to an RL run, feeding the
// i-th BC rollout into the agent buffer before the i-th update block, then
// score the i-th estimator on the i-th rollout against its true return.
BcGraphResult bc_graph(const BcSnapshotSet& snapshots, run::RewardLearner& learner,
                       const envs::DemoSet& expert_demo, const run::CfilConfig& cfg, uint64_t seed,
                       int save_stride = 10);

// Spearman rank correlation over the sub-expert points (true return below
// the expert reference); the beyond-expert drop must not penalize it.
// Requires at least 3 sub-expert points.
double monotonicity_score(const std::vector<BcGraphPoint>& points, double expert_ref);

// Cross-evaluation of saved estimator states on all rollouts; the rows
// correspond to saved_indices, the columns to snapshots.
struct BcGrid {
  std::vector<int> estimator_indices;
  std::vector<double> true_returns;                // per trajectory
  std::vector<std::vector<double>> mean_rewards;   // [estimator][trajectory]
};

BcGrid bc_2d_grid(const BcSnapshotSet& snapshots, const BcGraphResult& graph, run::RewardLearner& learner);

void write_bc_graph_csv(const std::string& path, const std::vector<BcGraphPoint>& points);
void write_bc_grid_csv(const std::string& path, const BcGrid& grid);

}  // namespace cfil::analysis
