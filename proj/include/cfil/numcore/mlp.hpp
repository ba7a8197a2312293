#pragma once

#include <span>
#include <string>
#include <vector>

#include "cfil/numcore/graph.hpp"
#include "cfil/numcore/param_store.hpp"
#include "cfil/numcore/rng.hpp"

namespace cfil::numcore {

enum class Act { Identity, Tanh, Relu };

Act act_from_string(const std::string& s);

// Dense feed-forward network description. sizes = [in, h1, ..., out];
// acts[i] is applied after layer i, so acts.size() == sizes.size() - 1.
struct MlpSpec {
  std::vector<int> sizes;
  std::vector<Act> acts;

  int layer_count() const { return static_cast<int>(sizes.size()) - 1; }
  int input_dim() const { return sizes.front(); }
  int output_dim() const { return sizes.back(); }
  void validate() const;
};

// Parameters are named "<prefix>w<i>" (out x in) and "<prefix>b<i>" (1 x out).
// Weights start uniform in +-1/sqrt(fan_in); zero_last zeroes the final
// layer so the network starts as the constant-zero map.
void init_mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec, Rng& rng, bool zero_last = false);

// Plain forward pass, no graph. Deterministic for fixed params and input.
std::vector<double> eval_mlp(const ParamStore& store, const std::string& prefix, const MlpSpec& spec,
                             std::span<const double> input);

// Graph forward over a batch (rows are samples).
Var mlp_forward(Graph& g, const ParamStore& store, const std::string& prefix, const MlpSpec& spec, Var input);

// Same with per-layer binary masks multiplied into the weights (MADE-style).
Var mlp_forward_masked(Graph& g, const ParamStore& store, const std::string& prefix, const MlpSpec& spec, Var input,
                       const std::vector<Tensor>& masks);

}  // namespace cfil::numcore
