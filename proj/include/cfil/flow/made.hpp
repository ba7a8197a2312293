#pragma once

#include <cstdint>
#include <vector>

#include "cfil/numcore/mlp.hpp"
#include "cfil/numcore/tensor.hpp"

namespace cfil::flow {

using numcore::MlpSpec;
using numcore::ParamStore;
using numcore::Tensor;

// Binary connectivity masks enforcing the autoregressive property: output
// unit i may depend only on inputs with degree < degree(i). Input degrees
// are 1..dim in natural order; the final layer emits two blocks (scale and
// shift) of dim units each, with strict-inequality masking.
struct MadeMaskSet {
  int dim = 0;
  std::vector<int> input_degrees;
  std::vector<std::vector<int>> hidden_degrees;
  std::vector<Tensor> masks;  // (out x in) per layer, aligned with MlpSpec layout

  // Connectivity counts from inputs to the 2*dim outputs; entry (i, j) > 0
  // means output i can see input j.
  Tensor connectivity() const;
};

MadeMaskSet build_made_masks(int dim, const std::vector<int>& hidden_sizes, uint64_t seed);

// Masked forward pass without a graph (used by sequential inversion).
std::vector<double> eval_mlp_masked(const ParamStore& store, const std::string& prefix, const MlpSpec& spec,
                                    std::span<const double> input, const std::vector<Tensor>& masks);

}  // namespace cfil::flow
