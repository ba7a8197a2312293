#include "cfil/flow/made.hpp"

#include <cmath>

#include "cfil/numcore/errors.hpp"
#include "cfil/numcore/rng.hpp"

namespace cfil::flow {

using numcore::Act;
using numcore::Rng;

MadeMaskSet build_made_masks(int dim, const std::vector<int>& hidden_sizes, uint64_t seed) {
  if (dim == 0) throw ArgumentError("build_made_masks: dim must be positive");
  if (dim < 0) throw ArgumentError("build_made_masks: dim must be positive");

  MadeMaskSet set;
  set.dim = dim;
  set.input_degrees.resize(dim);
  for (int i = 0; i < dim; ++i) set.input_degrees[i] = i + 1;

  // Hidden degrees uniform in [1, dim-1]; for dim = 1 every hidden unit gets
  // degree 1, which disconnects all outputs (they become constants).
  Rng rng(seed);
  for (int hs : hidden_sizes) {
    std::vector<int> degs(hs);
    for (int& d : degs) d = dim == 1 ? 1 : 1 + rng.randint(dim - 1);
    set.hidden_degrees.push_back(std::move(degs));
  }

  auto prev_degrees = [&](size_t layer) -> const std::vector<int>& {
    return layer == 0 ? set.input_degrees : set.hidden_degrees[layer - 1];
  };

  for (size_t l = 0; l < set.hidden_degrees.size(); ++l) {
    const auto& in_deg = prev_degrees(l);
    const auto& out_deg = set.hidden_degrees[l];
    Tensor m(static_cast<int>(out_deg.size()), static_cast<int>(in_deg.size()));
    for (size_t i = 0; i < out_deg.size(); ++i)
      for (size_t j = 0; j < in_deg.size(); ++j)
        if (out_deg[i] >= in_deg[j]) m.at(static_cast<int>(i), static_cast<int>(j)) = 1.0;
    set.masks.push_back(std::move(m));
  }

  // Output layer: two blocks of dim units; block entry i carries the degree
  // of dimension i and connects with strict inequality.
  {
    const auto& in_deg = prev_degrees(set.hidden_degrees.size());
    Tensor m(2 * dim, static_cast<int>(in_deg.size()));
    for (int block = 0; block < 2; ++block)
      for (int i = 0; i < dim; ++i)
        for (size_t j = 0; j < in_deg.size(); ++j)
          if (set.input_degrees[i] > in_deg[j]) m.at(block * dim + i, static_cast<int>(j)) = 1.0;
    set.masks.push_back(std::move(m));
  }
  return set;
}

Tensor MadeMaskSet::connectivity() const {
  // Multiply masks in application order: C = M_last * ... * M_0.
  Tensor c = masks[0];
  for (size_t l = 1; l < masks.size(); ++l) {
    const Tensor& m = masks[l];
    Tensor next(m.rows(), c.cols());
    for (int i = 0; i < m.rows(); ++i)
      for (int k = 0; k < m.cols(); ++k) {
        const double mv = m.at(i, k);
        if (mv == 0.0) continue;
        for (int j = 0; j < c.cols(); ++j) next.at(i, j) += mv * c.at(k, j);
      }
    c = std::move(next);
  }
  return c;
}

std::vector<double> eval_mlp_masked(const ParamStore& store, const std::string& prefix, const MlpSpec& spec,
                                    std::span<const double> input, const std::vector<Tensor>& masks) {
  spec.validate();
  if (static_cast<int>(input.size()) != spec.input_dim())
    throw DimensionError("eval_mlp_masked: input length does not match first layer");
  std::vector<double> cur(input.begin(), input.end());
  for (int l = 0; l < spec.layer_count(); ++l) {
    const Tensor& w = store.at(prefix + "w" + std::to_string(l));
    const Tensor& b = store.at(prefix + "b" + std::to_string(l));
    const Tensor& m = masks[l];
    const int in = w.cols(), out = w.rows();
    std::vector<double> next(out);
    for (int j = 0; j < out; ++j) {
      double acc = b.at(0, j);
      for (int k = 0; k < in; ++k) acc += w.at(j, k) * m.at(j, k) * cur[k];
      switch (spec.acts[l]) {
        case Act::Identity: break;
        case Act::Tanh: acc = std::tanh(acc); break;
        case Act::Relu: acc = acc > 0.0 ? acc : 0.0; break;
      }
      next[j] = acc;
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace cfil::flow
