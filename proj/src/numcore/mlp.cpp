#include "cfil/numcore/mlp.hpp"

#include <cmath>

#include "cfil/numcore/errors.hpp"

namespace cfil::numcore {

Act act_from_string(const std::string& s) {
  if (s == "tanh") return Act::Tanh;
  if (s == "relu") return Act::Relu;
  if (s == "identity" || s == "linear") return Act::Identity;
  throw ArgumentError("unsupported nonlinearity '" + s + "'");
}

void MlpSpec::validate() const {
  if (sizes.size() < 2) throw ArgumentError("MlpSpec: need at least input and output sizes");
  if (acts.size() != sizes.size() - 1) throw ArgumentError("MlpSpec: one activation per layer required");
  for (int s : sizes)
    if (s <= 0) throw ArgumentError("MlpSpec: layer sizes must be positive");
}

void init_mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec, Rng& rng, bool zero_last) {
  spec.validate();
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in = spec.sizes[l], out = spec.sizes[l + 1];
    Tensor& w = store.add(prefix + "w" + std::to_string(l), out, in);
    store.add(prefix + "b" + std::to_string(l), 1, out);
    const bool zero = zero_last && l == spec.layer_count() - 1;
    if (!zero) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      for (double& v : w.flat()) v = rng.uniform(-bound, bound);
    }
  }
}

std::vector<double> eval_mlp(const ParamStore& store, const std::string& prefix, const MlpSpec& spec,
                             std::span<const double> input) {
  spec.validate();
  if (static_cast<int>(input.size()) != spec.input_dim())
    throw DimensionError("eval_mlp: input length does not match first layer");
  std::vector<double> cur(input.begin(), input.end());
  for (int l = 0; l < spec.layer_count(); ++l) {
    const Tensor& w = store.at(prefix + "w" + std::to_string(l));
    const Tensor& b = store.at(prefix + "b" + std::to_string(l));
    const int in = w.cols(), out = w.rows();
    if (static_cast<int>(cur.size()) != in) throw DimensionError("eval_mlp: layer shape mismatch");
    std::vector<double> next(out);
    for (int j = 0; j < out; ++j) {
      double acc = b.at(0, j);
      const double* wj = w.data() + static_cast<size_t>(j) * in;
      for (int k = 0; k < in; ++k) acc += wj[k] * cur[k];
      switch (spec.acts[l]) {
        case Act::Identity: break;
        case Act::Tanh: acc = std::tanh(acc); break;
        case Act::Relu: acc = acc > 0.0 ? acc : 0.0; break;
      }
      next[j] = acc;
    }
    cur = std::move(next);
  }
  for (double v : cur)
    if (!std::isfinite(v)) throw NumericError("eval_mlp produced non-finite output");
  return cur;
}

static Var apply_act(Graph& g, Var x, Act a) {
  switch (a) {
    case Act::Identity: return x;
    case Act::Tanh: return g.tanh(x);
    case Act::Relu: return g.relu(x);
  }
  return x;
}

Var mlp_forward(Graph& g, const ParamStore& store, const std::string& prefix, const MlpSpec& spec, Var input) {
  spec.validate();
  Var cur = input;
  for (int l = 0; l < spec.layer_count(); ++l) {
    Var w = g.param(store, prefix + "w" + std::to_string(l));
    Var b = g.param(store, prefix + "b" + std::to_string(l));
    cur = apply_act(g, g.linear(cur, w, b), spec.acts[l]);
  }
  return cur;
}

Var mlp_forward_masked(Graph& g, const ParamStore& store, const std::string& prefix, const MlpSpec& spec, Var input,
                       const std::vector<Tensor>& masks) {
  spec.validate();
  if (static_cast<int>(masks.size()) != spec.layer_count())
    throw DimensionError("mlp_forward_masked: one mask per layer required");
  Var cur = input;
  for (int l = 0; l < spec.layer_count(); ++l) {
    Var w = g.param(store, prefix + "w" + std::to_string(l));
    Var b = g.param(store, prefix + "b" + std::to_string(l));
    Var wm = g.mul(w, g.constant(masks[l]));
    cur = apply_act(g, g.linear(cur, wm, b), spec.acts[l]);
  }
  return cur;
}

}  // namespace cfil::numcore
