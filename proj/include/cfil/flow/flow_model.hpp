#pragma once

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cfil/flow/made.hpp"
#include "cfil/numcore/adam.hpp"
#include "cfil/numcore/graph.hpp"
#include "cfil/numcore/rng.hpp"

namespace cfil::flow {

using numcore::Adam;
using numcore::Graph;
using numcore::GradMap;
using numcore::Rng;
using numcore::Var;

// Log-scales are clamped to this band before exponentiation.
inline constexpr double kLogScaleClamp = 7.0;

// Autoregressive layer: z_i = x_i * exp(s_i(x_{<i})) + t_i(x_{<i}) after an
// input permutation. The conditioner is one masked network emitting the
// scale block then the shift block.
struct MafLayer {
  int dim = 0;
  std::vector<int> perm;      // applied to the layer input
  std::vector<int> inv_perm;
  MlpSpec net;                // dim -> hidden -> 2*dim
  MadeMaskSet masks;
  std::string prefix;

  Var forward_node(Graph& g, const ParamStore& store, Var x, Var* logdet) const;
  // Sequential inversion in degree order; z and x are in layer coordinates.
  std::vector<double> invert(const ParamStore& store, std::span<const double> z) const;
  void forward_row(const ParamStore& store, std::span<const double> x, std::vector<double>& z,
                   double* logdet) const;
};

// RealNVP coupling layer: passes the first `split` dims through and affinely
// transforms the rest conditioned on them, after an input permutation.
struct CouplingLayer {
  int dim = 0;
  int split = 0;
  std::vector<int> perm;
  std::vector<int> inv_perm;
  MlpSpec s_net, t_net;       // split -> hidden -> dim - split
  std::string s_prefix, t_prefix;

  Var forward_node(Graph& g, const ParamStore& store, Var x, Var* logdet) const;
  std::vector<double> invert(const ParamStore& store, std::span<const double> y) const;
  void forward_row(const ParamStore& store, std::span<const double> x, std::vector<double>& y,
                   double* logdet) const;
};

using FlowLayer = std::variant<MafLayer, CouplingLayer>;

enum class FlowKind { Maf, Coupling };

// Stack of invertible transforms over a standard-normal base. Exact
// log-density via the change of variables formula; sampling by drawing from
// the base and inverting the stack.
class FlowModel {
 public:
  static FlowModel make_maf(int dim, int depth, std::vector<int> hidden, uint64_t seed);
  static FlowModel make_coupling(int dim, int depth, std::vector<int> hidden, uint64_t seed);

  int dim() const { return dim_; }
  ParamStore& params() { return *params_; }
  const ParamStore& params() const { return *params_; }
  const std::vector<FlowLayer>& layers() const { return layers_; }

  // (n x 1) column of log-densities for a batch node already in the graph.
  Var log_prob_node(Graph& g, Var x) const;
  // Forward-only batch evaluation.
  std::vector<double> log_prob_batch(const Tensor& xs) const;
  double log_prob(std::span<const double> x) const;

  // Data -> latent for one vector, accumulating the log-determinant.
  std::vector<double> forward_row(std::span<const double> x, double* logdet = nullptr) const;
  // Latent -> data (sampling direction).
  std::vector<double> inverse_row(std::span<const double> z) const;

  // n inverse samples from seeded base draws. Each returned row x satisfies
  // forward(x) ~= z for the z that generated it.
  Tensor sample(int n, uint64_t seed) const;

  // One Adam step on the mean negative log-likelihood; returns the
  // pre-step loss.
  double fit_mle_step(const Tensor& batch, double lr);

  Adam& optimizer() { return opt_; }

  void save(const std::string& path_prefix) const;  // <prefix>.params + <prefix>.arch
  static FlowModel load(const std::string& path_prefix);

 private:
  FlowModel() = default;
  void build(FlowKind kind, int dim, int depth, const std::vector<int>& hidden, uint64_t seed);

  int dim_ = 0;
  FlowKind kind_ = FlowKind::Maf;
  int depth_ = 1;
  std::vector<int> hidden_;
  uint64_t seed_ = 0;
  std::vector<FlowLayer> layers_;
  std::unique_ptr<ParamStore> params_;  // stable address for optimizer state
  Adam opt_;
};

}  // namespace cfil::flow
