#pragma once

// Test-only oracles, kept independent of the library's gradient path: finite
// differences re-evaluate the loss through fresh forward passes only.

#include <cmath>
#include <functional>
#include <vector>

#include "cfil/numcore/graph.hpp"
#include "cfil/numcore/param_store.hpp"

namespace testutil {

using cfil::numcore::GradMap;
using cfil::numcore::Graph;
using cfil::numcore::ParamStore;
using cfil::numcore::Var;

using LossFn = std::function<Var(Graph&)>;

inline double eval_loss(const LossFn& loss_fn) {
  Graph g;
  return loss_fn(g).scalar();
}

// Central finite differences over the flat parameter vector.
inline std::vector<double> finite_diff_grads(ParamStore& params, const LossFn& loss_fn, double h = 1e-5) {
  std::vector<double> flat = params.flatten();
  std::vector<double> out(flat.size());
  for (size_t i = 0; i < flat.size(); ++i) {
    const double orig = flat[i];
    flat[i] = orig + h;
    params.unflatten(flat);
    const double up = eval_loss(loss_fn);
    flat[i] = orig - h;
    params.unflatten(flat);
    const double down = eval_loss(loss_fn);
    flat[i] = orig;
    params.unflatten(flat);
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

inline std::vector<double> flatten_grads(const GradMap& grads) {
  std::vector<double> out;
  for (size_t i = 0; i < grads.count(); ++i) {
    auto span = grads.tensor(i).flat();
    out.insert(out.end(), span.begin(), span.end());
  }
  return out;
}

// Max over coordinates of |a - b| / max(1e-6, |a|, |b|).
inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({1e-6, std::fabs(a[i]), std::fabs(b[i])});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace testutil
