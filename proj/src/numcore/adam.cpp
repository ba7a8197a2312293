#include "cfil/numcore/adam.hpp"

#include <cmath>

#include "cfil/numcore/errors.hpp"

namespace cfil::numcore {

void Adam::step(const std::vector<Item>& items, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const Item& item : items) {
    Moments& mom = state_[item.store];
    const size_t n = item.store->flat_size();
    if (mom.m.empty()) {
      mom.m.assign(n, 0.0);
      mom.v.assign(n, 0.0);
    } else if (mom.m.size() != n) {
      throw StateError("Adam::step: store size changed");
    }
    size_t off = 0;
    for (size_t i = 0; i < item.store->count(); ++i) {
      Tensor& p = item.store->tensor(i);
      const Tensor& g = item.grads->tensor(i);
      if (!p.same_shape(g)) throw DimensionError("Adam::step: gradient shape mismatch");
      double* pd = p.data();
      const double* gd = g.data();
      for (size_t k = 0; k < p.size(); ++k) {
        double& m = mom.m[off + k];
        double& v = mom.v[off + k];
        m = beta1_ * m + (1.0 - beta1_) * gd[k];
        v = beta2_ * v + (1.0 - beta2_) * gd[k] * gd[k];
        pd[k] -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps_);
      }
      off += p.size();
    }
  }
}

}  // namespace cfil::numcore
