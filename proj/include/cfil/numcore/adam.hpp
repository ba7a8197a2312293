#pragma once

#include <map>
#include <vector>

#include "cfil/numcore/param_store.hpp"

namespace cfil::numcore {

// Adam with bias correction. One instance may drive several stores that are
// always stepped together; the step counter is shared across them.
class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  struct Item {
    ParamStore* store;
    const GradMap* grads;
  };

  void step(const std::vector<Item>& items, double lr);
  void step(ParamStore& store, const GradMap& grads, double lr) { step({{&store, &grads}}, lr); }

  long steps_taken() const { return t_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };

  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<const ParamStore*, Moments> state_;
};

}  // namespace cfil::numcore
