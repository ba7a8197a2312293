#pragma once

#include <vector>

#include "cfil/envs/demos.hpp"
#include "cfil/numcore/rng.hpp"

namespace cfil::rl {

using envs::Transition;
using numcore::Rng;
using ratio::ViewTag;

// Bounded FIFO transition store with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);

  void push(Transition tr);
  size_t size() const { return items_.size(); }
  size_t capacity() const { return capacity_; }
  const Transition& at(size_t i) const { return items_[(head_ + i) % items_.size()]; }

  std::vector<size_t> sample_indices(int n, Rng& rng) const;

  // Estimator-facing view over the stored transitions. The undiscounted
  // visitation convention: rows are drawn uniformly, with no gamma
  // weighting anywhere.
  class ViewSource : public ratio::BatchSource {
   public:
    ViewSource(const ReplayBuffer& buffer, ViewTag tag) : buffer_(buffer), tag_(tag) {}
    size_t size() const override { return buffer_.size(); }
    void fill_row(size_t index, std::span<double> out) const override {
      envs::fill_transition_view(tag_, buffer_.at(index), out);
    }

   private:
    const ReplayBuffer& buffer_;
    ViewTag tag_;
  };

  ViewSource view_source(ViewTag tag) const { return ViewSource(*this, tag); }

 private:
  size_t capacity_;
  size_t head_ = 0;  // logical start when full
  std::vector<Transition> items_;
};

}  // namespace cfil::rl
