#include "cfil/rl/replay.hpp"

#include "cfil/numcore/errors.hpp"

namespace cfil::rl {

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ArgumentError("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition tr) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(tr));
    return;
  }
  items_[head_] = std::move(tr);
  head_ = (head_ + 1) % capacity_;
}

std::vector<size_t> ReplayBuffer::sample_indices(int n, Rng& rng) const {
  if (items_.empty()) throw StateError("ReplayBuffer::sample_indices: buffer is empty");
  std::vector<size_t> out(static_cast<size_t>(n));
  for (auto& i : out) i = static_cast<size_t>(rng.randint(static_cast<int>(items_.size())));
  return out;
}

}  // namespace cfil::rl
