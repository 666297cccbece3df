// Copyright 2026 The vlmpc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vlmpc/replay.hpp"

#include <cmath>
#include <stdexcept>

namespace vlmpc {

Transition mirror(const Transition& t) {
  return {mirror(t.s), mirror(t.a), t.r, mirror(t.s_next), t.done};
}

std::vector<Transition> augment(const Transition& t) { return {t, mirror(t)}; }

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in [0, 1)");
  if (n_step < 1) throw std::invalid_argument("n_step must be >= 1");
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("polyak rho must be in (0, 1]");
  if (!(beta >= 0.0) || !(lambda >= 0.0)) throw std::invalid_argument("beta, lambda must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (update_interval < 1) throw std::invalid_argument("update_interval must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
}

double n_step_target(std::span<const Transition> segment, const ValueNetwork& target,
                     double gamma, int n) {
  if (segment.empty()) throw std::invalid_argument("n_step_target: empty segment");
  const std::size_t m = std::min(segment.size(), static_cast<std::size_t>(std::max(n, 1)));
  double ret = 0.0;
  double discount = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    ret += discount * segment[i].r;
    discount *= gamma;
  }
  return ret + discount * target.value(segment[m - 1].s_next.to_vector());
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("replay capacity must be > 0");
}

ReplayBuffer::EpisodeId ReplayBuffer::open_episode() {
  episodes_.push_back({next_id_, true, {}});
  return next_id_++;
}

ReplayBuffer::Episode& ReplayBuffer::find(EpisodeId id) {
  for (auto it = episodes_.rbegin(); it != episodes_.rend(); ++it) {
    if (it->id == id) return *it;
  }
  throw std::out_of_range("unknown replay episode");
}

void ReplayBuffer::push(EpisodeId id, const Transition& t) {
  Episode& ep = find(id);
  if (!ep.open) throw std::logic_error("push into a closed replay episode");
  ep.steps.push_back(t);
  ++size_;
  evict();
}

void ReplayBuffer::close_episode(EpisodeId id) {
  find(id).open = false;
  evict();
}

void ReplayBuffer::evict() {
  while (size_ > capacity_ && !episodes_.empty() && !episodes_.front().open) {
    size_ -= episodes_.front().steps.size();
    episodes_.pop_front();
  }
}

std::span<const Transition> ReplayBuffer::segment(std::size_t index, int n) const {
  for (const Episode& ep : episodes_) {
    if (index < ep.steps.size()) {
      const std::size_t len = std::min(ep.steps.size() - index, static_cast<std::size_t>(n));
      return {ep.steps.data() + index, len};
    }
    index -= ep.steps.size();
  }
  throw std::out_of_range("replay index out of range");
}

std::size_t ReplayBuffer::sample_index(std::mt19937_64& rng) const {
  if (size_ == 0) throw std::logic_error("sampling from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> dist(0, size_ - 1);
  return dist(rng);
}

}  // namespace vlmpc
