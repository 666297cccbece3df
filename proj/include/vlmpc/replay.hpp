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

#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <vector>

#include "vlmpc/critic.hpp"
#include "vlmpc/dynamics.hpp"
#include "vlmpc/frenet.hpp"

namespace vlmpc {

struct Transition {
  FrenetError s;
  VelocityCommand a;
  double r = 0.0;
  FrenetError s_next;
  bool done = false;
};

/// The transition and its mirror image across the reference path.
std::vector<Transition> augment(const Transition& t);
Transition mirror(const Transition& t);

struct TrainConfig {
  double gamma = 0.99;
  int n_step = 5;
  double rho = 0.01;  // Polyak factor
  double beta = 1e-3;
  double lambda = 1e-5;
  int batch_size = 64;
  int update_interval = 10;  // environment steps between critic updates
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Discounted n-step return over `segment`, truncated at its end, bootstrapped
/// with the target network on the last successor observation. Episode ends
/// are truncations and are always bootstrapped.
double n_step_target(std::span<const Transition> segment, const ValueNetwork& target,
                     double gamma, int n);

/// Replay storage that keeps transitions in episode order. Several episodes
/// may be open at once (an episode and its mirrored twin). When full, whole
/// closed episodes are evicted oldest first.
class ReplayBuffer {
 public:
  using EpisodeId = std::uint64_t;

  explicit ReplayBuffer(std::size_t capacity);

  EpisodeId open_episode();
  void push(EpisodeId id, const Transition& t);
  void close_episode(EpisodeId id);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t num_episodes() const { return episodes_.size(); }

  /// Up to n transitions starting at flat index `index`, never crossing an
  /// episode boundary.
  std::span<const Transition> segment(std::size_t index, int n) const;

  /// Uniformly drawn start index.
  std::size_t sample_index(std::mt19937_64& rng) const;

 private:
  struct Episode {
    EpisodeId id;
    bool open;
    std::vector<Transition> steps;
  };
  Episode& find(EpisodeId id);
  void evict();

  std::size_t capacity_;
  std::size_t size_ = 0;
  EpisodeId next_id_ = 0;
  std::deque<Episode> episodes_;
};

}  // namespace vlmpc
