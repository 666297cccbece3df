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

#include <random>
#include <stdexcept>
#include <string>

#include "vlmpc/critic.hpp"
#include "vlmpc/replay.hpp"

namespace vlmpc {

/// Raised when the critic loss becomes non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adaptive-moment optimizer over a flat parameter vector.
class Adam {
 public:
  explicit Adam(Eigen::Index size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  long long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  Eigen::VectorXd m_, v_;
};

/// Critic, its Polyak target and the optimizer state.
class CriticTrainer {
 public:
  CriticTrainer(ValueNetwork critic, TrainConfig cfg);

  /// One gradient step on a uniformly sampled batch with n-step targets from
  /// the target network, followed by the Polyak update. Returns the loss.
  /// Throws std::logic_error if the buffer holds fewer than batch_size
  /// transitions and TrainingDiverged on a non-finite loss.
  double train_step(const ReplayBuffer& buffer);

  const ValueNetwork& critic() const { return critic_; }
  const ValueNetwork& target() const { return target_; }
  const TrainConfig& config() const { return cfg_; }
  long long updates() const { return adam_.steps(); }

 private:
  TrainConfig cfg_;
  ValueNetwork critic_;
  ValueNetwork target_;
  Adam adam_;
  std::mt19937_64 rng_;
  std::vector<RegressionSample> batch_;
};

}  // namespace vlmpc
