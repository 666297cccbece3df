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

#include <string>
#include <string_view>

#include "vlmpc/frenet.hpp"

namespace vlmpc {

enum class RewardMode { dense, sparse };

RewardMode parse_reward_mode(std::string_view name);
std::string to_string(RewardMode mode);

struct RewardConfig {
  RewardMode mode = RewardMode::dense;
  double sparse_threshold_m = 0.1;
  double sparse_penalty = -0.5;

  void validate() const;
};

/// -(x_err^2 + y_err^2)
double dense_reward(const FrenetError& e);

/// Penalty outside the tracking band; a point exactly on the band edge is inside.
double sparse_reward(const FrenetError& e, const RewardConfig& cfg);

double reward(const FrenetError& e, const RewardConfig& cfg);

}  // namespace vlmpc
