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

#include "vlmpc/rewards.hpp"

#include <cmath>
#include <stdexcept>

namespace vlmpc {

RewardMode parse_reward_mode(std::string_view name) {
  if (name == "dense") return RewardMode::dense;
  if (name == "sparse") return RewardMode::sparse;
  throw std::invalid_argument("unknown reward mode '" + std::string(name) + "'");
}

std::string to_string(RewardMode mode) { return mode == RewardMode::dense ? "dense" : "sparse"; }

void RewardConfig::validate() const {
  if (!(sparse_threshold_m > 0.0)) throw std::invalid_argument("sparse_threshold_m must be > 0");
  if (!(sparse_penalty < 0.0)) throw std::invalid_argument("sparse_penalty must be < 0");
}

double dense_reward(const FrenetError& e) { return -(e.x_err * e.x_err + e.y_err * e.y_err); }

double sparse_reward(const FrenetError& e, const RewardConfig& cfg) {
  const bool outside =
      std::abs(e.x_err) > cfg.sparse_threshold_m || std::abs(e.y_err) > cfg.sparse_threshold_m;
  return outside ? cfg.sparse_penalty : 0.0;
}

double reward(const FrenetError& e, const RewardConfig& cfg) {
  return cfg.mode == RewardMode::dense ? dense_reward(e) : sparse_reward(e, cfg);
}

}  // namespace vlmpc
