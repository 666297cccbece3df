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

#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vlmpc/frenet.hpp"

namespace vlmpc {

/// Fully-connected tanh network mapping a FrenetError to a scalar value.
///
/// Inputs are scaled element-wise by a fixed diagonal before the first layer;
/// the reported Jacobian is with respect to the unscaled (physical) input.
/// All weights and biases live in one flat vector so optimizers, Polyak
/// averaging and checkpoints treat them uniformly.
class ValueNetwork {
 public:
  ValueNetwork() = default;
  /// All parameters zero.
  ValueNetwork(std::vector<int> hidden, const Vec5& input_scale);

  /// Fan-in scaled uniform hidden weights, zero biases, zero output layer.
  static ValueNetwork initialized(std::vector<int> hidden, const Vec5& input_scale,
                                  std::mt19937_64& rng);

  double value(const Vec5& s) const;

  struct ValueAndJacobian {
    double value;
    Vec5 jacobian;
  };
  ValueAndJacobian value_and_jacobian(const Vec5& s) const;

  /// Layer 0..num_hidden() are affine maps; the last one is the linear head.
  int num_layers() const { return static_cast<int>(dims_.size()) - 1; }
  int num_hidden() const { return num_layers() - 1; }
  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);

  Eigen::Index num_params() const { return theta_.size(); }
  const Eigen::VectorXd& params() const { return theta_; }
  Eigen::VectorXd& params() { return theta_; }
  const std::vector<int>& hidden() const { return hidden_; }
  const Vec5& input_scale() const { return scale_; }
  bool same_shape(const ValueNetwork& other) const;
  bool is_finite() const { return theta_.allFinite(); }

 private:
  std::vector<int> hidden_;
  std::vector<int> dims_;
  std::vector<Eigen::Index> w_off_;
  std::vector<Eigen::Index> b_off_;
  Vec5 scale_ = Vec5::Ones();
  Eigen::VectorXd theta_;
};

/// Default per-coordinate input scaling: [1, 1, 1/pi, 1/v_max, 1/omega_max].
Vec5 default_input_scale(double v_max, double omega_max);

double value_forward(const ValueNetwork& net, const FrenetError& s);
Vec5 value_input_jacobian(const ValueNetwork& net, const FrenetError& s);

struct RegressionSample {
  Vec5 state;
  double target;
};

struct LossTerms {
  double loss = 0.0;
  double data = 0.0;       // mean squared regression error
  double jacobian = 0.0;   // beta * mean ||dV/ds||^2
  double decay = 0.0;      // lambda * ||theta||^2
  Eigen::VectorXd grad;    // d loss / d theta
};

/// L = 1/M sum[(y - V(s))^2 + beta ||dV/ds||^2] + lambda ||theta||^2 and its
/// exact parameter gradient. Targets are constants. Throws std::invalid_argument
/// on an empty batch.
LossTerms loss_and_grad(const ValueNetwork& net, std::span<const RegressionSample> batch,
                        double beta, double lambda);

/// target <- (1 - rho) target + rho net. Throws on shape mismatch.
void polyak_update(ValueNetwork& target, const ValueNetwork& net, double rho);

struct CriticCheckpoint {
  ValueNetwork critic;
  ValueNetwork target;
  std::map<std::string, std::string> metadata;
};

/// JSON with layer shapes, row-major weights, biases and the input scaling.
void save_checkpoint(const std::filesystem::path& path, const CriticCheckpoint& ckpt);
CriticCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vlmpc
