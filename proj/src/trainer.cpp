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

#include "vlmpc/trainer.hpp"

#include <cmath>
#include <sstream>

namespace vlmpc {

Adam::Adam(Eigen::Index size, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

CriticTrainer::CriticTrainer(ValueNetwork critic, TrainConfig cfg)
    : cfg_(cfg),
      critic_(std::move(critic)),
      target_(critic_),
      adam_(critic_.num_params(), cfg.learning_rate),
      rng_(cfg.seed) {
  cfg_.validate();
}

double CriticTrainer::train_step(const ReplayBuffer& buffer) {
  const auto m = static_cast<std::size_t>(cfg_.batch_size);
  if (buffer.size() < m) throw std::logic_error("train_step: replay buffer smaller than batch");
  batch_.clear();
  for (std::size_t i = 0; i < m; ++i) {
    const auto segment = buffer.segment(buffer.sample_index(rng_), cfg_.n_step);
    batch_.push_back({segment.front().s.to_vector(),
                      n_step_target(segment, target_, cfg_.gamma, cfg_.n_step)});
  }
  const LossTerms terms = loss_and_grad(critic_, batch_, cfg_.beta, cfg_.lambda);
  if (!std::isfinite(terms.loss) || !terms.grad.allFinite()) {
    std::ostringstream msg;
    msg << "critic loss diverged at update " << adam_.steps() << ": loss=" << terms.loss
        << " data=" << terms.data << " jacobian=" << terms.jacobian << " decay=" << terms.decay;
    throw TrainingDiverged(msg.str());
  }
  adam_.step(critic_.params(), terms.grad);
  polyak_update(target_, critic_, cfg_.rho);
  return terms.loss;
}

}  // namespace vlmpc
