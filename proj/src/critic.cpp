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

#include "vlmpc/critic.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace vlmpc {

using Eigen::VectorXd;

ValueNetwork::ValueNetwork(std::vector<int> hidden, const Vec5& input_scale)
    : hidden_(std::move(hidden)), scale_(input_scale) {
  if (hidden_.empty()) throw std::invalid_argument("value network needs at least one hidden layer");
  dims_.push_back(5);
  for (int h : hidden_) {
    if (h < 1) throw std::invalid_argument("hidden layer width must be >= 1");
    dims_.push_back(h);
  }
  dims_.push_back(1);
  Eigen::Index offset = 0;
  for (int l = 0; l < num_layers(); ++l) {
    w_off_.push_back(offset);
    offset += static_cast<Eigen::Index>(dims_[l + 1]) * dims_[l];
    b_off_.push_back(offset);
    offset += dims_[l + 1];
  }
  theta_ = VectorXd::Zero(offset);
}

ValueNetwork ValueNetwork::initialized(std::vector<int> hidden, const Vec5& input_scale,
                                       std::mt19937_64& rng) {
  ValueNetwork net(std::move(hidden), input_scale);
  for (int l = 0; l < net.num_hidden(); ++l) {
    auto W = net.weight(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(W.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = dist(rng);
    }
  }
  return net;
}

Eigen::Map<const Eigen::MatrixXd> ValueNetwork::weight(int l) const {
  return {theta_.data() + w_off_[l], dims_[l + 1], dims_[l]};
}
Eigen::Map<Eigen::MatrixXd> ValueNetwork::weight(int l) {
  return {theta_.data() + w_off_[l], dims_[l + 1], dims_[l]};
}
Eigen::Map<const VectorXd> ValueNetwork::bias(int l) const {
  return {theta_.data() + b_off_[l], dims_[l + 1]};
}
Eigen::Map<VectorXd> ValueNetwork::bias(int l) { return {theta_.data() + b_off_[l], dims_[l + 1]}; }

bool ValueNetwork::same_shape(const ValueNetwork& other) const {
  return dims_ == other.dims_ && scale_ == other.scale_;
}

namespace {

// Activations of one forward pass plus the backward chain for dV/dz.
struct Tape {
  std::vector<VectorXd> h;      // h[0] = scaled input, h[l + 1] = tanh(a[l])
  std::vector<VectorXd> sigma;  // 1 - h[l + 1]^2
  std::vector<VectorXd> c;      // dV/da[l]
  std::vector<VectorXd> q;      // W[l + 1]^T c[l + 1]
  double value = 0.0;
};

void forward(const ValueNetwork& net, const Vec5& s, Tape& tape) {
  const int L = net.num_hidden();
  tape.h.resize(L + 1);
  tape.sigma.resize(L);
  tape.h[0] = net.input_scale().cwiseProduct(s);
  for (int l = 0; l < L; ++l) {
    tape.h[l + 1] = (net.weight(l) * tape.h[l] + net.bias(l)).array().tanh().matrix();
    tape.sigma[l] = (1.0 - tape.h[l + 1].array().square()).matrix();
  }
  tape.value = net.weight(L).row(0).dot(tape.h[L]) + net.bias(L)(0);
}

Vec5 input_jacobian(const ValueNetwork& net, Tape& tape) {
  const int L = net.num_hidden();
  tape.c.resize(L);
  tape.q.resize(L);
  tape.c[L - 1] = net.weight(L).row(0).transpose().cwiseProduct(tape.sigma[L - 1]);
  for (int l = L - 2; l >= 0; --l) {
    tape.q[l] = net.weight(l + 1).transpose() * tape.c[l + 1];
    tape.c[l] = tape.q[l].cwiseProduct(tape.sigma[l]);
  }
  const Vec5 jz = net.weight(0).transpose() * tape.c[0];
  return net.input_scale().cwiseProduct(jz);
}

}  // namespace

double ValueNetwork::value(const Vec5& s) const {
  Tape tape;
  forward(*this, s, tape);
  return tape.value;
}

ValueNetwork::ValueAndJacobian ValueNetwork::value_and_jacobian(const Vec5& s) const {
  Tape tape;
  forward(*this, s, tape);
  const Vec5 j = input_jacobian(*this, tape);
  return {tape.value, j};
}

Vec5 default_input_scale(double v_max, double omega_max) {
  Vec5 scale;
  scale << 1.0, 1.0, 1.0 / std::numbers::pi, 1.0 / v_max, 1.0 / omega_max;
  return scale;
}

double value_forward(const ValueNetwork& net, const FrenetError& s) {
  return net.value(s.to_vector());
}

Vec5 value_input_jacobian(const ValueNetwork& net, const FrenetError& s) {
  return net.value_and_jacobian(s.to_vector()).jacobian;
}

LossTerms loss_and_grad(const ValueNetwork& net, std::span<const RegressionSample> batch,
                        double beta, double lambda) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  const int L = net.num_hidden();
  const double inv_m = 1.0 / static_cast<double>(batch.size());

  // Gradients accumulate into a network-shaped buffer so the layer views line up.
  ValueNetwork grad_net = net;
  grad_net.params().setZero();

  LossTerms out;
  Tape tape;
  std::vector<VectorXd> h_bar(L + 1);
  std::vector<VectorXd> sigma_bar(L);

  for (const RegressionSample& sample : batch) {
    forward(net, sample.state, tape);
    const Vec5 js = input_jacobian(net, tape);
    const double residual = sample.target - tape.value;
    out.data += residual * residual * inv_m;
    out.jacobian += beta * js.squaredNorm() * inv_m;

    for (int l = 0; l < L; ++l) {
      h_bar[l + 1] = VectorXd::Zero(tape.h[l + 1].size());
      sigma_bar[l] = VectorXd::Zero(tape.h[l + 1].size());
    }

    // Reverse pass through the Jacobian chain (penalty term).
    if (beta != 0.0) {
      const Vec5 jz_bar = net.input_scale().cwiseProduct(2.0 * beta * inv_m * js);
      grad_net.weight(0).noalias() += tape.c[0] * jz_bar.transpose();
      VectorXd c_bar = net.weight(0) * jz_bar;
      for (int l = 0; l + 1 < L; ++l) {
        const VectorXd q_bar = c_bar.cwiseProduct(tape.sigma[l]);
        sigma_bar[l] += c_bar.cwiseProduct(tape.q[l]);
        grad_net.weight(l + 1).noalias() += tape.c[l + 1] * q_bar.transpose();
        c_bar = net.weight(l + 1) * q_bar;
      }
      grad_net.weight(L).row(0) += c_bar.cwiseProduct(tape.sigma[L - 1]).transpose();
      sigma_bar[L - 1] += c_bar.cwiseProduct(net.weight(L).row(0).transpose());
      for (int l = 0; l < L; ++l) {
        h_bar[l + 1] += -2.0 * tape.h[l + 1].cwiseProduct(sigma_bar[l]);
      }
    }

    // Regression term.
    const double v_bar = -2.0 * residual * inv_m;
    grad_net.weight(L).row(0) += v_bar * tape.h[L].transpose();
    grad_net.bias(L)(0) += v_bar;
    h_bar[L] += v_bar * net.weight(L).row(0).transpose();

    // Reverse pass through the forward network.
    for (int l = L - 1; l >= 0; --l) {
      const VectorXd a_bar = h_bar[l + 1].cwiseProduct(tape.sigma[l]);
      grad_net.weight(l).noalias() += a_bar * tape.h[l].transpose();
      grad_net.bias(l) += a_bar;
      if (l > 0) h_bar[l].noalias() += net.weight(l).transpose() * a_bar;
    }
  }

  out.decay = lambda * net.params().squaredNorm();
  out.loss = out.data + out.jacobian + out.decay;
  out.grad = std::move(grad_net.params());
  out.grad += 2.0 * lambda * net.params();
  return out;
}

void polyak_update(ValueNetwork& target, const ValueNetwork& net, double rho) {
  if (!target.same_shape(net)) throw std::invalid_argument("polyak_update: shape mismatch");
  target.params() = (1.0 - rho) * target.params() + rho * net.params();
}

namespace {

nlohmann::json network_to_json(const ValueNetwork& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (int l = 0; l < net.num_layers(); ++l) {
    const auto W = net.weight(l);
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(W.size()));
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) row_major.push_back(W(i, j));
    }
    const auto b = net.bias(l);
    layers.push_back({{"rows", W.rows()},
                      {"cols", W.cols()},
                      {"weights", row_major},
                      {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  return {{"layers", layers}};
}

void network_from_json(const nlohmann::json& j, ValueNetwork& net) {
  const auto& layers = j.at("layers");
  if (static_cast<int>(layers.size()) != net.num_layers()) {
    throw std::runtime_error("checkpoint layer count does not match hidden sizes");
  }
  for (int l = 0; l < net.num_layers(); ++l) {
    auto W = net.weight(l);
    auto b = net.bias(l);
    const auto& layer = layers[static_cast<std::size_t>(l)];
    const auto w = layer.at("weights").get<std::vector<double>>();
    const auto bias = layer.at("bias").get<std::vector<double>>();
    if (layer.at("rows").get<Eigen::Index>() != W.rows() ||
        layer.at("cols").get<Eigen::Index>() != W.cols() ||
        static_cast<Eigen::Index>(w.size()) != W.size() ||
        static_cast<Eigen::Index>(bias.size()) != b.size()) {
      throw std::runtime_error("checkpoint layer " + std::to_string(l) + " has the wrong shape");
    }
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index k = 0; k < W.cols(); ++k) {
        W(i, k) = w[static_cast<std::size_t>(i * W.cols() + k)];
      }
    }
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = bias[static_cast<std::size_t>(i)];
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CriticCheckpoint& ckpt) {
  if (!ckpt.critic.same_shape(ckpt.target)) {
    throw std::invalid_argument("checkpoint critic and target differ in shape");
  }
  const Vec5& scale = ckpt.critic.input_scale();
  nlohmann::json j;
  j["format"] = "vlmpc-critic";
  j["version"] = 1;
  j["activation"] = "tanh";
  j["input"] = {"x_err", "y_err", "psi_err", "v", "omega"};
  j["input_scale"] = std::vector<double>(scale.data(), scale.data() + 5);
  j["hidden"] = ckpt.critic.hidden();
  j["critic"] = network_to_json(ckpt.critic);
  j["target"] = network_to_json(ckpt.target);
  j["metadata"] = ckpt.metadata;

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write to a sibling file first so a crash never leaves a truncated checkpoint.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
    out << j.dump(1) << '\n';
    if (!out) throw std::runtime_error("checkpoint write failed for '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

CriticCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != "vlmpc-critic" || j.at("version").get<int>() != 1) {
      throw std::runtime_error("unsupported checkpoint format");
    }
    const auto hidden = j.at("hidden").get<std::vector<int>>();
    const auto s = j.at("input_scale").get<std::vector<double>>();
    if (s.size() != 5) throw std::runtime_error("input_scale must have 5 entries");
    const Vec5 scale(s.data());
    CriticCheckpoint ckpt{ValueNetwork(hidden, scale), ValueNetwork(hidden, scale), {}};
    network_from_json(j.at("critic"), ckpt.critic);
    network_from_json(j.at("target"), ckpt.target);
    if (j.contains("metadata")) {
      ckpt.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed checkpoint '" + path.string() + "': " + e.what());
  }
}

}  // namespace vlmpc
