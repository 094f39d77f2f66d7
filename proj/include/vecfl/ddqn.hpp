// Copyright 2026 The vecfl Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vecfl/errors.hpp"
#include "vecfl/random.hpp"

namespace vecfl {

// Quantization levels 2..10, one action each. Action index i selects level
// 2 + i.
struct ActionSpace {
  static constexpr std::uint32_t kMinLevel = 2;
  static constexpr std::uint32_t kMaxLevel = 10;
  static constexpr std::size_t kSize = kMaxLevel - kMinLevel + 1;

  static constexpr std::uint32_t level(std::size_t action) {
    return kMinLevel + static_cast<std::uint32_t>(action);
  }
  static constexpr bool contains(std::uint32_t q) { return q >= kMinLevel && q <= kMaxLevel; }
  static std::size_t index(std::uint32_t q) {
    if (!contains(q)) throw ValidationError("quantization level " + std::to_string(q) + " outside [2, 10]");
    return q - kMinLevel;
  }
};

using QValues = std::array<double, ActionSpace::kSize>;
using StateFeatures = std::array<double, 3>;

// Local observation: SNR reported for the previous step, current distance to
// the base station, and the level applied at the previous step.
struct AgentState {
  double gamma_prev = 0.0;
  double d_now = 1.0;
  std::uint32_t q_now = ActionSpace::kMinLevel;

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

// Maps raw observations onto [0, 1] network inputs. SNR is log-compressed
// first: log10(1 + gamma) is min-max scaled over [log_gamma_min, log_gamma_max].
struct StateNormalizer {
  double log_gamma_min = 0.0;
  double log_gamma_max = 8.0;
  double d_max = 500.0;

  StateFeatures operator()(const AgentState& s) const {
    const double lg = std::log10(1.0 + std::max(0.0, s.gamma_prev));
    const double g = (lg - log_gamma_min) / (log_gamma_max - log_gamma_min);
    const double q = static_cast<double>(s.q_now - ActionSpace::kMinLevel) /
                     static_cast<double>(ActionSpace::kMaxLevel - ActionSpace::kMinLevel);
    return {std::clamp(g, 0.0, 1.0), std::clamp(s.d_now / d_max, 0.0, 1.0), std::clamp(q, 0.0, 1.0)};
  }
};

struct Observation {
  double gamma_prev = 0.0;
  double distance = 1.0;
  std::uint32_t q_prev = ActionSpace::kMinLevel;
};

inline AgentState observe(const Observation& o) {
  if (!(o.distance > 0.0)) throw ValidationError("observe: distance must be positive");
  if (o.gamma_prev < 0.0) throw ValidationError("observe: SNR must be >= 0");
  ActionSpace::index(o.q_prev);
  return {o.gamma_prev, o.distance, o.q_prev};
}

struct Experience {
  AgentState s;
  std::size_t action = 0;
  double reward = 0.0;
  AgentState s_next;

  friend bool operator==(const Experience&, const Experience&) = default;
};

// -[w1 * (R_lambda * T_fed) + w2 * E]
inline double reward(double w1, double w2, double rounds, double fed_time, double error) {
  if (w1 < 0.0 || w2 < 0.0) throw ValidationError("reward: weights must be >= 0");
  return -(w1 * (rounds * fed_time) + w2 * error);
}

// Fixed-capacity FIFO ring.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ValidationError("ReplayBuffer: capacity must be >= 1");
    data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void store(const Experience& e) {
    if (data_.size() < capacity_) {
      data_.push_back(e);
    } else {
      data_[head_] = e;
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }

  // Oldest first.
  const Experience& at(std::size_t i) const { return data_[(head_ + i) % data_.size()]; }

  // Uniform with replacement. nullopt while fewer than `count` tuples are stored.
  template <class URBG>
  std::optional<std::vector<Experience>> sample(std::size_t count, URBG& rng) const {
    if (count == 0) throw ValidationError("ReplayBuffer::sample: count must be >= 1");
    if (data_.size() < count) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    std::vector<Experience> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(data_[pick(rng)]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Experience> data_;
};

// Fully connected net: 3 inputs -> ReLU hidden layers -> 9 linear outputs.
class QNetwork {
 public:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;
    friend bool operator==(const Layer&, const Layer&) = default;
  };

  QNetwork() = default;

  // He-uniform weights, zero biases.
  template <class URBG>
  QNetwork(std::span<const std::size_t> hidden, URBG& rng) {
    std::size_t in = 3;
    std::vector<std::size_t> sizes(hidden.begin(), hidden.end());
    sizes.push_back(ActionSpace::kSize);
    for (std::size_t out : sizes) {
      if (out == 0) throw ValidationError("QNetwork: layer width must be >= 1");
      Layer l{in, out, std::vector<double>(in * out), std::vector<double>(out, 0.0)};
      const double bound = std::sqrt(6.0 / static_cast<double>(in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (double& x : l.w) x = u(rng);
      layers_.push_back(std::move(l));
      in = out;
    }
  }

  const std::vector<Layer>& layers() const { return layers_; }

  // Per-layer inputs recorded by a forward pass; reused across calls.
  struct Trace {
    std::vector<std::vector<double>> inputs;
    std::vector<double> delta, prev;
  };

  QValues forward(const StateFeatures& x) const {
    thread_local Trace scratch;
    return forward(x, scratch);
  }

  QValues forward(const StateFeatures& x, Trace& t) const {
    if (layers_.empty()) throw ValidationError("QNetwork: network is empty");
    t.inputs.resize(layers_.size());
    t.inputs[0].assign(x.begin(), x.end());
    QValues q{};
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const Layer& l = layers_[li];
      const double* in = t.inputs[li].data();
      const bool last = li + 1 == layers_.size();
      double* out = last ? q.data() : (t.inputs[li + 1].resize(l.out), t.inputs[li + 1].data());
      for (std::size_t o = 0; o < l.out; ++o) {
        const double* row = l.w.data() + o * l.in;
        double s = l.b[o];
        for (std::size_t i = 0; i < l.in; ++i) s += row[i] * in[i];
        out[o] = last ? s : std::max(0.0, s);
      }
    }
    return q;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.w.size() + l.b.size();
    return n;
  }

  std::vector<double> parameters() const {
    std::vector<double> p;
    p.reserve(parameter_count());
    for (const auto& l : layers_) {
      p.insert(p.end(), l.w.begin(), l.w.end());
      p.insert(p.end(), l.b.begin(), l.b.end());
    }
    return p;
  }

  void set_parameters(std::span<const double> p) {
    if (p.size() != parameter_count()) throw ValidationError("QNetwork: parameter count mismatch");
    std::size_t k = 0;
    for (auto& l : layers_) {
      for (double& x : l.w) x = p[k++];
      for (double& x : l.b) x = p[k++];
    }
  }

  // Adds d(loss)/d(theta) into grad given d(loss)/d(output) for one input.
  void backward(const StateFeatures& x, const QValues& dout, std::span<double> grad) const {
    thread_local Trace scratch;
    forward(x, scratch);
    backward(scratch, dout, grad);
  }

  // Same, reusing the trace of a forward pass on the input.
  void backward(Trace& t, const QValues& dout, std::span<double> grad) const {
    if (grad.size() != parameter_count()) throw ValidationError("QNetwork: gradient size mismatch");
    std::size_t off = grad.size();
    t.delta.assign(dout.begin(), dout.end());
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const Layer& l = layers_[li];
      const double* input = t.inputs[li].data();
      off -= l.w.size() + l.b.size();
      double* gw = grad.data() + off;
      double* gb = gw + l.w.size();
      for (std::size_t o = 0; o < l.out; ++o) {
        const double d = t.delta[o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* row = gw + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) row[i] += d * input[i];
      }
      if (li == 0) break;
      t.prev.assign(l.in, 0.0);
      for (std::size_t o = 0; o < l.out; ++o) {
        const double d = t.delta[o];
        if (d == 0.0) continue;
        const double* row = l.w.data() + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) t.prev[i] += row[i] * d;
      }
      // ReLU derivative at the previous layer's output.
      for (std::size_t i = 0; i < l.in; ++i) {
        if (input[i] <= 0.0) t.prev[i] = 0.0;
      }
      std::swap(t.delta, t.prev);
    }
  }

  void apply_gradient(std::span<const double> grad, double lr) {
    std::size_t k = 0;
    for (auto& l : layers_) {
      for (double& x : l.w) x -= lr * grad[k++];
      for (double& x : l.b) x -= lr * grad[k++];
    }
  }

  friend bool operator==(const QNetwork&, const QNetwork&) = default;

 private:
  std::vector<Layer> layers_;
};

// argmax with ties resolved toward the lowest action index.
inline std::size_t greedy_action(const QValues& q) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < q.size(); ++a) {
    if (q[a] > q[best]) best = a;
  }
  return best;
}

// Explores with probability eps (uniform over the action space), otherwise
// exploits.
template <class URBG>
std::size_t act_epsilon_greedy(const QNetwork& net, const StateFeatures& s, double eps, URBG& rng) {
  if (eps < 0.0 || eps > 1.0) throw ValidationError("act_epsilon_greedy: eps must be in [0, 1]");
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < eps) {
    return std::uniform_int_distribution<std::size_t>(0, ActionSpace::kSize - 1)(rng);
  }
  return greedy_action(net.forward(s));
}

struct TargetValue {
  double y = 0.0;
  std::size_t next_action = 0;  // chosen by the prediction net
};

// Double-Q target: the prediction net picks the next action, the target net
// scores it.
inline TargetValue target_value(const QNetwork& net, const QNetwork& target_net, const Experience& e,
                                double gamma, const StateNormalizer& norm) {
  if (gamma < 0.0 || gamma > 1.0) throw ValidationError("target_value: gamma must be in [0, 1]");
  const StateFeatures next = norm(e.s_next);
  const std::size_t a = greedy_action(net.forward(next));
  if (gamma == 0.0) return {e.reward, a};
  return {e.reward + gamma * target_net.forward(next)[a], a};
}

// Mean squared error over the batch between targets and the taken action's
// Q-value; gradient with respect to net's parameters is written into grad.
inline double batch_loss_and_gradient(const QNetwork& net, std::span<const Experience> batch,
                                      std::span<const double> targets, const StateNormalizer& norm,
                                      std::vector<double>& grad) {
  grad.assign(net.parameter_count(), 0.0);
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  thread_local QNetwork::Trace trace;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const QValues q = net.forward(norm(batch[i].s), trace);
    const double err = targets[i] - q[batch[i].action];
    loss += err * err;
    QValues dout{};
    dout[batch[i].action] = -2.0 * err / n;
    net.backward(trace, dout, grad);
  }
  return loss / n;
}

// One SGD step on the double-Q loss. Returns the loss before the update.
inline double train_step(QNetwork& net, const QNetwork& target_net, std::span<const Experience> batch,
                         double gamma, double lr, const StateNormalizer& norm) {
  if (batch.empty()) throw ValidationError("train_step: empty batch");
  if (lr < 0.0) throw ValidationError("train_step: learning rate must be >= 0");
  std::vector<double> targets(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) targets[i] = target_value(net, target_net, batch[i], gamma, norm).y;
  std::vector<double> grad;
  const double loss = batch_loss_and_gradient(net, batch, targets, norm, grad);
  if (!std::isfinite(loss)) throw TrainingDiverged("train_step: non-finite loss (diverging Q-network)");
  if (lr > 0.0) net.apply_gradient(grad, lr);
  return loss;
}

inline void sync_target(const QNetwork& net, QNetwork& target_net) { target_net = net; }

struct DdqnParams {
  double gamma = 0.99;
  double lr = 1e-3;
  std::size_t batch = 64;          // I
  std::size_t sync_period = 1000;  // C
  std::size_t buffer_capacity = 250000;
  std::vector<std::size_t> hidden{64};
  StateNormalizer norm;
};

// One vehicle's learner: prediction and target nets, its own replay buffer
// and random streams. Agents never share state.
class DdqnAgent {
 public:
  DdqnAgent(const DdqnParams& params, std::uint64_t master_seed, std::size_t vehicle)
      : params_(params),
        buffer_(params.buffer_capacity),
        explore_(make_stream(master_seed, vehicle, StreamPurpose::kExploration)),
        replay_(make_stream(master_seed, vehicle, StreamPurpose::kReplay)) {
    Rng init = make_stream(master_seed, vehicle, StreamPurpose::kNetInit);
    net_ = QNetwork(params_.hidden, init);
    target_ = net_;
  }

  std::size_t act(const AgentState& s, double eps) { return act_epsilon_greedy(net_, params_.norm(s), eps, explore_); }
  std::size_t greedy(const AgentState& s) const { return greedy_action(net_.forward(params_.norm(s))); }

  // Store, then train once the buffer holds a full minibatch; the target net
  // is refreshed every sync_period steps while training is active.
  std::optional<double> learn(const Experience& e) {
    buffer_.store(e);
    ++steps_;
    auto batch = buffer_.sample(params_.batch, replay_);
    if (!batch) return std::nullopt;
    const double loss = train_step(net_, target_, *batch, params_.gamma, params_.lr, params_.norm);
    ++updates_;
    if (steps_ % params_.sync_period == 0) {
      sync_target(net_, target_);
      ++syncs_;
    }
    return loss;
  }

  const QNetwork& net() const { return net_; }
  const QNetwork& target() const { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const DdqnParams& params() const { return params_; }
  std::size_t steps() const { return steps_; }
  std::size_t updates() const { return updates_; }
  std::size_t syncs() const { return syncs_; }

 private:
  DdqnParams params_;
  QNetwork net_;
  QNetwork target_;
  ReplayBuffer buffer_;
  Rng explore_;
  Rng replay_;
  std::size_t steps_ = 0;
  std::size_t updates_ = 0;
  std::size_t syncs_ = 0;
};

// ---------------------------------------------------------------------------
// Episode loops. An environment exposes:
//   void reset();
//   std::vector<std::pair<std::size_t, AgentState>> observe();  // acting vehicles
//   std::vector<Transition> step(std::span<const Decision>);
// ---------------------------------------------------------------------------

struct Decision {
  std::size_t vehicle = 0;
  std::size_t action = 0;
};

struct Transition {
  std::size_t vehicle = 0;
  AgentState s;
  std::size_t action = 0;
  double reward = 0.0;
  AgentState s_next;
};

struct EpisodeStats {
  std::size_t episode = 0;
  double mean_reward = 0.0;
  double mean_loss = 0.0;
};

struct EpsilonSchedule {
  double start = 0.5;
  double end = 0.5;
  bool decay = false;

  double at(std::size_t episode, std::size_t episodes) const {
    if (!decay || episodes <= 1) return start;
    const double frac = static_cast<double>(episode) / static_cast<double>(episodes - 1);
    return start + (end - start) * frac;
  }
};

template <class Env>
std::vector<EpisodeStats> run_training(Env& env, std::map<std::size_t, DdqnAgent>& agents, std::size_t episodes,
                                       std::size_t steps, const EpsilonSchedule& eps) {
  std::vector<EpisodeStats> curve;
  curve.reserve(episodes);
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    env.reset();
    const double e = eps.at(ep, episodes);
    double reward_sum = 0.0, loss_sum = 0.0;
    std::size_t reward_n = 0, loss_n = 0;
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<Decision> decisions;
      for (const auto& [v, s] : env.observe()) decisions.push_back({v, agents.at(v).act(s, e)});
      for (const Transition& tr : env.step(decisions)) {
        reward_sum += tr.reward;
        ++reward_n;
        if (auto loss = agents.at(tr.vehicle).learn({tr.s, tr.action, tr.reward, tr.s_next})) {
          loss_sum += *loss;
          ++loss_n;
        }
      }
    }
    curve.push_back({ep, reward_n ? reward_sum / static_cast<double>(reward_n) : 0.0,
                     loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0});
  }
  return curve;
}

struct RolloutStats {
  double mean_reward = 0.0;
  // Discounted return sum_t gamma^(t-1) r_t of each vehicle that acted,
  // t counting that vehicle's own steps, averaged over vehicles.
  double discounted_return = 0.0;
};

// One episode under a fixed decision rule; no learning.
template <class Env, class Chooser>
RolloutStats rollout_episode(Env& env, std::size_t steps, double gamma, Chooser&& choose) {
  env.reset();
  std::map<std::size_t, std::pair<double, double>> ret;  // vehicle -> (G, gamma^(t-1))
  double reward_sum = 0.0;
  std::size_t reward_n = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<Decision> decisions;
    for (const auto& [v, s] : env.observe()) decisions.push_back({v, choose(v, s)});
    for (const Transition& tr : env.step(decisions)) {
      auto [it, inserted] = ret.try_emplace(tr.vehicle, 0.0, 1.0);
      it->second.first += it->second.second * tr.reward;
      it->second.second *= gamma;
      reward_sum += tr.reward;
      ++reward_n;
    }
  }
  RolloutStats out;
  out.mean_reward = reward_n ? reward_sum / static_cast<double>(reward_n) : 0.0;
  if (!ret.empty()) {
    double g = 0.0;
    for (const auto& [v, acc] : ret) g += acc.first;
    out.discounted_return = g / static_cast<double>(ret.size());
  }
  return out;
}

// Greedy rollouts with the trained prediction nets; exploration is off
// regardless of the training schedule.
template <class Env>
std::vector<RolloutStats> run_testing(Env& env, const std::map<std::size_t, DdqnAgent>& agents,
                                      std::size_t episodes, std::size_t steps, double gamma) {
  std::vector<RolloutStats> out;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    out.push_back(rollout_episode(env, steps, gamma, [&](std::size_t v, const AgentState& s) {
      return agents.at(v).greedy(s);
    }));
  }
  return out;
}

}  // namespace vecfl
