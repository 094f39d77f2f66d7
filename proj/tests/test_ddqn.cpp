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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "vecfl/ddqn.hpp"

using namespace vecfl;

namespace {

const StateNormalizer kNorm{0.0, 8.0, 500.0};

QNetwork random_net(std::uint64_t seed, std::vector<std::size_t> hidden = {8}) {
  Rng rng(seed);
  return QNetwork(hidden, rng);
}

// Constant Q-values: every weight zero, output biases set to `q`.
QNetwork constant_net(const QValues& q) {
  QNetwork net = random_net(1, {4});
  std::vector<double> p(net.parameter_count(), 0.0);
  for (std::size_t a = 0; a < q.size(); ++a) p[p.size() - q.size() + a] = q[a];
  net.set_parameters(p);
  return net;
}

AgentState random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> g(0.0, 1e6), d(10.0, 500.0);
  std::uniform_int_distribution<std::uint32_t> q(2, 10);
  return {g(rng), d(rng), q(rng)};
}

std::vector<Experience> random_batch(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> a(0, ActionSpace::kSize - 1);
  std::normal_distribution<double> r(-3.0, 2.0);
  std::vector<Experience> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({random_state(rng), a(rng), r(rng), random_state(rng)});
  return out;
}

double batch_loss(const QNetwork& net, const std::vector<Experience>& batch, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double e = y[i] - net.forward(kNorm(batch[i].s))[batch[i].action];
    s += e * e;
  }
  return s / batch.size();
}

// Two vehicles; the reward peaks at level 6 and the state ignores actions.
struct ToyEnv {
  std::size_t t = 0;
  std::size_t resets = 0;
  void reset() {
    t = 0;
    ++resets;
  }
  std::vector<std::pair<std::size_t, AgentState>> observe() {
    return {{0, {100.0, 50.0 + t, 2}}, {1, {10.0, 400.0 - t, 2}}};
  }
  std::vector<Transition> step(std::span<const Decision> ds) {
    std::vector<Transition> out;
    for (const auto& d : ds) {
      const AgentState s = observe()[d.vehicle].second;
      const double r = -std::abs(static_cast<double>(ActionSpace::level(d.action)) - 6.0) - 1.0;
      out.push_back({d.vehicle, s, d.action, r, s});
    }
    ++t;
    return out;
  }
};

}  // namespace

TEST(ActionSpace, Levels) {
  EXPECT_EQ(ActionSpace::kSize, 9u);
  EXPECT_EQ(ActionSpace::level(0), 2u);
  EXPECT_EQ(ActionSpace::level(8), 10u);
  EXPECT_EQ(ActionSpace::index(6), 4u);
  EXPECT_THROW(ActionSpace::index(11), ValidationError);
  EXPECT_THROW(ActionSpace::index(1), ValidationError);
}

TEST(Normalizer, Endpoints) {
  const StateFeatures top = kNorm({1e8 - 1.0, 500.0, 10});
  EXPECT_NEAR(top[0], 1.0, 1e-12);
  EXPECT_EQ(top[1], 1.0);
  EXPECT_EQ(top[2], 1.0);
  const StateFeatures bottom = kNorm({0.0, 250.0, 2});
  EXPECT_EQ(bottom[0], 0.0);
  EXPECT_EQ(bottom[1], 0.5);
  EXPECT_EQ(bottom[2], 0.0);
}

TEST(Observe, ValidatesSnapshot) {
  const AgentState s = observe({798.1, std::hypot(500.0, 10.0), 6});
  EXPECT_EQ(s.q_now, 6u);
  EXPECT_NEAR(s.d_now, 500.09999000199946, 1e-9);
  EXPECT_THROW(observe({1.0, 0.0, 6}), ValidationError);
  EXPECT_THROW(observe({-1.0, 10.0, 6}), ValidationError);
  EXPECT_THROW(observe({1.0, 10.0, 11}), ValidationError);
}

TEST(EpsilonGreedy, GreedyLimit) {
  const QNetwork net = random_net(3);
  Rng rng(2);
  std::mt19937_64 srng(4);
  for (int i = 0; i < 100; ++i) {
    const StateFeatures x = kNorm(random_state(srng));
    EXPECT_EQ(act_epsilon_greedy(net, x, 0.0, rng), greedy_action(net.forward(x)));
  }
}

TEST(EpsilonGreedy, UniformWhenFullyExploring) {
  const QNetwork net = random_net(3);
  Rng rng(5);
  const int n = 100000;
  std::vector<int> counts(ActionSpace::kSize, 0);
  for (int i = 0; i < n; ++i) ++counts[act_epsilon_greedy(net, StateFeatures{0.5, 0.5, 0.5}, 1.0, rng)];
  const double p = 1.0 / ActionSpace::kSize;
  const double sd = std::sqrt(n * p * (1 - p));
  for (int c : counts) EXPECT_NEAR(c, n * p, 3 * sd);
  EXPECT_THROW(act_epsilon_greedy(net, StateFeatures{}, 1.5, rng), ValidationError);
}

TEST(EpsilonGreedy, TiesGoToLowestIndex) {
  const QNetwork net = constant_net(QValues{});
  Rng rng(1);
  EXPECT_EQ(act_epsilon_greedy(net, StateFeatures{0.1, 0.2, 0.3}, 0.0, rng), 0u);
  EXPECT_EQ(greedy_action(QValues{1, 3, 3, 0, 0, 0, 0, 0, 3}), 1u);
}

TEST(Reward, Values) {
  EXPECT_DOUBLE_EQ(reward(0.5, 0.5, 7.0, 1.0, 1.0), -4.0);
  EXPECT_DOUBLE_EQ(reward(1.0, 0.0, 7.0, 51.007, 3.0), -7.0 * 51.007);
  EXPECT_EQ(reward(0.5, 0.5, 3.0, 0.0, 0.0), 0.0);
  EXPECT_THROW(reward(-0.1, 0.5, 1.0, 1.0, 1.0), ValidationError);
}

TEST(Reward, PositiveScalingKeepsGreedyRanking) {
  // Tabular fixture: per-state Q equals the immediate reward of each action.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int s = 0; s < 50; ++s) {
    QValues base{}, scaled{};
    std::vector<double> r_time(ActionSpace::kSize), r_err(ActionSpace::kSize);
    for (std::size_t a = 0; a < ActionSpace::kSize; ++a) {
      r_time[a] = u(rng);
      r_err[a] = u(rng);
      base[a] = reward(0.3, 0.7, r_time[a], 1.0, r_err[a]);
      scaled[a] = reward(0.3 * 2.5, 0.7 * 2.5, r_time[a], 1.0, r_err[a]);
      EXPECT_NEAR(scaled[a], 2.5 * base[a], 1e-12);
    }
    EXPECT_EQ(greedy_action(base), greedy_action(scaled));
  }
}

TEST(ReplayBuffer, RingSemantics) {
  ReplayBuffer buf(3);
  EXPECT_EQ(buf.size(), 0u);
  auto exp = [](double r) { return Experience{{}, 0, r, {}}; };
  buf.store(exp(1));
  EXPECT_EQ(buf.size(), 1u);
  buf.store(exp(2));
  buf.store(exp(3));
  buf.store(exp(4));
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_EQ(buf.at(0).reward, 2.0);
  EXPECT_EQ(buf.at(2).reward, 4.0);
  EXPECT_THROW(ReplayBuffer(0), ValidationError);
}

TEST(ReplayBuffer, SamplingGateAndDeterminism) {
  ReplayBuffer buf(100);
  const auto batch = random_batch(10, 1);
  for (std::size_t i = 0; i + 1 < batch.size(); ++i) buf.store(batch[i]);
  Rng a(3), b(3);
  EXPECT_FALSE(buf.sample(10, a).has_value());
  buf.store(batch.back());
  Rng c(3);
  const auto s1 = buf.sample(10, b);
  const auto s2 = buf.sample(10, c);
  ASSERT_TRUE(s1.has_value());
  EXPECT_EQ(s1->size(), 10u);
  EXPECT_EQ(*s1, *s2);
  for (const auto& e : *s1) EXPECT_NE(std::find(batch.begin(), batch.end(), e), batch.end());
}

TEST(ReplayBuffer, NeverExceedsCapacity) {
  ReplayBuffer buf(7);
  const auto batch = random_batch(50, 2);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    buf.store(batch[i]);
    EXPECT_LE(buf.size(), 7u);
  }
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(buf.at(i), batch[43 + i]);
}

TEST(TargetValue, MyopicAndDoubleQ) {
  const QNetwork pred = constant_net(QValues{0, 1, 5, 2, 0, 0, 0, 0, 0});
  const QNetwork targ = constant_net(QValues{9, 9, 3, 9, 9, 9, 9, 9, 9});
  const Experience e{{1.0, 100.0, 4}, 1, -2.0, {2.0, 110.0, 3}};
  EXPECT_EQ(target_value(pred, targ, e, 0.0, kNorm).y, -2.0);
  // Prediction net picks action 2; the target net scores it at 3.
  const TargetValue tv = target_value(pred, targ, e, 0.5, kNorm);
  EXPECT_EQ(tv.next_action, 2u);
  EXPECT_DOUBLE_EQ(tv.y, -2.0 + 0.5 * 3.0);
  // Identical nets give the standard max target.
  EXPECT_DOUBLE_EQ(target_value(pred, pred, e, 0.5, kNorm).y, -2.0 + 0.5 * 5.0);
}

TEST(TargetValue, NextActionAlwaysFromPredictionNet) {
  const QNetwork pred = random_net(11), targ = random_net(12);
  for (const auto& e : random_batch(200, 3)) {
    const TargetValue tv = target_value(pred, targ, e, 0.9, kNorm);
    EXPECT_EQ(tv.next_action, greedy_action(pred.forward(kNorm(e.s_next))));
    EXPECT_DOUBLE_EQ(tv.y, e.reward + 0.9 * targ.forward(kNorm(e.s_next))[tv.next_action]);
  }
}

TEST(TrainStep, ExactFitLeavesParametersUnchanged) {
  QNetwork net = random_net(4);
  auto batch = random_batch(16, 5);
  for (auto& e : batch) e.reward = net.forward(kNorm(e.s))[e.action];
  const auto before = net.parameters();
  EXPECT_EQ(train_step(net, net, batch, 0.0, 0.1, kNorm), 0.0);
  const auto after = net.parameters();
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(after[i], before[i], 1e-12);
}

TEST(TrainStep, ZeroLearningRateOnlyReportsLoss) {
  QNetwork net = random_net(6);
  const QNetwork target = random_net(7);
  const auto batch = random_batch(8, 6);
  const auto before = net.parameters();
  const double loss = train_step(net, target, batch, 0.9, 0.0, kNorm);
  EXPECT_GT(loss, 0.0);
  EXPECT_EQ(net.parameters(), before);
}

TEST(TrainStep, ReducesLossOnFixedTargets) {
  QNetwork net = random_net(8, {16});
  const auto batch = random_batch(32, 7);
  const QNetwork frozen = net;
  std::vector<double> y;
  for (const auto& e : batch) y.push_back(target_value(net, frozen, e, 0.9, kNorm).y);
  const double first = train_step(net, frozen, batch, 0.9, 1e-3, kNorm);
  EXPECT_LT(batch_loss(net, batch, y), first);
}

TEST(TrainStep, NonFiniteLossAborts) {
  QNetwork net = random_net(9);
  auto batch = random_batch(4, 8);
  batch[0].reward = 1e300;
  EXPECT_THROW(train_step(net, net, batch, 0.0, 1e-3, kNorm), TrainingDiverged);
}

TEST(Backprop, SingleSampleMatchesFiniteDifferences) {
  const QNetwork net = random_net(10, {6});
  const auto batch = random_batch(1, 9);
  const std::vector<double> y{1.7};
  std::vector<double> grad;
  batch_loss_and_gradient(net, batch, y, kNorm, grad);
  const auto p0 = net.parameters();
  for (std::size_t k = 0; k < p0.size(); ++k) {
    auto pp = p0, pm = p0;
    pp[k] += 1e-6;
    pm[k] -= 1e-6;
    QNetwork a = net, b = net;
    a.set_parameters(pp);
    b.set_parameters(pm);
    const double fd = (batch_loss(a, batch, y) - batch_loss(b, batch, y)) / 2e-6;
    EXPECT_NEAR(grad[k], fd, 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST(SyncTarget, CopiesExactly) {
  const QNetwork net = random_net(13);
  QNetwork target = random_net(14);
  sync_target(net, target);
  EXPECT_EQ(target, net);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const StateFeatures x = kNorm(random_state(rng));
    EXPECT_EQ(net.forward(x), target.forward(x));
  }
  sync_target(net, target);
  EXPECT_EQ(target, net);
}

TEST(QNetwork, ShapeAndInit) {
  const QNetwork net = random_net(1, {64});
  EXPECT_EQ(net.parameter_count(), 3u * 64 + 64 + 64 * 9 + 9);
  for (double p : net.parameters()) EXPECT_TRUE(std::isfinite(p));
  EXPECT_THROW(random_net(1, {0}), ValidationError);
  EXPECT_EQ(random_net(5), random_net(5));
}

TEST(Agent, GateKeepsShortRunsUntrained) {
  DdqnParams p;
  p.batch = 64;
  std::map<std::size_t, DdqnAgent> agents;
  agents.emplace(0, DdqnAgent(p, 1, 0));
  agents.emplace(1, DdqnAgent(p, 1, 1));
  ToyEnv env;
  const auto curve = run_training(env, agents, 1, 40, EpsilonSchedule{});
  ASSERT_EQ(curve.size(), 1u);
  EXPECT_EQ(curve[0].mean_loss, 0.0);
  for (const auto& [v, a] : agents) {
    EXPECT_EQ(a.updates(), 0u);
    EXPECT_EQ(a.buffer().size(), 40u);
  }
}

TEST(Agent, SyncScheduleAndLearning) {
  DdqnParams p;
  p.batch = 8;
  p.sync_period = 50;
  p.gamma = 0.5;
  p.lr = 1e-2;
  std::map<std::size_t, DdqnAgent> agents;
  agents.emplace(0, DdqnAgent(p, 2, 0));
  agents.emplace(1, DdqnAgent(p, 2, 1));
  ToyEnv env;
  const auto curve = run_training(env, agents, 30, 100, EpsilonSchedule{0.5, 0.5, false});
  EXPECT_EQ(env.resets, 30u);
  for (const auto& [v, a] : agents) {
    EXPECT_EQ(a.steps(), 3000u);
    EXPECT_EQ(a.updates(), 3000u - 7u);
    EXPECT_EQ(a.syncs(), 3000u / 50u);
  }
  for (const auto& st : curve) {
    EXPECT_TRUE(std::isfinite(st.mean_reward));
    EXPECT_GE(st.mean_reward, -5.0);  // worst action costs 5
  }
  // The greedy policy settles on level 6 in both observed states.
  const auto tests = run_testing(env, agents, 2, 10, 0.0);
  for (const auto& r : tests) EXPECT_DOUBLE_EQ(r.mean_reward, -1.0);
}

TEST(Testing, DeterministicAndMyopicReturn) {
  DdqnParams p;
  std::map<std::size_t, DdqnAgent> agents;
  agents.emplace(0, DdqnAgent(p, 3, 0));
  agents.emplace(1, DdqnAgent(p, 3, 1));
  ToyEnv e1, e2;
  const auto a = run_testing(e1, agents, 3, 20, 0.9);
  const auto b = run_testing(e2, agents, 3, 20, 0.9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].mean_reward, b[i].mean_reward);
    EXPECT_EQ(a[i].discounted_return, b[i].discounted_return);
  }
  // With gamma = 0 the return is the first step's reward.
  ToyEnv e3;
  std::vector<double> first;
  const auto r = rollout_episode(e3, 5, 0.0, [&](std::size_t v, const AgentState& s) {
    const std::size_t act = agents.at(v).greedy(s);
    if (e3.t == 0) first.push_back(-std::abs(double(ActionSpace::level(act)) - 6.0) - 1.0);
    return act;
  });
  EXPECT_DOUBLE_EQ(r.discounted_return, (first[0] + first[1]) / 2.0);
}

TEST(EpsilonSchedule, ConstantOrLinear) {
  EXPECT_EQ((EpsilonSchedule{0.5, 0.05, false}).at(7, 10), 0.5);
  EXPECT_DOUBLE_EQ((EpsilonSchedule{0.5, 0.05, true}).at(9, 10), 0.05);
  EXPECT_DOUBLE_EQ((EpsilonSchedule{0.5, 0.1, true}).at(0, 10), 0.5);
}
