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
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <string_view>

#include "vecfl/ddqn.hpp"
#include "vecfl/errors.hpp"

namespace vecfl {

enum class Scheme { kDqnGradQ, kAdaGradQ, kFix2, kFix6, kFix10, kRandom };

inline Scheme parse_scheme(std::string_view s) {
  if (s == "dqn-gradq") return Scheme::kDqnGradQ;
  if (s == "ada-gradq") return Scheme::kAdaGradQ;
  if (s == "fix2") return Scheme::kFix2;
  if (s == "fix6") return Scheme::kFix6;
  if (s == "fix10") return Scheme::kFix10;
  if (s == "random") return Scheme::kRandom;
  throw ValidationError("unknown scheme '" + std::string(s) +
                        "' (expected dqn-gradq, ada-gradq, fix2, fix6, fix10 or random)");
}

inline std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kDqnGradQ: return "dqn-gradq";
    case Scheme::kAdaGradQ: return "ada-gradq";
    case Scheme::kFix2: return "fix2";
    case Scheme::kFix6: return "fix6";
    case Scheme::kFix10: return "fix10";
    case Scheme::kRandom: return "random";
  }
  return "unknown";
}

inline std::uint32_t fixed_level(Scheme s) {
  switch (s) {
    case Scheme::kFix2: return 2;
    case Scheme::kFix6: return 6;
    case Scheme::kFix10: return 10;
    default: throw ValidationError("scheme " + scheme_name(s) + " has no fixed level");
  }
}

class FixedPolicy {
 public:
  explicit FixedPolicy(std::uint32_t q) : q_(q) {
    if (!ActionSpace::contains(q)) throw ValidationError("fixed policy level must be in [2, 10]");
  }
  std::uint32_t level() const { return q_; }

 private:
  std::uint32_t q_;
};

inline FixedPolicy fixed_policy(std::uint32_t q) { return FixedPolicy(q); }

// Reconstruction of the adaptive-level baseline: start at the lowest level and
// raise it by one whenever the relative global-loss improvement across the
// last `window` rounds falls below rho. Never lowers the level.
class AdaptivePolicy {
 public:
  AdaptivePolicy(std::size_t window = 5, double rho = 1e-3) : window_(window), rho_(rho) {
    if (window == 0) throw ValidationError("adaptive policy window must be >= 1");
  }

  std::uint32_t level() const { return q_; }

  void observe_loss(double loss) {
    losses_.push_back(loss);
    if (losses_.size() <= window_) return;
    losses_.pop_front();
    const double old = losses_.front();
    const double improvement = old == 0.0 ? 0.0 : (old - loss) / std::abs(old);
    if (improvement < rho_) {
      q_ = std::min(q_ + 1, ActionSpace::kMaxLevel);
      // Each escalation needs a fresh full window of evidence.
      losses_.clear();
      losses_.push_back(loss);
    }
  }

 private:
  std::size_t window_;
  double rho_;
  std::uint32_t q_ = ActionSpace::kMinLevel;
  std::deque<double> losses_;
};

class RandomPolicy {
 public:
  explicit RandomPolicy(Rng rng) : rng_(std::move(rng)) {}
  std::uint32_t level() {
    return ActionSpace::level(std::uniform_int_distribution<std::size_t>(0, ActionSpace::kSize - 1)(rng_));
  }

 private:
  Rng rng_;
};

}  // namespace vecfl
