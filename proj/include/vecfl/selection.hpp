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
#include <numeric>
#include <span>
#include <vector>

#include "vecfl/errors.hpp"

namespace vecfl {

struct SelectionCandidate {
  std::size_t vehicle = 0;
  double alpha = 0.0;
  double beta = 0.0;
};

struct SelectionDecision {
  std::size_t vehicle = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double phi = 0.0;
  bool selected = false;
};

namespace detail {
inline double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}
}  // namespace detail

// ||w_n - w_g|| / max(||w_n||, ||w_g||), clamped to [0, 1]. Opposed vectors
// would otherwise reach 2.
inline double model_similarity(std::span<const double> local, std::span<const double> global) {
  if (local.size() != global.size()) throw ValidationError("model_similarity: dimension mismatch");
  double diff = 0.0;
  for (std::size_t i = 0; i < local.size(); ++i) {
    const double d = local[i] - global[i];
    diff += d * d;
  }
  const double denom = std::max(detail::l2(local), detail::l2(global));
  if (denom == 0.0) return 0.0;
  return std::clamp(std::sqrt(diff) / denom, 0.0, 1.0);
}

inline double time_margin(double residence, double round_time) {
  if (residence < 0.0) throw ValidationError("time_margin: residence time must be >= 0");
  if (round_time < 0.0) throw ValidationError("time_margin: round time must be >= 0");
  const double denom = std::max(residence, round_time);
  if (denom == 0.0) return 0.0;
  return (residence - round_time) / denom;
}

inline double utility(double alpha, double beta) { return alpha + beta; }

inline std::vector<SelectionDecision> score(std::span<const SelectionCandidate> candidates) {
  std::vector<SelectionDecision> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    out.push_back({c.vehicle, c.alpha, c.beta, utility(c.alpha, c.beta), false});
  }
  return out;
}

namespace detail {
// Highest phi first; equal phi resolved toward the lower vehicle id.
inline bool better(const SelectionDecision& a, const SelectionDecision& b) {
  if (a.phi != b.phi) return a.phi > b.phi;
  return a.vehicle < b.vehicle;
}
}  // namespace detail

// Threshold rule phi >= phi_star. An empty result falls back to the single
// best-scoring vehicle so that at least one vehicle trains every round.
inline std::vector<SelectionDecision> select(std::span<const SelectionCandidate> candidates,
                                             double phi_star) {
  if (candidates.empty()) throw ValidationError("select: no candidates");
  auto decisions = score(candidates);
  bool any = false;
  for (auto& d : decisions) {
    d.selected = d.phi >= phi_star;
    any = any || d.selected;
  }
  if (!any) {
    auto best = std::min_element(decisions.begin(), decisions.end(), detail::better);
    best->selected = true;
  }
  return decisions;
}

// Exactly min(k, N) vehicles with the highest utility. Used when the number
// of participants is pinned by the experiment.
inline std::vector<SelectionDecision> select_top_k(std::span<const SelectionCandidate> candidates,
                                                   std::size_t k) {
  if (candidates.empty()) throw ValidationError("select_top_k: no candidates");
  if (k == 0) throw ValidationError("select_top_k: k must be >= 1");
  auto decisions = score(candidates);
  std::vector<std::size_t> order(decisions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return detail::better(decisions[a], decisions[b]); });
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) decisions[order[i]].selected = true;
  return decisions;
}

inline std::vector<std::size_t> selected_ids(std::span<const SelectionDecision> decisions) {
  std::vector<std::size_t> ids;
  for (const auto& d : decisions) {
    if (d.selected) ids.push_back(d.vehicle);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Mean duration of the completed rounds, or the bootstrap value before any
// round has finished.
inline double update_round_time_avg(std::span<const double> history, double bootstrap) {
  if (history.empty()) return bootstrap;
  return std::accumulate(history.begin(), history.end(), 0.0) / static_cast<double>(history.size());
}

}  // namespace vecfl
