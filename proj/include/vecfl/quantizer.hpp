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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vecfl/errors.hpp"
#include "vecfl/random.hpp"

namespace vecfl {

// Dense gradient with a cached euclidean norm. Entries must be finite and
// the dimension at least one.
class GradientVector {
 public:
  explicit GradientVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw ValidationError("gradient dimension must be >= 1");
    double sq = 0.0;
    for (std::size_t j = 0; j < values_.size(); ++j) {
      if (!std::isfinite(values_[j])) {
        throw ValidationError("gradient entry " + std::to_string(j) + " is not finite");
      }
      sq += values_[j] * values_[j];
    }
    squared_norm_ = sq;
    norm_ = std::sqrt(sq);
  }

  std::span<const double> values() const { return values_; }
  double operator[](std::size_t j) const { return values_[j]; }
  std::size_t dim() const { return values_.size(); }
  double norm() const { return norm_; }
  double squared_norm() const { return squared_norm_; }

 private:
  std::vector<double> values_;
  double norm_ = 0.0;
  double squared_norm_ = 0.0;
};

// Norm + per-element sign + per-element level numerator. Element j decodes
// to norm * signs[j] * levels[j] / q.
struct QuantizedGradient {
  double norm = 0.0;
  std::vector<std::int8_t> signs;
  std::vector<std::uint32_t> levels;
  std::uint32_t q = 1;

  std::size_t dim() const { return levels.size(); }

  friend bool operator==(const QuantizedGradient&, const QuantizedGradient&) = default;
};

// Stochastic rounding of |g_j|/||g|| onto the grid {0, 1/q, ..., 1}. With
// l = floor(a*q), the stored level is l+1 with probability a*q - l, else l.
// When a*q is an integer the promotion probability is zero, so a = 1 maps to
// level q deterministically.
template <class URBG>
QuantizedGradient quantize(const GradientVector& g, std::uint32_t q, URBG& rng) {
  if (q == 0) throw ValidationError("quantization level count q must be >= 1");
  QuantizedGradient out;
  out.q = q;
  out.norm = g.norm();
  out.signs.assign(g.dim(), 0);
  out.levels.assign(g.dim(), 0);
  if (g.norm() == 0.0) return out;

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double qd = static_cast<double>(q);
  for (std::size_t j = 0; j < g.dim(); ++j) {
    const double v = g[j];
    out.signs[j] = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
    const double a = std::min(1.0, std::abs(v) / g.norm());
    const double scaled = a * qd;
    const double floor_l = std::min(std::floor(scaled), qd);
    const double promote = scaled - floor_l;
    auto level = static_cast<std::uint32_t>(floor_l);
    // Always draw so the stream position depends only on the dimension.
    const double u = unif(rng);
    if (u < promote) ++level;
    out.levels[j] = level;
  }
  return out;
}

inline void check_well_formed(const QuantizedGradient& qg) {
  if (qg.q == 0) throw ValidationError("quantized gradient has q = 0");
  if (qg.levels.empty() || qg.signs.size() != qg.levels.size()) {
    throw ValidationError("quantized gradient has inconsistent sign/level arrays");
  }
  if (!(qg.norm >= 0.0) || !std::isfinite(qg.norm)) {
    throw ValidationError("quantized gradient norm must be finite and non-negative");
  }
  for (std::size_t j = 0; j < qg.levels.size(); ++j) {
    if (qg.levels[j] > qg.q) throw ValidationError("level exceeds q at element " + std::to_string(j));
    if (qg.signs[j] < -1 || qg.signs[j] > 1) throw ValidationError("sign out of {-1,0,1}");
  }
}

inline GradientVector dequantize(const QuantizedGradient& qg) {
  check_well_formed(qg);
  std::vector<double> values(qg.dim());
  const double qd = static_cast<double>(qg.q);
  for (std::size_t j = 0; j < values.size(); ++j) {
    values[j] = qg.norm * static_cast<double>(qg.signs[j]) * (static_cast<double>(qg.levels[j]) / qd);
  }
  return GradientVector(std::move(values));
}

// Uplink payload for a d-dimensional gradient at q levels: one sign bit plus
// log2(q+1) bits per element. Kept real-valued; the norm is not counted.
inline double payload_bits(std::uint32_t q, std::uint64_t d) {
  if (q == 0) throw ValidationError("payload_bits: q must be >= 1");
  if (d == 0) throw ValidationError("payload_bits: d must be >= 1");
  return (1.0 + std::log2(static_cast<double>(q) + 1.0)) * static_cast<double>(d);
}

// Upper bound (sqrt(d)/q) * ||g||^2 on E||Q(g) - g||^2, valid for d >= q^2.
inline double quantization_error_bound(std::size_t d, double squared_norm, std::uint32_t q) {
  if (q == 0) throw ValidationError("quantization_error_bound: q must be >= 1");
  return std::sqrt(static_cast<double>(d)) / static_cast<double>(q) * squared_norm;
}

inline double quantization_error_bound(const GradientVector& g, std::uint32_t q) {
  return quantization_error_bound(g.dim(), g.squared_norm(), q);
}

// Whether (d, q) lies in the regime where the bound above is proven.
inline bool in_error_bound_regime(std::size_t d, std::uint32_t q) {
  return static_cast<double>(d) >= static_cast<double>(q) * static_cast<double>(q);
}

}  // namespace vecfl
