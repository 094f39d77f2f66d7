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
#include <random>
#include <string>

#include "vecfl/errors.hpp"
#include "vecfl/random.hpp"

namespace vecfl {

struct Position {
  double x = 0.0;
  double y = 0.0;
};

// Kinematic and radio state of one vehicle. x runs along the road axis with
// the base station at the origin; y is the fixed lateral offset of the road.
struct VehicleState {
  std::size_t id = 0;
  double x = 0.0;   // m
  double y = 0.0;   // m
  double v = 0.0;   // m/s, constant per vehicle
  double f = 0.0;   // CPU cycles/s
  double p = 0.0;   // transmit power, W
  bool in_coverage = true;
  bool reentered = false;
};

struct ChannelSample {
  double h = 0.0;      // channel gain
  double d = 0.0;      // m
  double gamma = 0.0;  // SNR
  double rate = 0.0;   // bit/s
};

// Gain model: h = Z^2 with Z ~ Normal(mean, std), floored at h_min.
struct FadingParams {
  double mean = 1.0;
  double std = 0.1;
  double h_min = 1e-6;
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) / 1000.0; }

// Constant-velocity motion. Leaving the coverage edge re-inserts the vehicle
// at -R_B so the population stays constant.
inline VehicleState advance(VehicleState s, double dt, double coverage_radius) {
  if (dt < 0.0) throw ValidationError("advance: dt must be >= 0");
  if (dt == 0.0) return s;
  s.x += s.v * dt;
  s.reentered = false;
  if (s.x > coverage_radius) {
    s.x = -coverage_radius;
    s.reentered = true;
  }
  s.in_coverage = true;
  return s;
}

inline double distance_to_bs(const VehicleState& s, const Position& bs) {
  if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(bs.x) || !std::isfinite(bs.y)) {
    throw ValidationError("distance_to_bs: non-finite coordinates");
  }
  const double d = std::hypot(s.x - bs.x, s.y - bs.y);
  if (d == 0.0) throw ValidationError("distance_to_bs: vehicle coincides with the base station");
  return d;
}

template <class URBG>
double sample_channel_gain(const FadingParams& fp, URBG& rng) {
  if (fp.std <= 0.0) return std::max(fp.mean * fp.mean, fp.h_min);
  std::normal_distribution<double> z(fp.mean, fp.std);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double zz = z(rng);
    const double h = zz * zz;
    if (h >= fp.h_min) return h;
  }
  return fp.h_min;
}

inline double snr(double p, double h, double d, double alpha, double sigma2) {
  if (d <= 0.0) throw ValidationError("snr: distance must be positive");
  if (sigma2 <= 0.0) throw ValidationError("snr: noise power must be positive");
  return p * h * std::pow(d, -alpha) / sigma2;
}

inline double transmission_rate(double bandwidth, std::uint32_t subcarriers, double gamma) {
  if (bandwidth <= 0.0 || subcarriers == 0) {
    throw ValidationError("transmission_rate: bandwidth and subcarrier count must be positive");
  }
  if (gamma < 0.0) throw ValidationError("transmission_rate: SNR must be >= 0");
  return bandwidth / static_cast<double>(subcarriers) * std::log2(1.0 + gamma);
}

inline double upload_time(double bits, double rate) {
  if (!(rate > 0.0)) throw InfiniteDelayError("upload_time: link rate is zero");
  return bits / rate;
}

inline double compute_time(double cycles, double cpu_hz) {
  if (!(cpu_hz > 0.0)) throw ValidationError("compute_time: CPU frequency must be positive");
  return cycles / cpu_hz;
}

inline double residence_time(double x, double v, double coverage_radius) {
  if (!(v > 0.0)) throw ValidationError("residence_time: velocity must be positive");
  if (x > coverage_radius) throw ValidationError("residence_time: vehicle is outside coverage");
  return (coverage_radius - x) / v;
}

// Everything needed to turn a vehicle position into a link sample.
struct LinkParams {
  double bandwidth = 1e6;
  std::uint32_t subcarriers = 12;
  double path_loss_exponent = 2.0;
  double noise_power = 1e-9;
  Position bs{};
};

inline ChannelSample channel_at(const VehicleState& s, double h, const LinkParams& lp) {
  ChannelSample c;
  c.h = h;
  c.d = distance_to_bs(s, lp.bs);
  c.gamma = snr(s.p, h, c.d, lp.path_loss_exponent, lp.noise_power);
  c.rate = transmission_rate(lp.bandwidth, lp.subcarriers, c.gamma);
  return c;
}

}  // namespace vecfl
