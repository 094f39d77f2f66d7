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

#include <cstdint>
#include <random>

namespace vecfl {

using Rng = std::mt19937_64;

// What a random substream is used for. Values are part of the seeding
// contract: changing them changes every emitted number.
enum class StreamPurpose : std::uint64_t {
  kTask = 1,         // ground-truth model and held-out test set
  kData = 2,         // per-vehicle local dataset
  kMinibatch = 3,    // per-vehicle minibatch draws
  kQuantizer = 4,    // per-vehicle stochastic rounding
  kChannel = 5,      // per-vehicle fading draws
  kExploration = 6,  // per-vehicle epsilon-greedy and random policy draws
  kReplay = 7,       // per-vehicle replay sampling
  kNetInit = 8,      // per-vehicle Q-network initialization
  kMobility = 9,     // per-vehicle velocity draw
  kModelInit = 10,   // initial global model (non-convex task only)
  kReset = 11,       // per-vehicle episode-start level draw
};

inline constexpr std::uint64_t kNoVehicle = ~std::uint64_t{0};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based split: the key of a substream depends only on
// (master, vehicle, purpose), so adding vehicles never perturbs the streams
// of existing ones.
constexpr std::uint64_t substream_key(std::uint64_t master, std::uint64_t vehicle,
                                      StreamPurpose purpose) {
  std::uint64_t k = mix64(master);
  k = mix64(k ^ mix64(vehicle + 0x632be59bd9b4e019ULL));
  return mix64(k ^ static_cast<std::uint64_t>(purpose));
}

inline Rng make_stream(std::uint64_t master, std::uint64_t vehicle, StreamPurpose purpose) {
  return Rng{substream_key(master, vehicle, purpose)};
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace vecfl
