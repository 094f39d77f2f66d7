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

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vecfl/baselines.hpp"
#include "vecfl/channel.hpp"
#include "vecfl/errors.hpp"

namespace vecfl {

// Every knob of one experiment. Physical quantities are SI; transmit power
// is given in dBm and converted on use.
struct SimConfig {
  // System model.
  double sigma2 = 1e-9;       // noise power, W
  double p_dbm = 23.0;        // transmit power, dBm
  double R_B = 500.0;         // coverage radius, m
  double B = 1e6;             // bandwidth, Hz
  std::uint32_t W = 12;       // subcarriers
  double v_mean = 10.0;       // m/s
  double v_std = 1.0;         // m/s
  double c = 2.5e10;          // cycles per local update
  double f = 5e8;             // CPU Hz
  std::uint64_t d = 269722;   // payload dimension used for uplink bit accounting
  double H = 10.0;            // lateral road offset, m
  double alpha = 2.0;         // path-loss exponent
  std::size_t N = 15;         // vehicles

  // DDQN.
  double gamma = 0.99;
  std::size_t C = 1000;
  std::size_t T = 2000;
  std::size_t I = 64;
  std::size_t T_prime = 500;
  std::size_t buffer_capacity = 250000;
  std::size_t T_I = 1000;
  double epsilon = 0.5;
  bool epsilon_decay = false;
  double epsilon_min = 0.05;
  std::vector<std::size_t> hidden{64};
  double lr = 1e-3;
  double log_gamma_min = 0.0;
  double log_gamma_max = 8.0;

  // Objective weights.
  double w1 = 0.5;
  double w2 = 0.5;
  bool weight_sum_convention = true;

  // Learning task and convergence model.
  std::string task = "logistic";
  std::size_t d_model = 64;
  std::size_t mlp_hidden = 16;
  std::size_t samples_per_vehicle = 200;
  std::size_t batch_size = 32;
  std::size_t test_samples = 1000;
  double label_noise = 0.5;
  double feature_scale = 1.0;
  double eta = 0.1;
  double lambda = 0.05;
  std::optional<double> L;  // estimated from the data when absent
  double mu = 0.01;         // also the L2 regularization strength
  double Gamma = 0.05;
  double init_gap_sq = 1.0;

  // Selection and round timing.
  double phi_star = 0.0;
  std::optional<double> T_g0;  // derived from the delay model when absent
  std::size_t participants = 0;  // 0: threshold rule; otherwise exactly this many per round
  double step_duration = 10.0;   // cap on simulated seconds per step

  // Fading.
  double fading_mean = 1.0;
  double fading_std = 0.1;
  double h_min = 1e-6;

  // Baselines and run control.
  std::size_t ada_window = 5;
  double ada_rho = 1e-3;
  std::string scheme = "dqn-gradq";
  std::uint64_t seed = 0;
  std::string out = "out";

  double p_watts() const { return dbm_to_watts(p_dbm); }
  FadingParams fading() const { return {fading_mean, fading_std, h_min}; }
  LinkParams link() const { return {B, W, alpha, sigma2, Position{0.0, 0.0}}; }
  double d_max() const { return std::hypot(R_B, H); }

  // Throws ConfigError naming the first offending key.
  void validate() const;
};

namespace detail {

inline void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("config key '" + key + "': " + what);
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

template <class T>
void read_unsigned(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  require(v.is_number_integer() || (v.is_number() && std::floor(v.get<double>()) == v.get<double>()), key,
          "expected a non-negative integer");
  const double x = v.get<double>();
  require(x >= 0.0, key, "expected a non-negative integer");
  out = static_cast<T>(v.is_number_integer() ? v.get<long long>() : static_cast<long long>(x));
}

template <class T>
void read_optional(const nlohmann::json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  T v{};
  read(j, key, v);
  out = v;
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "sigma2", "p_dbm", "R_B", "B", "W", "v_mean", "v_std", "c", "f", "d", "H", "alpha", "N",
      "gamma", "C", "T", "I", "T_prime", "buffer_capacity", "T_I", "epsilon", "epsilon_decay", "epsilon_min",
      "hidden", "lr", "log_gamma_min", "log_gamma_max", "w1", "w2", "weight_sum_convention", "task",
      "d_model", "mlp_hidden", "samples_per_vehicle", "batch_size", "test_samples", "label_noise",
      "feature_scale", "eta", "lambda", "L", "mu", "Gamma", "init_gap_sq", "phi_star", "T_g0",
      "participants", "step_duration", "fading_mean", "fading_std", "h_min", "ada_window", "ada_rho",
      "scheme", "seed", "out"};
  return keys;
}

}  // namespace detail

inline void SimConfig::validate() const {
  using detail::require;
  require(sigma2 > 0.0, "sigma2", "must be positive");
  require(std::isfinite(p_dbm), "p_dbm", "must be finite");
  require(R_B > 0.0, "R_B", "must be positive");
  require(B > 0.0, "B", "must be positive");
  require(W >= 1, "W", "must be >= 1");
  require(v_mean > 0.0, "v_mean", "must be positive");
  require(v_std >= 0.0, "v_std", "must be >= 0");
  require(c > 0.0, "c", "must be positive");
  require(f > 0.0, "f", "must be positive");
  require(d >= 1, "d", "must be >= 1");
  require(H > 0.0, "H", "must be positive");
  require(alpha > 0.0, "alpha", "must be positive");
  require(N >= 1, "N", "must be >= 1");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma", "must be in [0, 1]");
  require(C >= 1, "C", "must be >= 1");
  require(T >= 1, "T", "must be >= 1");
  require(I >= 1, "I", "must be >= 1");
  require(T_prime >= 1, "T_prime", "must be >= 1");
  require(buffer_capacity >= I, "buffer_capacity", "must be >= I");
  require(T_I >= 1, "T_I", "must be >= 1");
  require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon", "must be in [0, 1]");
  require(epsilon_min >= 0.0 && epsilon_min <= 1.0, "epsilon_min", "must be in [0, 1]");
  require(!hidden.empty(), "hidden", "needs at least one hidden layer");
  for (std::size_t h : hidden) require(h >= 1, "hidden", "layer widths must be >= 1");
  require(lr > 0.0, "lr", "must be positive");
  require(log_gamma_max > log_gamma_min, "log_gamma_max", "must exceed log_gamma_min");
  require(w1 >= 0.0, "w1", "must be >= 0");
  require(w2 >= 0.0, "w2", "must be >= 0");
  if (weight_sum_convention) require(std::abs(w1 + w2 - 1.0) <= 1e-12, "w2", "w1 + w2 must equal 1");
  require(task == "logistic" || task == "mlp", "task", "must be 'logistic' or 'mlp'");
  require(d_model >= 1, "d_model", "must be >= 1");
  require(mlp_hidden >= 1, "mlp_hidden", "must be >= 1");
  require(samples_per_vehicle >= 1, "samples_per_vehicle", "must be >= 1");
  require(batch_size >= 1 && batch_size <= samples_per_vehicle, "batch_size",
          "must be in [1, samples_per_vehicle]");
  require(test_samples >= 1, "test_samples", "must be >= 1");
  require(label_noise >= 0.0, "label_noise", "must be >= 0");
  require(feature_scale > 0.0, "feature_scale", "must be positive");
  require(eta > 0.0, "eta", "must be positive");
  require(lambda > 0.0, "lambda", "must be positive");
  require(mu > 0.0, "mu", "must be positive");
  if (L) require(*L >= mu, "L", "must be >= mu");
  require(Gamma > 0.0, "Gamma", "must be positive");
  require(init_gap_sq > 0.0, "init_gap_sq", "must be positive");
  require(std::isfinite(phi_star), "phi_star", "must be finite");
  if (T_g0) require(*T_g0 > 0.0, "T_g0", "must be positive");
  require(participants <= N, "participants", "must be <= N");
  require(step_duration > 0.0, "step_duration", "must be positive");
  require(std::isfinite(fading_mean), "fading_mean", "must be finite");
  require(fading_std >= 0.0, "fading_std", "must be >= 0");
  require(h_min > 0.0, "h_min", "must be positive");
  require(ada_window >= 1, "ada_window", "must be >= 1");
  try {
    parse_scheme(scheme);
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("config key 'scheme': ") + e.what());
  }
}

inline SimConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!detail::known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  SimConfig c;
  using detail::read;
  using detail::read_unsigned;
  read(j, "sigma2", c.sigma2);
  read(j, "p_dbm", c.p_dbm);
  read(j, "R_B", c.R_B);
  read(j, "B", c.B);
  read_unsigned(j, "W", c.W);
  read(j, "v_mean", c.v_mean);
  read(j, "v_std", c.v_std);
  read(j, "c", c.c);
  read(j, "f", c.f);
  read_unsigned(j, "d", c.d);
  read(j, "H", c.H);
  read(j, "alpha", c.alpha);
  read_unsigned(j, "N", c.N);
  read(j, "gamma", c.gamma);
  read_unsigned(j, "C", c.C);
  read_unsigned(j, "T", c.T);
  read_unsigned(j, "I", c.I);
  read_unsigned(j, "T_prime", c.T_prime);
  read_unsigned(j, "buffer_capacity", c.buffer_capacity);
  read_unsigned(j, "T_I", c.T_I);
  read(j, "epsilon", c.epsilon);
  read(j, "epsilon_decay", c.epsilon_decay);
  read(j, "epsilon_min", c.epsilon_min);
  if (j.contains("hidden")) {
    const auto& h = j.at("hidden");
    if (h.is_number()) {
      std::size_t w = 0;
      read_unsigned(j, "hidden", w);
      c.hidden = {w};
    } else {
      read(j, "hidden", c.hidden);
    }
  }
  read(j, "lr", c.lr);
  read(j, "log_gamma_min", c.log_gamma_min);
  read(j, "log_gamma_max", c.log_gamma_max);
  read(j, "weight_sum_convention", c.weight_sum_convention);
  const bool has_w1 = j.contains("w1");
  const bool has_w2 = j.contains("w2");
  read(j, "w1", c.w1);
  read(j, "w2", c.w2);
  if (c.weight_sum_convention) {
    if (has_w1 && !has_w2) c.w2 = 1.0 - c.w1;
    if (has_w2 && !has_w1) c.w1 = 1.0 - c.w2;
  }
  read(j, "task", c.task);
  read_unsigned(j, "d_model", c.d_model);
  read_unsigned(j, "mlp_hidden", c.mlp_hidden);
  read_unsigned(j, "samples_per_vehicle", c.samples_per_vehicle);
  read_unsigned(j, "batch_size", c.batch_size);
  read_unsigned(j, "test_samples", c.test_samples);
  read(j, "label_noise", c.label_noise);
  read(j, "feature_scale", c.feature_scale);
  read(j, "eta", c.eta);
  read(j, "lambda", c.lambda);
  detail::read_optional(j, "L", c.L);
  read(j, "mu", c.mu);
  read(j, "Gamma", c.Gamma);
  read(j, "init_gap_sq", c.init_gap_sq);
  read(j, "phi_star", c.phi_star);
  detail::read_optional(j, "T_g0", c.T_g0);
  read_unsigned(j, "participants", c.participants);
  read(j, "step_duration", c.step_duration);
  read(j, "fading_mean", c.fading_mean);
  read(j, "fading_std", c.fading_std);
  read(j, "h_min", c.h_min);
  read_unsigned(j, "ada_window", c.ada_window);
  read(j, "ada_rho", c.ada_rho);
  read(j, "scheme", c.scheme);
  read_unsigned(j, "seed", c.seed);
  read(j, "out", c.out);
  c.validate();
  return c;
}

inline SimConfig config_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return config_from_json(j);
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_string(ss.str());
}

}  // namespace vecfl
