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
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vecfl/baselines.hpp"
#include "vecfl/channel.hpp"
#include "vecfl/config.hpp"
#include "vecfl/ddqn.hpp"
#include "vecfl/errors.hpp"
#include "vecfl/fl_core.hpp"
#include "vecfl/quantizer.hpp"
#include "vecfl/random.hpp"
#include "vecfl/selection.hpp"

namespace vecfl {

// One (round, vehicle) entry of the metrics log.
struct RoundRow {
  std::size_t round = 0;
  std::size_t vehicle = 0;
  std::uint32_t q = 0;
  std::size_t K = 0;
  double T_comp = 0.0;
  double T_upload = 0.0;
  double T_fed = 0.0;
  std::int64_t R_lambda = 1;
  double T_total = 0.0;
  double QE = 0.0;
  double F_global = 0.0;
  double F_best = 0.0;
  bool converged = false;
};

// Synthetic binary task: labels follow the sign of a hidden linear score
// plus Gaussian noise. Every vehicle draws its own local dataset.
struct TaskData {
  std::vector<double> w_true;
  std::vector<Dataset> local;  // one per vehicle
  Dataset test;
};

namespace detail {

inline Dataset draw_dataset(std::size_t n, const std::vector<double>& w_true, double noise, double scale, Rng& rng) {
  Dataset ds;
  ds.features = w_true.size();
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> row(ds.features);
  for (std::size_t i = 0; i < n; ++i) {
    double score = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = scale * gauss(rng);
      score += w_true[j] * row[j];
    }
    score += noise * gauss(rng);
    ds.push(row, score > 0.0 ? 1.0 : 0.0);
  }
  return ds;
}

}  // namespace detail

inline TaskData make_task_data(const SimConfig& cfg, std::uint64_t seed) {
  TaskData td;
  Rng task_rng = make_stream(seed, kNoVehicle, StreamPurpose::kTask);
  std::normal_distribution<double> gauss(0.0, 1.0);
  td.w_true.resize(cfg.d_model);
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  for (double& w : td.w_true) w = gauss(task_rng) * s / cfg.feature_scale;
  td.test = detail::draw_dataset(cfg.test_samples, td.w_true, cfg.label_noise, cfg.feature_scale, task_rng);
  for (std::size_t v = 0; v < cfg.N; ++v) {
    Rng rng = make_stream(seed, v, StreamPurpose::kData);
    td.local.push_back(detail::draw_dataset(cfg.samples_per_vehicle, td.w_true, cfg.label_noise,
                                            cfg.feature_scale, rng));
  }
  return td;
}

inline std::unique_ptr<LearningTask> make_task(const SimConfig& cfg) {
  if (cfg.task == "mlp") return std::make_unique<MlpTask>(cfg.d_model, cfg.mlp_hidden, cfg.mu);
  return std::make_unique<LogisticTask>(cfg.d_model, cfg.mu);
}

inline double mean_fading_gain(const FadingParams& fp) {
  return std::max(fp.mean * fp.mean + fp.std * fp.std, fp.h_min);
}

// Round-time bootstrap: compute time plus the upload time of a q = 6 payload
// from halfway to the coverage edge under the mean fading gain.
inline double default_round_time(const SimConfig& cfg) {
  VehicleState probe;
  probe.x = cfg.R_B / 2.0;
  probe.y = cfg.H;
  probe.p = cfg.p_watts();
  const ChannelSample ch = channel_at(probe, mean_fading_gain(cfg.fading()), cfg.link());
  return compute_time(cfg.c, cfg.f) + upload_time(payload_bits(6, cfg.d), ch.rate);
}

// The vehicular FL system seen as a multi-agent environment. One step is one
// FL round: selection happens in observe(), and step() runs local training,
// quantization with the chosen levels, the delay model, aggregation and the
// convergence check.
class VecEnvironment {
 public:
  VecEnvironment(const SimConfig& cfg)
      : cfg_(cfg),
        task_(make_task(cfg)),
        data_(make_task_data(cfg, cfg.seed)),
        link_(cfg.link()),
        fading_(cfg.fading()) {
    cfg_.validate();
    std::vector<const Dataset*> parts;
    for (const auto& ds : data_.local) parts.push_back(&ds);
    cm_.L = cfg.L ? *cfg.L : estimate_smoothness(parts, cfg.mu);
    cm_.mu = cfg.mu;
    cm_.Gamma = cfg.Gamma;
    cm_.lambda = cfg.lambda;
    cm_.init_gap_sq = cfg.init_gap_sq;
    cm_.validate();
    round_time0_ = cfg.T_g0 ? *cfg.T_g0 : default_round_time(cfg);

    initial_model_ = ModelVector(task_->dim());
    if (!task_->convex()) {
      Rng init = make_stream(cfg.seed, kNoVehicle, StreamPurpose::kModelInit);
      std::normal_distribution<double> g(0.0, 0.5 / std::sqrt(static_cast<double>(cfg.d_model)));
      for (double& w : initial_model_.weights) w = g(init);
    }

    for (std::size_t v = 0; v < cfg.N; ++v) {
      Vehicle veh;
      veh.state.id = v;
      veh.state.y = cfg.H;
      veh.state.f = cfg.f;
      veh.state.p = cfg.p_watts();
      Rng mob = make_stream(cfg.seed, v, StreamPurpose::kMobility);
      veh.state.v = draw_velocity(mob);
      veh.minibatch = make_stream(cfg.seed, v, StreamPurpose::kMinibatch);
      veh.quantizer = make_stream(cfg.seed, v, StreamPurpose::kQuantizer);
      veh.channel = make_stream(cfg.seed, v, StreamPurpose::kChannel);
      veh.reset_draws = make_stream(cfg.seed, v, StreamPurpose::kReset);
      vehicles_.push_back(std::move(veh));
    }
    reset();
    episode_ = 0;
  }

  // Start of an episode: every vehicle re-enters at -R_B with a random level
  // and channel draw, and the FL process restarts from the initial model.
  void reset() {
    ++episode_;
    global_ = initial_model_;
    best_.reset();
    history_.clear();
    losses_.clear();
    flags_.clear();
    episode_round_ = 0;
    selected_.clear();
    for (auto& veh : vehicles_) {
      veh.state.x = -cfg_.R_B;
      veh.state.reentered = false;
      veh.state.in_coverage = true;
      veh.local = initial_model_;
      veh.q_prev = ActionSpace::level(
          std::uniform_int_distribution<std::size_t>(0, ActionSpace::kSize - 1)(veh.reset_draws));
      const double h = sample_channel_gain(fading_, veh.channel);
      veh.gamma_prev = channel_at(veh.state, h, link_).gamma;
    }
  }

  // Runs vehicle selection for the coming round and returns the local states
  // of the participants.
  std::vector<std::pair<std::size_t, AgentState>> observe() {
    const double round_time = update_round_time_avg(history_, round_time0_);
    std::vector<SelectionCandidate> cands;
    cands.reserve(vehicles_.size());
    for (const auto& veh : vehicles_) {
      const double res = residence_time(veh.state.x, veh.state.v, cfg_.R_B);
      cands.push_back({veh.state.id, model_similarity(veh.local.view(), global_.view()),
                       time_margin(res, round_time)});
    }
    const auto decisions = cfg_.participants > 0 ? select_top_k(cands, cfg_.participants)
                                                 : select(cands, cfg_.phi_star);
    selected_ = selected_ids(decisions);
    std::vector<std::pair<std::size_t, AgentState>> out;
    for (std::size_t v : selected_) out.emplace_back(v, state_of(v));
    return out;
  }

  std::vector<Transition> step(std::span<const Decision> decisions) {
    if (decisions.size() != selected_.size()) throw ValidationError("step: one decision per selected vehicle required");
    std::map<std::size_t, std::size_t> action_of;
    for (const auto& d : decisions) {
      if (d.action >= ActionSpace::kSize) throw ValidationError("step: action index out of range");
      action_of[d.vehicle] = d.action;
    }
    for (std::size_t v : selected_) {
      if (!action_of.count(v)) throw ValidationError("step: missing decision for vehicle " + std::to_string(v));
    }

    struct Work {
      std::size_t v;
      std::size_t action;
      AgentState s;
      QuantizedGradient qg;
      double loss, sq_norm, gamma, t_comp, t_up;
      std::size_t dim;
    };
    std::vector<Work> work;
    const double t_comp = compute_time(cfg_.c, cfg_.f);
    for (std::size_t v : selected_) {
      Vehicle& veh = vehicles_[v];
      Work w{v, action_of[v], state_of(v), {}, 0.0, 0.0, 0.0, t_comp, 0.0, task_->dim()};
      const std::uint32_t q = ActionSpace::level(w.action);
      const Dataset& ds = data_.local[v];
      w.loss = local_loss(*task_, global_, ds);
      const auto batch = sample_minibatch_indices(ds.size(), cfg_.batch_size, veh.minibatch);
      const GradientVector g = local_gradient(*task_, global_, ds, batch);
      w.sq_norm = g.squared_norm();
      w.qg = quantize(g, q, veh.quantizer);
      const double h = sample_channel_gain(fading_, veh.channel);
      const ChannelSample ch = channel_at(veh.state, h, link_);
      w.gamma = ch.gamma;
      try {
        w.t_up = upload_time(payload_bits(q, cfg_.d), ch.rate);
      } catch (const InfiniteDelayError&) {
        continue;  // the vehicle drops out of this round
      }
      work.push_back(std::move(w));
    }

    const std::size_t K = work.size();
    std::vector<Transition> out;
    if (K == 0) {
      finish_round(0.0);
      return out;
    }

    std::vector<QuantizedGradient> grads;
    std::vector<double> losses;
    for (const auto& w : work) {
      grads.push_back(w.qg);
      losses.push_back(w.loss);
    }
    const ModelVector before = global_;
    const double f_global = global_loss(losses);
    best_.record(episode_round_, f_global, before);
    const double f_best = best_.best().loss;
    const bool converged = check_convergence(f_global, f_best, cm_.lambda);
    global_ = aggregate(global_, grads, cfg_.eta);
    losses_.push_back(f_global);
    flags_.push_back(converged);

    double duration = 0.0;
    std::vector<double> rewards(K);
    for (std::size_t i = 0; i < K; ++i) {
      const Work& w = work[i];
      const std::uint32_t q = ActionSpace::level(w.action);
      RoundRow row;
      row.round = global_round_;
      row.vehicle = w.v;
      row.q = q;
      row.K = K;
      row.T_comp = w.t_comp;
      row.T_upload = w.t_up;
      row.T_fed = fed_round_time(w.t_comp, w.t_up);
      row.R_lambda = min_convergence_rounds(cm_, q, K, w.dim);
      row.T_total = total_time_estimate(row.R_lambda, row.T_fed);
      row.QE = quantization_error_bound(w.dim, w.sq_norm, q);
      row.F_global = f_global;
      row.F_best = f_best;
      row.converged = converged;
      rewards[i] = reward(cfg_.w1, cfg_.w2, static_cast<double>(row.R_lambda), row.T_fed, row.QE);
      duration = std::max(duration, row.T_fed);
      if (recording_) rows_.push_back(row);
      vehicles_[w.v].local = before;
    }
    finish_round(duration);

    for (std::size_t i = 0; i < K; ++i) {
      const Work& w = work[i];
      Vehicle& veh = vehicles_[w.v];
      veh.gamma_prev = w.gamma;
      veh.q_prev = ActionSpace::level(w.action);
      out.push_back({w.v, w.s, w.action, rewards[i], state_of(w.v)});
    }
    return out;
  }

  void set_recording(bool on) { recording_ = on; }
  const std::vector<RoundRow>& rows() const { return rows_; }

  const SimConfig& config() const { return cfg_; }
  const LearningTask& task() const { return *task_; }
  const TaskData& data() const { return data_; }
  const ConvergenceModel& convergence_model() const { return cm_; }
  double bootstrap_round_time() const { return round_time0_; }
  const ModelVector& global_model() const { return global_; }
  const VehicleState& vehicle(std::size_t v) const { return vehicles_.at(v).state; }
  const ModelVector& local_model(std::size_t v) const { return vehicles_.at(v).local; }
  std::size_t vehicle_count() const { return vehicles_.size(); }
  const std::vector<std::size_t>& selected() const { return selected_; }
  std::size_t episode() const { return episode_; }
  const std::vector<double>& episode_losses() const { return losses_; }
  const std::vector<bool>& episode_flags() const { return flags_; }
  const std::vector<double>& round_history() const { return history_; }

  // Held-out accuracy of the best global model of the current episode.
  double test_accuracy() const {
    const ModelVector& m = best_.has_value() ? best_.best().model : global_;
    return accuracy(*task_, m, data_.test);
  }

  // First round of the episode whose global loss is within lambda of the
  // best loss the episode reached; -1 before any round completed.
  long convergence_round() const {
    if (losses_.empty()) return -1;
    const double best = *std::min_element(losses_.begin(), losses_.end());
    for (std::size_t r = 0; r < losses_.size(); ++r) {
      if (check_convergence(losses_[r], best, cm_.lambda)) return static_cast<long>(r);
    }
    return -1;
  }

 private:
  struct Vehicle {
    VehicleState state;
    ModelVector local;
    double gamma_prev = 0.0;
    std::uint32_t q_prev = ActionSpace::kMinLevel;
    Rng minibatch, quantizer, channel, reset_draws;
  };

  double draw_velocity(Rng& rng) const {
    const double lo = 1.0, hi = 2.0 * cfg_.v_mean;
    if (cfg_.v_std == 0.0) return std::clamp(cfg_.v_mean, lo, hi);
    std::normal_distribution<double> n(cfg_.v_mean, cfg_.v_std);
    for (int i = 0; i < 64; ++i) {
      const double v = n(rng);
      if (v >= lo && v <= hi) return v;
    }
    return std::clamp(cfg_.v_mean, lo, hi);
  }

  AgentState state_of(std::size_t v) const {
    const Vehicle& veh = vehicles_[v];
    return vecfl::observe(Observation{veh.gamma_prev, distance_to_bs(veh.state, link_.bs), veh.q_prev});
  }

  // Round barrier: log the duration and move every vehicle forward by the
  // simulated step length.
  void finish_round(double duration) {
    if (duration > 0.0) history_.push_back(duration);
    const double dt = std::min(duration, cfg_.step_duration);
    for (auto& veh : vehicles_) veh.state = advance(veh.state, dt, cfg_.R_B);
    ++episode_round_;
    ++global_round_;
  }

  SimConfig cfg_;
  std::unique_ptr<LearningTask> task_;
  TaskData data_;
  LinkParams link_;
  FadingParams fading_;
  ConvergenceModel cm_;
  double round_time0_ = 0.0;
  ModelVector initial_model_;
  ModelVector global_;
  BestTracker best_;
  std::vector<Vehicle> vehicles_;
  std::vector<std::size_t> selected_;
  std::vector<double> history_;
  std::vector<double> losses_;
  std::vector<bool> flags_;
  std::vector<RoundRow> rows_;
  std::size_t episode_ = 0;
  std::size_t episode_round_ = 0;
  std::size_t global_round_ = 0;
  bool recording_ = false;
};

struct SummaryRow {
  std::string scheme;
  double w1 = 0.0;
  double K = 0.0;  // mean participants per round
  double avg_total_time = 0.0;
  double avg_QE = 0.0;
  double G_pi = 0.0;
  double rounds_to_converge = 0.0;
  double test_acc = 0.0;
};

struct ExperimentResult {
  std::vector<EpisodeStats> learning_curve;
  std::vector<RoundRow> rounds;
  SummaryRow summary;
  std::vector<long> converge_rounds;  // per test episode, -1 when no round ran
  std::size_t gradient_updates = 0;

  double avg_level() const {
    if (rounds.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : rounds) s += r.q;
    return s / static_cast<double>(rounds.size());
  }
  // Mean of w1 * T_total + w2 * QE over the test rows.
  double avg_objective(double w1, double w2) const {
    if (rounds.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : rounds) s += w1 * r.T_total + w2 * r.QE;
    return s / static_cast<double>(rounds.size());
  }
};

// Training stage (learning schemes only) followed by T' greedy test episodes.
inline ExperimentResult run_experiment(const SimConfig& cfg) {
  cfg.validate();
  const Scheme scheme = parse_scheme(cfg.scheme);
  VecEnvironment env(cfg);
  ExperimentResult res;

  std::map<std::size_t, DdqnAgent> agents;
  if (scheme == Scheme::kDqnGradQ) {
    DdqnParams p;
    p.gamma = cfg.gamma;
    p.lr = cfg.lr;
    p.batch = cfg.I;
    p.sync_period = cfg.C;
    p.buffer_capacity = cfg.buffer_capacity;
    p.hidden = cfg.hidden;
    p.norm = StateNormalizer{cfg.log_gamma_min, cfg.log_gamma_max, cfg.d_max()};
    for (std::size_t v = 0; v < cfg.N; ++v) agents.emplace(v, DdqnAgent(p, cfg.seed, v));
    env.set_recording(false);
    res.learning_curve =
        run_training(env, agents, cfg.T, cfg.T_I, EpsilonSchedule{cfg.epsilon, cfg.epsilon_min, cfg.epsilon_decay});
    for (const auto& [v, a] : agents) res.gradient_updates += a.updates();
  }

  std::vector<AdaptivePolicy> ada;
  std::size_t ada_episode = 0, ada_seen = 0;
  std::vector<RandomPolicy> rnd;
  for (std::size_t v = 0; v < cfg.N; ++v) rnd.emplace_back(make_stream(cfg.seed, v, StreamPurpose::kExploration));

  auto choose = [&](std::size_t v, const AgentState& s) -> std::size_t {
    switch (scheme) {
      case Scheme::kDqnGradQ: return agents.at(v).greedy(s);
      case Scheme::kFix2:
      case Scheme::kFix6:
      case Scheme::kFix10: return ActionSpace::index(fixed_policy(fixed_level(scheme)).level());
      case Scheme::kRandom: return ActionSpace::index(rnd[v].level());
      case Scheme::kAdaGradQ: {
        if (ada_episode != env.episode()) {
          ada.assign(cfg.N, AdaptivePolicy(cfg.ada_window, cfg.ada_rho));
          ada_episode = env.episode();
          ada_seen = 0;
        }
        // Every vehicle hears the broadcast global loss of each finished round.
        const auto& losses = env.episode_losses();
        for (; ada_seen < losses.size(); ++ada_seen) {
          for (auto& a : ada) a.observe_loss(losses[ada_seen]);
        }
        return ActionSpace::index(ada[v].level());
      }
    }
    return 0;
  };

  env.set_recording(true);
  double g_sum = 0.0, acc_sum = 0.0, conv_sum = 0.0;
  for (std::size_t ep = 0; ep < cfg.T_prime; ++ep) {
    const RolloutStats st = rollout_episode(env, cfg.T_I, cfg.gamma, choose);
    g_sum += st.discounted_return;
    acc_sum += env.test_accuracy();
    const long rc = env.convergence_round();
    res.converge_rounds.push_back(rc);
    conv_sum += rc < 0 ? static_cast<double>(cfg.T_I) : static_cast<double>(rc);
  }
  res.rounds = env.rows();

  SummaryRow& s = res.summary;
  s.scheme = cfg.scheme;
  s.w1 = cfg.w1;
  const double n_ep = static_cast<double>(cfg.T_prime);
  s.G_pi = g_sum / n_ep;
  s.test_acc = acc_sum / n_ep;
  s.rounds_to_converge = conv_sum / n_ep;
  if (!res.rounds.empty()) {
    double tt = 0.0, qe = 0.0;
    std::map<std::size_t, std::size_t> per_round;
    for (const auto& r : res.rounds) {
      tt += r.T_total;
      qe += r.QE;
      per_round[r.round] = r.K;
    }
    s.avg_total_time = tt / static_cast<double>(res.rounds.size());
    s.avg_QE = qe / static_cast<double>(res.rounds.size());
    double k = 0.0;
    for (const auto& [r, kk] : per_round) k += static_cast<double>(kk);
    s.K = k / static_cast<double>(per_round.size());
  }
  return res;
}

}  // namespace vecfl
