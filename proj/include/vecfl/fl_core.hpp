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
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vecfl/errors.hpp"
#include "vecfl/quantizer.hpp"
#include "vecfl/random.hpp"

namespace vecfl {

struct ModelVector {
  std::vector<double> weights;

  ModelVector() = default;
  explicit ModelVector(std::size_t dim) : weights(dim, 0.0) {}
  explicit ModelVector(std::vector<double> w) : weights(std::move(w)) {}

  std::size_t dim() const { return weights.size(); }
  std::span<const double> view() const { return weights; }
  friend bool operator==(const ModelVector&, const ModelVector&) = default;
};

// Row-major feature matrix with binary {0, 1} labels.
struct Dataset {
  std::size_t features = 0;
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(x).subspan(i * features, features);
  }
  void push(std::span<const double> features_row, double label) {
    x.insert(x.end(), features_row.begin(), features_row.end());
    y.push_back(label);
  }
};

namespace detail {
// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
}  // namespace detail

// Binary classifier trained with logistic loss plus (l2/2)||w||^2.
class LearningTask {
 public:
  explicit LearningTask(double l2) : l2_(l2) {}
  virtual ~LearningTask() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t features() const = 0;
  // Logit for one sample.
  virtual double logit(std::span<const double> w, std::span<const double> x) const = 0;
  // Adds scale * d(sample loss)/dw into grad.
  virtual void add_sample_gradient(std::span<const double> w, std::span<const double> x, double y,
                                   double scale, std::span<double> grad) const = 0;
  // True when the loss satisfies the smooth, strongly convex assumptions
  // behind the convergence-round estimate.
  virtual bool convex() const = 0;
  virtual std::string name() const = 0;

  double l2() const { return l2_; }

  double sample_loss(std::span<const double> w, std::span<const double> x, double y) const {
    const double z = logit(w, x);
    return detail::softplus(z) - y * z;
  }

  double predict(std::span<const double> w, std::span<const double> x) const {
    return detail::sigmoid(logit(w, x));
  }

 private:
  double l2_;
};

class LogisticTask final : public LearningTask {
 public:
  LogisticTask(std::size_t features, double l2) : LearningTask(l2), features_(features) {
    if (features == 0) throw ValidationError("LogisticTask: features must be >= 1");
  }
  std::size_t dim() const override { return features_; }
  std::size_t features() const override { return features_; }
  double logit(std::span<const double> w, std::span<const double> x) const override {
    return detail::dot(w, x);
  }
  void add_sample_gradient(std::span<const double> w, std::span<const double> x, double y, double scale,
                           std::span<double> grad) const override {
    const double r = scale * (detail::sigmoid(detail::dot(w, x)) - y);
    for (std::size_t i = 0; i < features_; ++i) grad[i] += r * x[i];
  }
  bool convex() const override { return true; }
  std::string name() const override { return "logistic"; }

 private:
  std::size_t features_;
};

// One tanh hidden layer, logistic output. Parameter layout:
// [W1 (hidden x features, row-major) | b1 (hidden) | w2 (hidden) | b2].
class MlpTask final : public LearningTask {
 public:
  MlpTask(std::size_t features, std::size_t hidden, double l2)
      : LearningTask(l2), features_(features), hidden_(hidden) {
    if (features == 0 || hidden == 0) throw ValidationError("MlpTask: sizes must be >= 1");
  }
  std::size_t dim() const override { return hidden_ * features_ + 2 * hidden_ + 1; }
  std::size_t features() const override { return features_; }
  std::size_t hidden() const { return hidden_; }

  double logit(std::span<const double> w, std::span<const double> x) const override {
    double z = w[dim() - 1];
    for (std::size_t h = 0; h < hidden_; ++h) z += w[w2_offset() + h] * std::tanh(pre(w, x, h));
    return z;
  }

  void add_sample_gradient(std::span<const double> w, std::span<const double> x, double y, double scale,
                           std::span<double> grad) const override {
    std::vector<double> act(hidden_);
    double z = w[dim() - 1];
    for (std::size_t h = 0; h < hidden_; ++h) {
      act[h] = std::tanh(pre(w, x, h));
      z += w[w2_offset() + h] * act[h];
    }
    const double dz = scale * (detail::sigmoid(z) - y);
    grad[dim() - 1] += dz;
    for (std::size_t h = 0; h < hidden_; ++h) {
      grad[w2_offset() + h] += dz * act[h];
      const double da = dz * w[w2_offset() + h] * (1.0 - act[h] * act[h]);
      grad[b1_offset() + h] += da;
      for (std::size_t i = 0; i < features_; ++i) grad[h * features_ + i] += da * x[i];
    }
  }
  bool convex() const override { return false; }
  std::string name() const override { return "mlp"; }

 private:
  std::size_t b1_offset() const { return hidden_ * features_; }
  std::size_t w2_offset() const { return hidden_ * features_ + hidden_; }
  double pre(std::span<const double> w, std::span<const double> x, std::size_t h) const {
    return detail::dot(w.subspan(h * features_, features_), x) + w[b1_offset() + h];
  }

  std::size_t features_;
  std::size_t hidden_;
};

inline double regularizer(const LearningTask& task, std::span<const double> w) {
  return task.l2() == 0.0 ? 0.0 : 0.5 * task.l2() * detail::dot(w, w);
}

// Mean sample loss over the whole local dataset, plus the L2 term.
inline double local_loss(const LearningTask& task, const ModelVector& w, const Dataset& data) {
  if (data.size() == 0) throw ValidationError("local_loss: empty dataset");
  if (w.dim() != task.dim()) throw ValidationError("local_loss: model dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) s += task.sample_loss(w.view(), data.row(i), data.y[i]);
  return s / static_cast<double>(data.size()) + regularizer(task, w.view());
}

// Gradient of the minibatch mean loss (plus L2 term) at w.
inline GradientVector local_gradient(const LearningTask& task, const ModelVector& w, const Dataset& data,
                                     std::span<const std::size_t> batch) {
  if (batch.empty()) throw ValidationError("local_gradient: empty minibatch");
  if (w.dim() != task.dim()) throw ValidationError("local_gradient: model dimension mismatch");
  std::vector<double> grad(task.dim(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t idx : batch) {
    if (idx >= data.size()) throw ValidationError("local_gradient: sample index out of range");
    task.add_sample_gradient(w.view(), data.row(idx), data.y[idx], scale, grad);
  }
  if (task.l2() != 0.0) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += task.l2() * w.weights[i];
  }
  return GradientVector(std::move(grad));
}

inline GradientVector full_gradient(const LearningTask& task, const ModelVector& w, const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return local_gradient(task, w, data, all);
}

// Uniform minibatch of `size` distinct indices out of [0, population).
template <class URBG>
std::vector<std::size_t> sample_minibatch_indices(std::size_t population, std::size_t size, URBG& rng) {
  if (size == 0 || size > population) throw ValidationError("sample_minibatch_indices: bad batch size");
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates; the first `size` slots are the sample.
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(size);
  return idx;
}

inline double accuracy(const LearningTask& task, const ModelVector& w, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double p = task.predict(w.view(), data.row(i));
    hits += ((p >= 0.5) == (data.y[i] >= 0.5)) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

// w_g - (eta / K) * sum_k dequantize(Q_k).
inline ModelVector aggregate(const ModelVector& global, std::span<const QuantizedGradient> quantized,
                             double eta) {
  if (quantized.empty()) throw ValidationError("aggregate: need at least one gradient");
  std::vector<double> sum(global.dim(), 0.0);
  for (const auto& qg : quantized) {
    if (qg.dim() != global.dim()) throw ValidationError("aggregate: gradient dimension mismatch");
    const GradientVector g = dequantize(qg);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += g[i];
  }
  ModelVector out = global;
  const double step = eta / static_cast<double>(quantized.size());
  for (std::size_t i = 0; i < sum.size(); ++i) out.weights[i] -= step * sum[i];
  return out;
}

inline double global_loss(std::span<const double> local_losses) {
  if (local_losses.empty()) throw ValidationError("global_loss: no local losses");
  return std::accumulate(local_losses.begin(), local_losses.end(), 0.0) /
         static_cast<double>(local_losses.size());
}

struct BestModel {
  std::size_t round = 0;
  double loss = std::numeric_limits<double>::infinity();
  ModelVector model;
};

// Running argmin of the global loss; equal losses keep the earlier round.
class BestTracker {
 public:
  void record(std::size_t round, double loss, const ModelVector& model) {
    if (!has_value_ || loss < best_.loss) {
      best_ = {round, loss, model};
      has_value_ = true;
    }
  }
  bool has_value() const { return has_value_; }
  const BestModel& best() const {
    if (!has_value_) throw ValidationError("BestTracker: no completed round");
    return best_;
  }
  void reset() { *this = BestTracker{}; }

 private:
  BestModel best_;
  bool has_value_ = false;
};

struct RoundLoss {
  ModelVector model;
  double loss = 0.0;
};

inline BestModel track_best(std::span<const RoundLoss> history) {
  BestTracker t;
  for (std::size_t r = 0; r < history.size(); ++r) t.record(r, history[r].loss, history[r].model);
  return t.best();
}

inline bool check_convergence(double current, double best, double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("check_convergence: lambda must be positive");
  return current - best <= lambda;
}

struct ConvergenceModel {
  double L = 1.0;
  double mu = 1.0;
  double Gamma = 0.5;
  double lambda = 0.3;
  double init_gap_sq = 1.0;

  double kappa() const { return L / mu; }

  void validate() const {
    if (!(mu > 0.0)) throw ValidationError("ConvergenceModel: mu must be positive");
    if (!(L >= mu)) throw ValidationError("ConvergenceModel: L must be >= mu");
    if (!(lambda > 0.0)) throw ValidationError("ConvergenceModel: lambda must be positive");
    if (!(Gamma > 0.0)) throw ValidationError("ConvergenceModel: Gamma must be positive");
    if (!(init_gap_sq > 0.0)) throw ValidationError("ConvergenceModel: init_gap_sq must be positive");
  }
};

// Smallest round count at which the optimality-gap bound drops to lambda:
// ceil((sqrt(d)/(qK) + 1) * ((L*gap + 2*Gamma/mu)/lambda - 2) * kappa + 1),
// floored at one. A non-positive middle factor means any round suffices.
inline std::int64_t min_convergence_rounds(const ConvergenceModel& cm, std::uint32_t q, std::size_t k,
                                           std::size_t d) {
  if (q == 0 || k == 0 || d == 0) throw ValidationError("min_convergence_rounds: q, K, d must be >= 1");
  cm.validate();
  const double level_factor = std::sqrt(static_cast<double>(d)) / (static_cast<double>(q) * static_cast<double>(k)) + 1.0;
  const double inner = (cm.L * cm.init_gap_sq + 2.0 * cm.Gamma / cm.mu) / cm.lambda - 2.0;
  if (inner <= 0.0) return 1;
  const double rounds = std::ceil(level_factor * inner * cm.kappa() + 1.0);
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(rounds));
}

inline double fed_round_time(double compute, double upload) {
  if (compute < 0.0 || upload < 0.0) throw ValidationError("fed_round_time: times must be >= 0");
  return compute + upload;
}

inline double total_time_estimate(std::int64_t rounds, double fed_time) {
  if (rounds < 1) throw ValidationError("total_time_estimate: rounds must be >= 1");
  return static_cast<double>(rounds) * fed_time;
}

// Largest eigenvalue of (1/n) X^T X by power iteration.
inline double gram_top_eigenvalue(std::span<const Dataset* const> parts, int iterations = 200) {
  if (parts.empty()) throw ValidationError("gram_top_eigenvalue: no data");
  const std::size_t f = parts.front()->features;
  std::size_t n = 0;
  for (const auto* p : parts) n += p->size();
  if (n == 0) throw ValidationError("gram_top_eigenvalue: no samples");
  std::vector<double> v(f, 1.0 / std::sqrt(static_cast<double>(f)));
  std::vector<double> next(f);
  double eig = 0.0;
  for (int it = 0; it < iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (const auto* p : parts) {
      for (std::size_t i = 0; i < p->size(); ++i) {
        const auto row = p->row(i);
        const double s = detail::dot(row, v);
        for (std::size_t j = 0; j < f; ++j) next[j] += s * row[j];
      }
    }
    for (double& x : next) x /= static_cast<double>(n);
    const double norm = std::sqrt(detail::dot(next, next));
    if (norm == 0.0) return 0.0;
    eig = norm;
    for (std::size_t j = 0; j < f; ++j) v[j] = next[j] / norm;
  }
  return eig;
}

// Smoothness constant of the regularized logistic loss: lambda_max(X^T X/n)/4 + l2.
inline double estimate_smoothness(std::span<const Dataset* const> parts, double l2) {
  return gram_top_eigenvalue(parts) / 4.0 + l2;
}

}  // namespace vecfl
