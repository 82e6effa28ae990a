// zrtopic/svm.cc

// Copyright 2026  The zrtopic Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "zrtopic/svm.h"

namespace zrtopic {

void SvmConfig::validate() const {
  if (!(alpha > 0.0)) throw Error("svm config: alpha must be positive");
  if (epochs < 1) throw Error("svm config: epochs must be >= 1");
}

double decision(const LinearModel& m, const SparseVector& x) { return dot(x, m.w) + m.b; }

int predict(const LinearModel& m, const SparseVector& x) { return decision(m, x) >= 0.0 ? 1 : -1; }

double hinge_loss(const LinearModel& m, const SparseVector& x, int y) {
  return std::max(0.0, 1.0 - y * decision(m, x));
}

double svm_objective(const LinearModel& m, const std::vector<SparseVector>& X, const std::vector<int>& y,
                     const SvmConfig& config) {
  double loss = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) loss += hinge_loss(m, X[i], y[i]);
  loss /= std::max<std::size_t>(1, X.size());
  double pen = 0.0;
  for (double w : m.w) pen += config.penalty == Penalty::kL2 ? 0.5 * w * w : std::abs(w);
  return loss + config.alpha * pen;
}

namespace {

void check_inputs(const std::vector<SparseVector>& X, int dim, std::size_t n_labels) {
  if (X.size() != n_labels) throw Error("svm: label count does not match data");
  for (const auto& x : X)
    for (const auto& [j, v] : x)
      if (j < 0 || j >= dim) throw Error("svm: feature index out of range");
}

// Pegasos-style SGD with L2 shrinkage kept as a global scale: w = scale * v.
LinearModel train_l2(const std::vector<SparseVector>& X, int dim, const std::vector<int>& y, const SvmConfig& cfg,
                     std::vector<double>* trace) {
  const double t0 = std::max(0.0, 1.0 / cfg.alpha - 1.0);
  std::vector<double> v(dim, 0.0);
  double scale = 1.0, b = 0.0;
  Rng rng(cfg.rng_seed);
  std::vector<int> order(X.size());
  std::iota(order.begin(), order.end(), 0);
  long t = 0;
  auto materialize = [&]() {
    LinearModel m{std::vector<double>(dim), b};
    for (int j = 0; j < dim; ++j) m.w[j] = scale * v[j];
    return m;
  };
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int i : order) {
      ++t;
      const double eta = 1.0 / (cfg.alpha * (t + t0));
      const double margin = y[i] * (scale * dot(X[i], v) + b);
      const double shrink = 1.0 - eta * cfg.alpha;
      if (shrink <= 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        scale = 1.0;
      } else {
        scale *= shrink;
      }
      if (margin < 1.0) {
        for (const auto& [j, x] : X[i]) v[j] += eta * y[i] * x / scale;
        b += eta * y[i];
      }
      if (scale < 1e-9) {
        for (double& w : v) w *= scale;
        scale = 1.0;
      }
    }
    if (trace) trace->push_back(svm_objective(materialize(), X, y, cfg));
  }
  return materialize();
}

// L1 penalty applied lazily: every weight owes the cumulative shrinkage since
// it was last touched, clipped at zero. This equals applying the clipped
// penalty to all weights at every step.
LinearModel train_l1(const std::vector<SparseVector>& X, int dim, const std::vector<int>& y, const SvmConfig& cfg,
                     std::vector<double>* trace) {
  const double t0 = std::max(0.0, 1.0 / cfg.alpha - 1.0);
  std::vector<double> w(dim, 0.0), applied(dim, 0.0);
  double total = 0.0, b = 0.0;
  Rng rng(cfg.rng_seed);
  std::vector<int> order(X.size());
  std::iota(order.begin(), order.end(), 0);
  auto settle = [&](int j) {
    const double owed = total - applied[j];
    if (w[j] > 0.0) w[j] = std::max(0.0, w[j] - owed);
    else if (w[j] < 0.0) w[j] = std::min(0.0, w[j] + owed);
    applied[j] = total;
  };
  auto materialize = [&]() {
    for (int j = 0; j < dim; ++j) settle(j);
    return LinearModel{w, b};
  };
  long t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int i : order) {
      ++t;
      const double eta = 1.0 / (cfg.alpha * (t + t0));
      for (const auto& e : X[i]) settle(e.first);
      const double margin = y[i] * (dot(X[i], w) + b);
      total += eta * cfg.alpha;
      for (const auto& e : X[i]) settle(e.first);
      if (margin < 1.0) {
        for (const auto& [j, x] : X[i]) w[j] += eta * y[i] * x;
        b += eta * y[i];
      }
    }
    if (trace) trace->push_back(svm_objective(materialize(), X, y, cfg));
  }
  return materialize();
}

}  // namespace

LinearModel train_binary(const std::vector<SparseVector>& X, int dim, const std::vector<int>& y,
                         const SvmConfig& config, std::vector<double>* objective_trace) {
  config.validate();
  check_inputs(X, dim, y.size());
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) pos = true;
    else if (v == -1) neg = true;
    else throw Error("svm: labels must be +1 or -1");
  }
  if (!pos || !neg) throw Error("single-class input");
  return config.penalty == Penalty::kL2 ? train_l2(X, dim, y, config, objective_trace)
                                        : train_l1(X, dim, y, config, objective_trace);
}

LinearModel constant_negative(int dim) { return LinearModel{std::vector<double>(dim, 0.0), -1.0}; }

std::vector<LinearModel> train_binary_relevance(const std::vector<SparseVector>& X, int dim,
                                                const std::vector<std::vector<int>>& Y, const SvmConfig& config,
                                                int workers) {
  config.validate();
  if (Y.size() != X.size()) throw Error("svm: label matrix does not match data");
  const std::size_t K = Y.empty() ? 0 : Y[0].size();
  std::vector<LinearModel> models(K);
  parallel_for(K, workers, [&](std::size_t k) {
    std::vector<int> y(X.size());
    int pos = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
      y[i] = Y[i].at(k) ? 1 : -1;
      pos += Y[i][k] ? 1 : 0;
    }
    models[k] = (pos == 0 || pos == static_cast<int>(X.size())) ? constant_negative(dim)
                                                                 : train_binary(X, dim, y, config);
  });
  return models;
}

std::vector<LinearModel> train_multiclass_ovr(const std::vector<SparseVector>& X, int dim,
                                              const std::vector<int>& labels, int num_classes,
                                              const SvmConfig& config, int workers) {
  if (labels.size() != X.size()) throw Error("svm: label count does not match data");
  std::vector<std::vector<int>> Y(X.size(), std::vector<int>(num_classes, 0));
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw Error("svm: class id out of range");
    Y[i][labels[i]] = 1;
  }
  return train_binary_relevance(X, dim, Y, config, workers);
}

int predict_multiclass(const std::vector<LinearModel>& models, const SparseVector& x) {
  int best = 0;
  double best_score = 0.0;
  for (std::size_t c = 0; c < models.size(); ++c) {
    const double s = decision(models[c], x);
    if (c == 0 || s > best_score) {
      best = static_cast<int>(c);
      best_score = s;
    }
  }
  return best;
}

void write_svm_models(std::ostream& os, const std::vector<LinearModel>& models, const SvmConfig& config) {
  nlohmann::json j;
  j["config"] = {{"penalty", config.penalty == Penalty::kL1 ? "l1" : "l2"},
                 {"alpha", config.alpha},
                 {"epochs", config.epochs},
                 {"rng_seed", config.rng_seed}};
  j["dim"] = models.empty() ? 0 : models[0].w.size();
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : models) {
    nlohmann::json w = nlohmann::json::array();
    for (std::size_t k = 0; k < m.w.size(); ++k)
      if (m.w[k] != 0.0) w.push_back({k, m.w[k]});
    arr.push_back({{"weights", w}, {"bias", m.b}});
  }
  j["models"] = arr;
  os << j.dump() << "\n";
}

std::vector<LinearModel> read_svm_models(std::istream& is, SvmConfig* config) {
  try {
    nlohmann::json j;
    is >> j;
    if (config) {
      const auto& c = j.at("config");
      config->penalty = c.at("penalty").get<std::string>() == "l1" ? Penalty::kL1 : Penalty::kL2;
      config->alpha = c.at("alpha").get<double>();
      config->epochs = c.at("epochs").get<int>();
      config->rng_seed = c.at("rng_seed").get<std::uint64_t>();
    }
    const std::size_t dim = j.at("dim").get<std::size_t>();
    std::vector<LinearModel> out;
    for (const auto& m : j.at("models")) {
      LinearModel lm{std::vector<double>(dim, 0.0), m.at("bias").get<double>()};
      for (const auto& e : m.at("weights")) lm.w.at(e.at(0).get<std::size_t>()) = e.at(1).get<double>();
      out.push_back(std::move(lm));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed SVM model file: ") + e.what());
  }
}

}  // namespace zrtopic
