// zrtopic/cnn_train.cc

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
#include <cstdio>
#include <numeric>
#include <ostream>

#include "zrtopic/cnn.h"
#include "zrtopic/eval.h"

namespace zrtopic {

namespace {

constexpr int kInferenceBatch = 64;

std::vector<int> range(int begin, int end) {
  std::vector<int> r(end - begin);
  std::iota(r.begin(), r.end(), begin);
  return r;
}

}  // namespace

Matrix predict_proba(const CnnModel& model, const CnnDataset& data, int workers) {
  const int N = static_cast<int>(data.sequences.size());
  Matrix probs(N, model.num_labels);
  const Matrix targets = data.targets.rows() == N ? data.targets : Matrix::Zero(N, model.num_labels);
  for (int start = 0; start < N; start += kInferenceBatch) {
    const int end = std::min(N, start + kInferenceBatch);
    const auto batch = make_batch(data.sequences, targets, range(start, end), data.max_len);
    probs.middleRows(start, end - start) = forward(model, batch, false, 0, workers).probs;
  }
  return probs;
}

double validation_accuracy(const CnnModel& model, const CnnDataset& data, int workers) {
  const Matrix probs = predict_proba(model, data, workers);
  std::vector<int> pred, truth;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index p = 0, t = 0;
    probs.row(r).maxCoeff(&p);
    data.targets.row(r).maxCoeff(&t);
    pred.push_back(static_cast<int>(p));
    truth.push_back(static_cast<int>(t));
  }
  return accuracy(pred, truth);
}

double validation_ap(const CnnModel& model, const CnnDataset& data, int workers) {
  const Matrix probs = predict_proba(model, data, workers);
  std::vector<std::vector<double>> scores(model.num_labels);
  std::vector<std::vector<int>> truth(model.num_labels);
  for (int k = 0; k < model.num_labels; ++k)
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      scores[k].push_back(probs(r, k));
      truth[k].push_back(data.targets(r, k) > 0.5 ? 1 : 0);
    }
  return multilabel_ap_report(scores, truth, model.num_labels).overall;
}

CnnTrainResult train_cnn(const CnnModel& init, const CnnDataset& train, const CnnDataset* validation, int workers) {
  const int N = static_cast<int>(train.sequences.size());
  if (N == 0) throw Error("empty train set");
  if (train.targets.rows() != N || train.targets.cols() != init.num_labels)
    throw Error("cnn: target matrix shape mismatch");
  const auto& cfg = init.config;
  const bool softmax = cfg.head == CnnHead::kSoftmax;
  const bool select = validation && (softmax || cfg.select_on_validation_ap);

  CnnTrainResult result{init, {}, 0};
  CnnModel model = init;
  AdadeltaState state = AdadeltaState::zeros_like(model);
  Rng shuffle_rng(derive_seed(cfg.rng_seed, "shuffle"));
  const std::uint64_t dropout_root = derive_seed(cfg.rng_seed, "dropout");
  std::vector<int> order = range(0, N);
  double best = -1.0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    int batch_index = 0;
    for (int start = 0; start < N; start += cfg.batch_size, ++batch_index) {
      const int end = std::min(N, start + cfg.batch_size);
      const std::vector<int> rows(order.begin() + start, order.begin() + end);
      const auto batch = make_batch(train.sequences, train.targets, rows, train.max_len);
      const std::uint64_t seed = derive_seed(derive_seed(dropout_root, static_cast<std::uint64_t>(epoch)),
                                             static_cast<std::uint64_t>(batch_index));
      const auto fwd = forward(model, batch, true, seed, workers);
      loss_sum += batch_loss(model, fwd.probs, batch.targets) * (end - start);
      adadelta_step(model, state, backward(model, batch, fwd, workers));
    }
    CnnLogEntry entry{epoch, loss_sum / N, 0.0};
    if (validation)
      entry.validation_metric =
          softmax ? validation_accuracy(model, *validation, workers) : validation_ap(model, *validation, workers);
    result.log.push_back(entry);
    if (select) {
      if (entry.validation_metric > best) {
        best = entry.validation_metric;
        result.model = model;
        result.selected_epoch = epoch;
      }
    } else {
      result.model = model;
      result.selected_epoch = epoch;
    }
  }
  return result;
}

UnitIndex UnitIndex::build(const std::vector<std::vector<int>>& sequences) {
  UnitIndex idx;
  for (const auto& s : sequences) idx.units.insert(idx.units.end(), s.begin(), s.end());
  std::sort(idx.units.begin(), idx.units.end());
  idx.units.erase(std::unique(idx.units.begin(), idx.units.end()), idx.units.end());
  return idx;
}

int UnitIndex::index_of(int unit) const {
  auto it = std::lower_bound(units.begin(), units.end(), unit);
  if (it == units.end() || *it != unit) return 0;
  return static_cast<int>(it - units.begin()) + 1;
}

std::vector<int> UnitIndex::encode(const std::vector<int>& sequence) const {
  std::vector<int> out;
  out.reserve(sequence.size());
  for (int u : sequence) out.push_back(index_of(u));
  return out;
}

void write_training_log(std::ostream& os, const std::vector<CnnLogEntry>& log) {
  os << "epoch,train_loss,validation_metric\n";
  char buf[96];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", e.epoch, e.train_loss, e.validation_metric);
    os << buf;
  }
}

}  // namespace zrtopic
