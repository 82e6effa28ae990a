// zrtopic/cnn.h

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

// Convolutional document classifier over unit sequences:
//   embedding -> window-n convolution -> ReLU -> max over time
//   -> ReLU hidden layer -> softmax or sigmoid output.
// Index 0 is the PAD token; its embedding row is frozen at zero.

#ifndef ZRTOPIC_CNN_H_
#define ZRTOPIC_CNN_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "zrtopic/common.h"

namespace zrtopic {

enum class CnnHead { kSoftmax, kSigmoid };

struct CnnConfig {
  int embed_dim = 50;
  int window = 7;
  int conv_units = 1024;
  int hidden_units = 1024;
  double dropout = 0.2;
  int batch_size = 18;
  int max_epochs = 100;
  CnnHead head = CnnHead::kSoftmax;
  double rho = 0.95;
  double epsilon = 1e-6;
  // Multi-label runs keep the final epoch unless this is set, in which case
  // the epoch with the best validation AP is returned.
  bool select_on_validation_ap = false;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct CnnModel {
  CnnConfig config;
  int num_labels = 0;
  Matrix embedding;  // (vocab + 1) x embed_dim, row 0 = PAD
  Matrix conv;       // (window * embed_dim) x conv_units
  Vector conv_bias;
  Matrix hidden;     // conv_units x hidden_units
  Vector hidden_bias;
  Matrix output;     // hidden_units x num_labels
  Vector output_bias;

  int vocab_size() const { return static_cast<int>(embedding.rows()) - 1; }
};

/// Same shapes as the model parameters.
struct CnnGradients {
  Matrix embedding, conv, hidden, output;
  Vector conv_bias, hidden_bias, output_bias;

  static CnnGradients zeros_like(const CnnModel& m);
};

/// Every trainable matrix and bias drawn from seeded U(-0.05, 0.05); the PAD
/// row is zero. `pretrained`, when non-empty, replaces the embedding matrix.
CnnModel init_cnn(const CnnConfig& config, int vocab_size, int num_labels, const Matrix& pretrained = Matrix());

/// Token index rows padded with PAD (0) to a common length, plus targets.
struct PaddedBatch {
  std::vector<std::vector<int>> indices;  // batch x m_max
  Matrix targets;                         // batch x K
};

PaddedBatch make_batch(const std::vector<std::vector<int>>& sequences, const Matrix& targets,
                       const std::vector<int>& rows, int max_len);

/// Per-example activations kept for the backward pass.
struct ExampleCache {
  Matrix x;                      // (m + window - 1) x embed_dim, dropout applied
  Matrix embed_mask;             // same shape as x; empty when no dropout
  std::vector<int> argmax;       // per conv unit, position of the max
  Vector pooled_pre;             // max over time of the ReLU conv output
  Vector pooled;                 // after dropout
  Vector pooled_mask;
  Vector hidden_pre;             // before ReLU
  Vector hidden_act;             // after ReLU and dropout
  Vector hidden_mask;
  Vector probs;
};

struct ForwardResult {
  Matrix probs;  // batch x K
  std::vector<ExampleCache> caches;
};

/// Dropout masks are drawn from `dropout_seed` (one stream per example) when
/// train_mode is set.
ForwardResult forward(const CnnModel& model, const PaddedBatch& batch, bool train_mode,
                      std::uint64_t dropout_seed = 0, int workers = 1);

double categorical_cross_entropy(const Vector& probs, const Vector& target);
double binary_cross_entropy(const Vector& probs, const Vector& target);
/// Mean over the batch of the configured loss.
double batch_loss(const CnnModel& model, const Matrix& probs, const Matrix& targets);

/// Gradients of batch_loss with respect to every parameter.
CnnGradients backward(const CnnModel& model, const PaddedBatch& batch, const ForwardResult& fwd, int workers = 1);

struct AdadeltaState {
  CnnGradients grad_sq;
  CnnGradients update_sq;

  static AdadeltaState zeros_like(const CnnModel& m);
};

/// Adadelta with the model's rho and epsilon; the PAD row never moves.
void adadelta_step(CnnModel& model, AdadeltaState& state, const CnnGradients& grads);

// ---------------------------------------------------------------------------
// Training and inference.

struct CnnDataset {
  std::vector<std::vector<int>> sequences;  // token indices in 1..vocab
  Matrix targets;                           // docs x K (one-hot or binary)
  int max_len = 0;                          // padding length for every batch
};

struct CnnLogEntry {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_metric = 0.0;
};

struct CnnTrainResult {
  CnnModel model;
  std::vector<CnnLogEntry> log;
  int selected_epoch = 0;
};

/// Trains for config.max_epochs with seeded shuffling. Softmax heads return
/// the snapshot with the best validation accuracy (ties go to the earliest
/// epoch); sigmoid heads return the final model unless selection on
/// validation AP is configured.
CnnTrainResult train_cnn(const CnnModel& init, const CnnDataset& train, const CnnDataset* validation,
                         int workers = 1);

/// Class probabilities for every sequence (no dropout).
Matrix predict_proba(const CnnModel& model, const CnnDataset& data, int workers = 1);
double validation_accuracy(const CnnModel& model, const CnnDataset& data, int workers = 1);
/// Macro AP over labels that have at least one positive.
double validation_ap(const CnnModel& model, const CnnDataset& data, int workers = 1);

/// Maps raw unit ids to CNN token indices 1..n (0 is PAD); unknown units map
/// to PAD.
struct UnitIndex {
  std::vector<int> units;  // sorted

  static UnitIndex build(const std::vector<std::vector<int>>& sequences);
  int index_of(int unit) const;
  std::vector<int> encode(const std::vector<int>& sequence) const;
  int size() const { return static_cast<int>(units.size()); }
};

void write_cnn(std::ostream& os, const CnnModel& model);
CnnModel read_cnn(std::istream& is);
void write_training_log(std::ostream& os, const std::vector<CnnLogEntry>& log);

}  // namespace zrtopic

#endif  // ZRTOPIC_CNN_H_
