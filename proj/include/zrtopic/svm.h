// zrtopic/svm.h

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

// Linear SVM trained by SGD on the hinge loss with L1 or L2 penalty, plus
// one-vs-rest and binary-relevance wrappers.

#ifndef ZRTOPIC_SVM_H_
#define ZRTOPIC_SVM_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "zrtopic/bow.h"

namespace zrtopic {

enum class Penalty { kL1, kL2 };

struct SvmConfig {
  Penalty penalty = Penalty::kL2;
  double alpha = 1e-4;
  int epochs = 30;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct LinearModel {
  std::vector<double> w;
  double b = 0.0;
};

double hinge_loss(const LinearModel& m, const SparseVector& x, int y);
double decision(const LinearModel& m, const SparseVector& x);
/// +1 when decision >= 0, else -1.
int predict(const LinearModel& m, const SparseVector& x);

/// Mean hinge loss plus alpha/2 |w|^2 (L2) or alpha |w|_1 (L1).
double svm_objective(const LinearModel& m, const std::vector<SparseVector>& X, const std::vector<int>& y,
                     const SvmConfig& config);

/// Step t (from 1) uses eta_t = 1 / (alpha (t + t0)) with t0 = max(0, 1/alpha - 1).
/// L2 shrinks w by (1 - eta alpha); L1 moves every weight eta alpha toward
/// zero without crossing it (applied lazily). The bias is not penalized.
/// `objective_trace`, when given, receives the objective after each epoch.
LinearModel train_binary(const std::vector<SparseVector>& X, int dim, const std::vector<int>& y,
                         const SvmConfig& config, std::vector<double>* objective_trace = nullptr);

/// Constant-negative model used for labels without both classes.
LinearModel constant_negative(int dim);

/// One binary model per class (class c vs rest); labels in [0, num_classes).
std::vector<LinearModel> train_multiclass_ovr(const std::vector<SparseVector>& X, int dim,
                                              const std::vector<int>& labels, int num_classes,
                                              const SvmConfig& config, int workers = 1);
/// argmax of decisions; ties go to the lowest class id.
int predict_multiclass(const std::vector<LinearModel>& models, const SparseVector& x);

/// One binary model per label column of Y (docs x K, 0/1).
std::vector<LinearModel> train_binary_relevance(const std::vector<SparseVector>& X, int dim,
                                                const std::vector<std::vector<int>>& Y, const SvmConfig& config,
                                                int workers = 1);

void write_svm_models(std::ostream& os, const std::vector<LinearModel>& models, const SvmConfig& config);
std::vector<LinearModel> read_svm_models(std::istream& is, SvmConfig* config = nullptr);

}  // namespace zrtopic

#endif  // ZRTOPIC_SVM_H_
