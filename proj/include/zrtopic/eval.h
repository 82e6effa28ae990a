// zrtopic/eval.h

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

// Cross-validation protocols and metrics: stratified fold plans, accuracy,
// average precision, SVM (9 train / 1 test) and CNN (8 / 1 validation / 1)
// rotations, repeated experiments and fold-count learning curves.

#ifndef ZRTOPIC_EVAL_H_
#define ZRTOPIC_EVAL_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "zrtopic/bow.h"
#include "zrtopic/cnn.h"
#include "zrtopic/corpus.h"
#include "zrtopic/svm.h"

namespace zrtopic {

struct FoldPlan {
  int k = 10;
  std::uint64_t seed = 0;
  std::vector<std::string> doc_ids;
  std::vector<int> fold_of;  // per document

  /// Document indices of one fold, ascending.
  std::vector<int> members(int fold) const;
  /// SHA-256 over k, seed and the assignment.
  std::string hash() const;
};

/// Stratified by `keys`: documents of each key are shuffled and dealt round
/// robin, continuing the deal across keys so fold sizes differ by at most 1.
FoldPlan make_folds(const std::vector<std::string>& doc_ids, const std::vector<int>& keys, int k,
                    std::uint64_t seed);
FoldPlan make_folds(const std::vector<std::string>& doc_ids, int k, std::uint64_t seed);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& truths);

/// Area under the precision-recall curve with documents ranked by score
/// (stable order for ties). Empty when there are no positives.
std::optional<double> average_precision(const std::vector<double>& scores, const std::vector<int>& relevance);

struct ApReport {
  double overall = 0.0;    // macro mean over labels with positives
  double in_domain = 0.0;  // macro mean over the first in_domain labels
  std::vector<std::optional<double>> per_label;
};

/// scores[k][doc] and truth[k][doc] per label.
ApReport multilabel_ap_report(const std::vector<std::vector<double>>& scores,
                              const std::vector<std::vector<int>>& truth, int in_domain);

// ---------------------------------------------------------------------------
// Cross-validation harness.

struct LabelData {
  bool multi_label = false;
  int num_labels = 0;
  std::vector<int> single;              // per document (single-label)
  std::vector<std::vector<int>> binary; // docs x K relevance
};

LabelData label_data(const Corpus& corpus);

struct FoldSplit {
  int test_fold = 0;
  std::optional<int> validation_fold;
  std::vector<int> train_folds;
  std::vector<int> train_docs;  // ascending
  std::vector<int> validation_docs;
  std::vector<int> test_docs;
};

/// Train on every other fold, test on `test_fold`.
FoldSplit svm_split(const FoldPlan& plan, int test_fold);
/// Validation fold = (test_fold + 1) mod k; train on the remaining k - 2.
FoldSplit cnn_split(const FoldPlan& plan, int test_fold);
/// Train on folds (test_fold + 1 .. test_fold + t) mod k, test on test_fold.
FoldSplit curve_split(const FoldPlan& plan, int test_fold, int t);

/// Scores for split.test_docs: rows follow test_docs, one column per label.
using FoldScorer = std::function<Matrix(const FoldSplit&)>;

struct FoldRecord {
  FoldSplit split;
  double metric = 0.0;  // accuracy, or overall AP on the fold for multi-label
};

struct CvOutcome {
  std::vector<FoldRecord> folds;
  std::string plan_hash;
  Matrix scores;  // docs x K, filled from every fold's test predictions
  /// Single-label: mean fold accuracy. Multi-label: overall AP of the pooled
  /// test scores.
  double metric = 0.0;
  std::optional<ApReport> pooled_ap;
  int in_domain = 0;
};

/// Runs `scorer` on each split (in fold order) and evaluates the test scores.
CvOutcome run_cv(const FoldPlan& plan, const LabelData& labels, const std::vector<FoldSplit>& splits,
                 const FoldScorer& scorer, int in_domain);

/// Default number of in-domain labels: K - 1 for multi-label data (the last
/// label is the out-of-domain one), K otherwise.
int default_in_domain(const LabelData& labels);

struct SvmExperiment {
  BowConfig bow;
  SvmConfig svm;
};

/// Fits the featurizer on the training documents only, then trains OVR or
/// binary-relevance SVMs. The fold seed is derived from svm.rng_seed and the
/// test fold index.
FoldScorer svm_scorer(const std::vector<NgramCounts>& counts, const LabelData& labels, const SvmExperiment& exp,
                      int workers = 1);

/// 9 / 1 rotation over every fold.
CvOutcome run_cv_svm(const std::vector<NgramCounts>& counts, const LabelData& labels, const FoldPlan& plan,
                     const SvmExperiment& exp, int workers = 1);

struct CnnExperiment {
  CnnConfig cnn;
  Matrix pretrained;  // optional (vocab + 1) x embed_dim
};

/// Sequences must already be CNN token indices (1..vocab_size).
FoldScorer cnn_scorer(const std::vector<std::vector<int>>& sequences, int vocab_size, const LabelData& labels,
                      const CnnExperiment& exp, int workers = 1);

/// 8 / 1 / 1 rotation over every fold.
CvOutcome run_cv_cnn(const std::vector<std::vector<int>>& sequences, int vocab_size, const LabelData& labels,
                     const FoldPlan& plan, const CnnExperiment& exp, int workers = 1);

struct RepeatedResult {
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> plan_hashes;
  double mean = 0.0;
  double stddev = 0.0;  // population

  std::string format() const;
};

constexpr int kDefaultRepeats = 5;

/// Calls `experiment` with one derived training seed per repeat; the fold
/// plan is whatever the experiment closes over and must not change.
RepeatedResult repeat_experiment(const std::function<CvOutcome(std::uint64_t)>& experiment,
                                 int repeats = kDefaultRepeats, std::uint64_t base_seed = 0);

/// "0.876 ± 0.008"
std::string format_mean_std(double mean, double stddev);

struct CurvePoint {
  int train_folds = 0;
  double metric = 0.0;
  CvOutcome outcome;
};

/// Points for t = 1 .. k - 1 training folds.
std::vector<CurvePoint> learning_curve(const FoldPlan& plan, const LabelData& labels, const FoldScorer& scorer,
                                       int in_domain);

// Reports.
/// One row per (repeat, fold), then per-repeat means and the mean/std rows.
void write_cv_csv(std::ostream& os, const std::string& configuration, const std::vector<CvOutcome>& outcomes,
                  const RepeatedResult& summary);
void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& curve);
std::string format_double(double v);

}  // namespace zrtopic

#endif  // ZRTOPIC_EVAL_H_
