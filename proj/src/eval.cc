// zrtopic/eval.cc

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
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>

#include "zrtopic/eval.h"

namespace zrtopic {

std::vector<int> FoldPlan::members(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) out.push_back(static_cast<int>(i));
  return out;
}

std::string FoldPlan::hash() const {
  std::string buf = "k=" + std::to_string(k) + ";seed=" + std::to_string(seed) + ";";
  for (std::size_t i = 0; i < doc_ids.size(); ++i) buf += doc_ids[i] + ":" + std::to_string(fold_of[i]) + ";";
  return sha256_hex(buf);
}

FoldPlan make_folds(const std::vector<std::string>& doc_ids, const std::vector<int>& keys, int k,
                    std::uint64_t seed) {
  const int n = static_cast<int>(doc_ids.size());
  if (k < 2) throw Error("fold count must be >= 2");
  if (k > n) throw Error("fold count exceeds number of documents");
  if (keys.size() != doc_ids.size()) throw Error("stratification keys do not match documents");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.doc_ids = doc_ids;
  plan.fold_of.assign(n, -1);
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[keys[i]].push_back(i);
  Rng rng(seed);
  int deal = 0;
  for (auto& [key, members] : groups) {
    std::shuffle(members.begin(), members.end(), rng);
    for (int i : members) plan.fold_of[i] = deal++ % k;
  }
  return plan;
}

FoldPlan make_folds(const std::vector<std::string>& doc_ids, int k, std::uint64_t seed) {
  return make_folds(doc_ids, std::vector<int>(doc_ids.size(), 0), k, seed);
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& truths) {
  if (predictions.size() != truths.size()) throw Error("length mismatch");
  if (predictions.empty()) throw Error("accuracy of an empty set");
  int correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) correct += predictions[i] == truths[i];
  return static_cast<double>(correct) / predictions.size();
}

std::optional<double> average_precision(const std::vector<double>& scores, const std::vector<int>& relevance) {
  if (scores.size() != relevance.size()) throw Error("length mismatch");
  const int positives = static_cast<int>(std::count_if(relevance.begin(), relevance.end(), [](int r) { return r; }));
  if (positives == 0) return std::nullopt;
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  int hits = 0;
  for (std::size_t n = 0; n < order.size(); ++n) {
    if (!relevance[order[n]]) continue;
    ++hits;
    ap += static_cast<double>(hits) / (n + 1);
  }
  return ap / positives;
}

ApReport multilabel_ap_report(const std::vector<std::vector<double>>& scores,
                              const std::vector<std::vector<int>>& truth, int in_domain) {
  if (scores.size() != truth.size()) throw Error("label count mismatch");
  ApReport r;
  double all = 0.0, dom = 0.0;
  int n_all = 0, n_dom = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const auto ap = average_precision(scores[k], truth[k]);
    r.per_label.push_back(ap);
    if (!ap) continue;
    all += *ap;
    ++n_all;
    if (static_cast<int>(k) < in_domain) {
      dom += *ap;
      ++n_dom;
    }
  }
  r.overall = n_all ? all / n_all : 0.0;
  r.in_domain = n_dom ? dom / n_dom : 0.0;
  return r;
}

LabelData label_data(const Corpus& corpus) {
  LabelData d;
  d.multi_label = corpus.multi_label();
  d.num_labels = corpus.num_labels();
  d.binary = label_matrix(corpus);
  if (!d.multi_label) d.single = single_labels(corpus);
  return d;
}

int default_in_domain(const LabelData& labels) {
  return labels.multi_label ? std::max(0, labels.num_labels - 1) : labels.num_labels;
}

namespace {

FoldSplit make_split(const FoldPlan& plan, int test_fold, std::optional<int> validation_fold,
                     std::vector<int> train_folds) {
  if (test_fold < 0 || test_fold >= plan.k) throw Error("test fold out of range");
  FoldSplit s;
  s.test_fold = test_fold;
  s.validation_fold = validation_fold;
  std::sort(train_folds.begin(), train_folds.end());
  s.train_folds = train_folds;
  for (std::size_t i = 0; i < plan.fold_of.size(); ++i) {
    const int f = plan.fold_of[i];
    if (f == test_fold) s.test_docs.push_back(static_cast<int>(i));
    else if (validation_fold && f == *validation_fold) s.validation_docs.push_back(static_cast<int>(i));
    else if (std::binary_search(train_folds.begin(), train_folds.end(), f)) s.train_docs.push_back(static_cast<int>(i));
  }
  return s;
}

}  // namespace

FoldSplit svm_split(const FoldPlan& plan, int test_fold) {
  std::vector<int> train;
  for (int f = 0; f < plan.k; ++f)
    if (f != test_fold) train.push_back(f);
  return make_split(plan, test_fold, std::nullopt, train);
}

FoldSplit cnn_split(const FoldPlan& plan, int test_fold) {
  const int val = (test_fold + 1) % plan.k;
  std::vector<int> train;
  for (int f = 0; f < plan.k; ++f)
    if (f != test_fold && f != val) train.push_back(f);
  return make_split(plan, test_fold, val, train);
}

FoldSplit curve_split(const FoldPlan& plan, int test_fold, int t) {
  if (t < 1 || t > plan.k - 1) throw Error("training fold count out of range");
  std::vector<int> train;
  for (int j = 1; j <= t; ++j) train.push_back((test_fold + j) % plan.k);
  return make_split(plan, test_fold, std::nullopt, train);
}

CvOutcome run_cv(const FoldPlan& plan, const LabelData& labels, const std::vector<FoldSplit>& splits,
                 const FoldScorer& scorer, int in_domain) {
  const int n = static_cast<int>(plan.fold_of.size());
  const int K = labels.num_labels;
  if (static_cast<int>(labels.binary.size()) != n) throw Error("labels do not match fold plan");
  CvOutcome out;
  out.plan_hash = plan.hash();
  out.in_domain = in_domain;
  out.scores = Matrix::Zero(n, K);
  std::vector<bool> tested(n, false);
  double metric_sum = 0.0;
  for (const auto& split : splits) {
    const Matrix s = scorer(split);
    if (s.rows() != static_cast<Eigen::Index>(split.test_docs.size()) || s.cols() != K)
      throw Error("scorer returned a score matrix of the wrong shape");
    FoldRecord rec{split, 0.0};
    if (!labels.multi_label) {
      std::vector<int> pred, truth;
      for (std::size_t r = 0; r < split.test_docs.size(); ++r) {
        Eigen::Index best = 0;
        s.row(r).maxCoeff(&best);
        pred.push_back(static_cast<int>(best));
        truth.push_back(labels.single[split.test_docs[r]]);
      }
      rec.metric = accuracy(pred, truth);
    } else {
      std::vector<std::vector<double>> sc(K);
      std::vector<std::vector<int>> tr(K);
      for (int k = 0; k < K; ++k)
        for (std::size_t r = 0; r < split.test_docs.size(); ++r) {
          sc[k].push_back(s(r, k));
          tr[k].push_back(labels.binary[split.test_docs[r]][k]);
        }
      rec.metric = multilabel_ap_report(sc, tr, in_domain).overall;
    }
    for (std::size_t r = 0; r < split.test_docs.size(); ++r) {
      out.scores.row(split.test_docs[r]) = s.row(r);
      tested[split.test_docs[r]] = true;
    }
    metric_sum += rec.metric;
    out.folds.push_back(std::move(rec));
  }
  if (!labels.multi_label) {
    out.metric = out.folds.empty() ? 0.0 : metric_sum / out.folds.size();
  } else {
    std::vector<std::vector<double>> sc(K);
    std::vector<std::vector<int>> tr(K);
    for (int k = 0; k < K; ++k)
      for (int d = 0; d < n; ++d)
        if (tested[d]) {
          sc[k].push_back(out.scores(d, k));
          tr[k].push_back(labels.binary[d][k]);
        }
    out.pooled_ap = multilabel_ap_report(sc, tr, in_domain);
    out.metric = out.pooled_ap->overall;
  }
  return out;
}

FoldScorer svm_scorer(const std::vector<NgramCounts>& counts, const LabelData& labels, const SvmExperiment& exp,
                      int workers) {
  return [&counts, &labels, exp, workers](const FoldSplit& split) {
    std::vector<NgramCounts> train_counts;
    for (int d : split.train_docs) train_counts.push_back(counts.at(d));
    const auto featurizer = BowFeaturizer::fit(train_counts, exp.bow);
    std::vector<SparseVector> X;
    for (const auto& c : train_counts) X.push_back(featurizer.transform(c).values);
    SvmConfig cfg = exp.svm;
    cfg.rng_seed = derive_seed(exp.svm.rng_seed, static_cast<std::uint64_t>(split.test_fold));
    std::vector<LinearModel> models;
    if (!labels.multi_label) {
      std::vector<int> y;
      for (int d : split.train_docs) y.push_back(labels.single[d]);
      models = train_multiclass_ovr(X, featurizer.dim(), y, labels.num_labels, cfg, workers);
    } else {
      std::vector<std::vector<int>> Y;
      for (int d : split.train_docs) Y.push_back(labels.binary[d]);
      models = train_binary_relevance(X, featurizer.dim(), Y, cfg, workers);
    }
    Matrix scores(static_cast<Eigen::Index>(split.test_docs.size()), labels.num_labels);
    for (std::size_t r = 0; r < split.test_docs.size(); ++r) {
      const auto x = featurizer.transform(counts.at(split.test_docs[r])).values;
      for (int k = 0; k < labels.num_labels; ++k) scores(r, k) = decision(models[k], x);
    }
    return scores;
  };
}

CvOutcome run_cv_svm(const std::vector<NgramCounts>& counts, const LabelData& labels, const FoldPlan& plan,
                     const SvmExperiment& exp, int workers) {
  std::vector<FoldSplit> splits;
  for (int f = 0; f < plan.k; ++f) splits.push_back(svm_split(plan, f));
  return run_cv(plan, labels, splits, svm_scorer(counts, labels, exp, workers), default_in_domain(labels));
}

namespace {

CnnDataset cnn_subset(const std::vector<std::vector<int>>& sequences, const LabelData& labels,
                      const std::vector<int>& docs, int max_len) {
  CnnDataset d;
  d.max_len = max_len;
  d.targets = Matrix::Zero(static_cast<Eigen::Index>(docs.size()), labels.num_labels);
  for (std::size_t r = 0; r < docs.size(); ++r) {
    d.sequences.push_back(sequences.at(docs[r]));
    for (int k = 0; k < labels.num_labels; ++k) d.targets(r, k) = labels.binary[docs[r]][k];
  }
  return d;
}

}  // namespace

FoldScorer cnn_scorer(const std::vector<std::vector<int>>& sequences, int vocab_size, const LabelData& labels,
                      const CnnExperiment& exp, int workers) {
  int max_len = 0;
  for (const auto& s : sequences) max_len = std::max(max_len, static_cast<int>(s.size()));
  return [&sequences, &labels, exp, vocab_size, max_len, workers](const FoldSplit& split) {
    CnnConfig cfg = exp.cnn;
    cfg.rng_seed = derive_seed(exp.cnn.rng_seed, static_cast<std::uint64_t>(split.test_fold));
    const auto init = init_cnn(cfg, vocab_size, labels.num_labels, exp.pretrained);
    const auto train = cnn_subset(sequences, labels, split.train_docs, max_len);
    const auto test = cnn_subset(sequences, labels, split.test_docs, max_len);
    CnnDataset validation;
    const bool has_val = split.validation_fold.has_value();
    if (has_val) validation = cnn_subset(sequences, labels, split.validation_docs, max_len);
    const auto result = train_cnn(init, train, has_val ? &validation : nullptr, workers);
    return predict_proba(result.model, test, workers);
  };
}

CvOutcome run_cv_cnn(const std::vector<std::vector<int>>& sequences, int vocab_size, const LabelData& labels,
                     const FoldPlan& plan, const CnnExperiment& exp, int workers) {
  std::vector<FoldSplit> splits;
  for (int f = 0; f < plan.k; ++f) splits.push_back(cnn_split(plan, f));
  return run_cv(plan, labels, splits, cnn_scorer(sequences, vocab_size, labels, exp, workers),
                default_in_domain(labels));
}

std::string format_mean_std(double mean, double stddev) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f \xC2\xB1 %.3f", mean, stddev);
  return buf;
}

std::string RepeatedResult::format() const { return format_mean_std(mean, stddev); }

RepeatedResult repeat_experiment(const std::function<CvOutcome(std::uint64_t)>& experiment, int repeats,
                                 std::uint64_t base_seed) {
  if (repeats < 1) throw Error("need at least one repeat");
  RepeatedResult r;
  for (int i = 0; i < repeats; ++i) {
    const std::uint64_t seed = derive_seed(base_seed, static_cast<std::uint64_t>(i));
    const CvOutcome out = experiment(seed);
    r.seeds.push_back(seed);
    r.values.push_back(out.metric);
    r.plan_hashes.push_back(out.plan_hash);
  }
  for (std::size_t i = 1; i < r.plan_hashes.size(); ++i)
    if (r.plan_hashes[i] != r.plan_hashes[0]) throw Error("fold plan changed between repeats");
  r.mean = std::accumulate(r.values.begin(), r.values.end(), 0.0) / repeats;
  double var = 0.0;
  for (double v : r.values) var += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(var / repeats);
  return r;
}

std::vector<CurvePoint> learning_curve(const FoldPlan& plan, const LabelData& labels, const FoldScorer& scorer,
                                       int in_domain) {
  std::vector<CurvePoint> curve;
  for (int t = 1; t <= plan.k - 1; ++t) {
    std::vector<FoldSplit> splits;
    for (int f = 0; f < plan.k; ++f) splits.push_back(curve_split(plan, f, t));
    CurvePoint p;
    p.train_folds = t;
    p.outcome = run_cv(plan, labels, splits, scorer, in_domain);
    p.metric = p.outcome.metric;
    curve.push_back(std::move(p));
  }
  return curve;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_cv_csv(std::ostream& os, const std::string& configuration, const std::vector<CvOutcome>& outcomes,
                  const RepeatedResult& summary) {
  os << "configuration,repeat,fold,metric\n";
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    for (const auto& f : outcomes[r].folds)
      os << configuration << "," << r << "," << f.split.test_fold << "," << format_double(f.metric) << "\n";
    os << configuration << "," << r << ",all," << format_double(outcomes[r].metric) << "\n";
  }
  os << configuration << ",mean,all," << format_double(summary.mean) << "\n";
  os << configuration << ",std,all," << format_double(summary.stddev) << "\n";
}

void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& curve) {
  os << "t,metric\n";
  for (const auto& p : curve) os << p.train_folds << "," << format_double(p.metric) << "\n";
}

}  // namespace zrtopic
