// zrtopic/tests/test_eval.cc

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

#include <set>
#include <sstream>

#include "doctest.h"
#include "oracles.h"
#include "zrtopic/eval.h"

using namespace zrtopic;

namespace {

std::vector<std::string> ids(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("doc" + std::to_string(i));
  return out;
}

// 60 single-label documents over 3 topics; topic c favours unigrams 3c..3c+2.
void toy_task(std::vector<NgramCounts>* counts, LabelData* labels) {
  Rng rng(21);
  std::uniform_int_distribution<int> own(0, 2), any(0, 8);
  std::bernoulli_distribution noise(0.3);
  labels->num_labels = 3;
  for (int d = 0; d < 60; ++d) {
    const int c = d % 3;
    std::vector<int> toks(20);
    for (int& t : toks) t = noise(rng) ? any(rng) : 3 * c + own(rng);
    counts->push_back(count_ngrams(toks, 1));
    labels->single.push_back(c);
    std::vector<int> row(3, 0);
    row[c] = 1;
    labels->binary.push_back(row);
  }
}

}  // namespace

TEST_CASE("average precision example") {
  CHECK(*average_precision({0.9, 0.8, 0.7}, {1, 0, 1}) == doctest::Approx(5.0 / 6.0));
  CHECK(*average_precision({0.1, 0.2}, {1, 1}) == 1.0);
  CHECK(!average_precision({0.3, 0.2}, {0, 0}));
}

TEST_CASE("average precision equals the exact rational area") {
  Rng rng(6);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + trial % 10;
    std::vector<double> s(n);
    std::vector<int> r(n);
    for (int i = 0; i < n; ++i) {
      s[i] = std::uniform_int_distribution<int>(0, 4)(rng) * 0.25;  // many ties
      r[i] = std::bernoulli_distribution(0.5)(rng);
    }
    const auto ap = average_precision(s, r);
    if (std::count(r.begin(), r.end(), 1) == 0) {
      CHECK(!ap);
      continue;
    }
    CHECK(std::abs(*ap - oracle::ap_rational(s, r)) <= 1e-15);
  }
}

TEST_CASE("multi-label AP report skips labels without positives") {
  const std::vector<std::vector<double>> scores = {{0.9, 0.1}, {0.2, 0.8}, {0.5, 0.4}};
  const std::vector<std::vector<int>> truth = {{1, 0}, {1, 0}, {0, 0}};
  const auto r = multilabel_ap_report(scores, truth, 1);
  CHECK(r.per_label[0] == 1.0);
  CHECK(r.per_label[1] == 0.5);
  CHECK(!r.per_label[2]);
  CHECK(r.overall == 0.75);
  CHECK(r.in_domain == 1.0);
}

TEST_CASE("accuracy") {
  CHECK(accuracy({1, 2, 3, 4}, {1, 0, 3, 0}) == 0.5);
  CHECK_THROWS_AS(accuracy({}, {}), Error);
}

TEST_CASE("stratified folds balance every key") {
  std::vector<int> keys;
  for (int i = 0; i < 180; ++i) keys.push_back(i % 6);
  const auto plan = make_folds(ids(180), keys, 10, 3);
  for (int f = 0; f < 10; ++f) {
    const auto m = plan.members(f);
    CHECK(m.size() == 18);
    std::map<int, int> per_key;
    for (int i : m) ++per_key[keys[i]];
    for (const auto& [k, c] : per_key) CHECK(c == 3);
  }
  CHECK(make_folds(ids(180), keys, 10, 3).fold_of == plan.fold_of);
  CHECK(make_folds(ids(180), keys, 10, 4).hash() != plan.hash());
  CHECK_THROWS_AS(make_folds(ids(5), 6, 0), Error);
  CHECK_THROWS_AS(make_folds(ids(5), 1, 0), Error);
}

TEST_CASE("fold sizes differ by at most one") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 10 + trial;
    std::vector<int> keys(n);
    for (int& k : keys) k = std::uniform_int_distribution<int>(0, 4)(rng);
    const auto plan = make_folds(ids(n), keys, 10, trial);
    std::vector<int> sizes(10, 0);
    for (int f : plan.fold_of) ++sizes[f];
    CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
  }
}

TEST_CASE("SVM, CNN and curve splits") {
  const auto plan = make_folds(ids(50), 10, 1);
  for (int f = 0; f < 10; ++f) {
    const auto s = svm_split(plan, f);
    CHECK(s.train_folds.size() == 9);
    CHECK(!s.validation_fold);
    CHECK(s.train_docs.size() + s.test_docs.size() == 50);
    const auto c = cnn_split(plan, f);
    CHECK(c.train_folds.size() == 8);
    REQUIRE(c.validation_fold);
    CHECK(*c.validation_fold != f);
    CHECK(c.train_docs.size() + c.validation_docs.size() + c.test_docs.size() == 50);
    std::set<int> seen(c.train_docs.begin(), c.train_docs.end());
    for (int d : c.validation_docs) CHECK(seen.insert(d).second);
    for (int d : c.test_docs) CHECK(seen.insert(d).second);
    for (int t = 1; t <= 9; ++t) {
      const auto u = curve_split(plan, f, t);
      CHECK(u.train_folds.size() == static_cast<std::size_t>(t));
      CHECK(std::find(u.train_folds.begin(), u.train_folds.end(), f) == u.train_folds.end());
    }
    CHECK(curve_split(plan, f, 9).train_docs == s.train_docs);
  }
  CHECK_THROWS_AS(curve_split(plan, 0, 10), Error);
}

TEST_CASE("SVM cross-validation on a toy task") {
  std::vector<NgramCounts> counts;
  LabelData labels;
  toy_task(&counts, &labels);
  std::vector<int> keys = labels.single;
  const auto plan = make_folds(ids(60), keys, 10, 5);
  SvmExperiment exp;
  exp.bow.order = 1;
  const auto out = run_cv_svm(counts, labels, plan, exp);
  CHECK(out.folds.size() == 10);
  CHECK(out.metric >= 0.9);
  CHECK(out.plan_hash == plan.hash());
  const auto again = run_cv_svm(counts, labels, plan, exp, 3);
  CHECK(again.scores == out.scores);
}

TEST_CASE("learning curve endpoint equals plain cross-validation") {
  std::vector<NgramCounts> counts;
  LabelData labels;
  toy_task(&counts, &labels);
  const auto plan = make_folds(ids(60), labels.single, 10, 9);
  SvmExperiment exp;
  exp.bow.order = 1;
  const auto curve = learning_curve(plan, labels, svm_scorer(counts, labels, exp), 3);
  REQUIRE(curve.size() == 9);
  CHECK(curve.front().train_folds == 1);
  CHECK(curve.back().metric == run_cv_svm(counts, labels, plan, exp).metric);
  std::ostringstream os;
  write_curve_csv(os, curve);
  CHECK(os.str().rfind("t,metric\n1,", 0) == 0);
}

TEST_CASE("repeats call the experiment once per seed on a fixed plan") {
  int calls = 0;
  std::set<std::uint64_t> seen;
  const auto r = repeat_experiment(
      [&](std::uint64_t seed) {
        ++calls;
        seen.insert(seed);
        CvOutcome o;
        o.plan_hash = "fixed";
        o.metric = 0.5 + 0.1 * (calls % 2);
        return o;
      },
      5, 7);
  CHECK(calls == 5);
  CHECK(seen.size() == 5);
  CHECK(r.values.size() == 5);
  CHECK(r.mean == doctest::Approx(0.56));
  CHECK(r.stddev == doctest::Approx(std::sqrt(0.0024)));
  int n = 0;
  CHECK_THROWS_AS(repeat_experiment(
                      [&](std::uint64_t) {
                        CvOutcome o;
                        o.plan_hash = std::to_string(n++);
                        return o;
                      },
                      2),
                  Error);
}

TEST_CASE("mean and deviation formatting") {
  CHECK(format_mean_std(0.8761, 0.0081) == "0.876 ± 0.008");
  RepeatedResult r;
  r.mean = 1.0;
  r.stddev = 0.0;
  CHECK(r.format() == "1.000 ± 0.000");
  CHECK(std::stod(format_double(0.1)) == 0.1);
}

TEST_CASE("results CSV layout") {
  CvOutcome o;
  o.metric = 0.75;
  o.folds.push_back({FoldSplit{}, 0.5});
  o.folds.push_back({FoldSplit{1, std::nullopt, {}, {}, {}, {}}, 1.0});
  RepeatedResult r;
  r.values = {0.75};
  r.mean = 0.75;
  std::ostringstream os;
  write_cv_csv(os, "cfg", {o}, r);
  const std::string s = os.str();
  CHECK(s.rfind("configuration,repeat,fold,metric\n", 0) == 0);
  CHECK(s.find("cfg,0,0,0.5\n") != std::string::npos);
  CHECK(s.find("cfg,0,1,1\n") != std::string::npos);
  CHECK(s.find("cfg,mean,all,0.75\n") != std::string::npos);
}
