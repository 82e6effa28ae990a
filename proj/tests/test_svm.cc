// zrtopic/tests/test_svm.cc

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

#include <sstream>

#include "doctest.h"
#include "zrtopic/svm.h"

using namespace zrtopic;

namespace {

// Two Gaussian blobs in 10 dimensions; features 0 and 1 carry the label,
// the rest are noise.
void blobs(int n, std::uint64_t seed, std::vector<SparseVector>* X, std::vector<int>* y) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (int i = 0; i < n; ++i) {
    const int label = i % 2 ? 1 : -1;
    SparseVector x;
    x.push_back({0, label + noise(rng)});
    x.push_back({1, 0.5 * label + noise(rng)});
    for (int j = 2; j < 10; ++j) x.push_back({j, noise(rng)});
    X->push_back(x);
    y->push_back(label);
  }
}

}  // namespace

TEST_CASE("hinge loss and decision values") {
  const LinearModel m{{1.0, -2.0}, 0.5};
  const SparseVector x = {{0, 1.0}, {1, 1.0}};
  CHECK(decision(m, x) == -0.5);
  CHECK(predict(m, x) == -1);
  CHECK(hinge_loss(m, x, -1) == 0.5);
  CHECK(hinge_loss(m, x, 1) == 1.5);
  CHECK(predict(LinearModel{{0.0, 0.0}, 0.0}, x) == 1);
}

TEST_CASE("separable data is learned and the objective falls") {
  for (Penalty p : {Penalty::kL2, Penalty::kL1}) {
    std::vector<SparseVector> X, Xt;
    std::vector<int> y, yt;
    blobs(200, 1, &X, &y);
    blobs(100, 2, &Xt, &yt);
    SvmConfig c;
    c.penalty = p;
    c.alpha = 1e-3;
    std::vector<double> trace;
    const auto m = train_binary(X, 10, y, c, &trace);
    REQUIRE(trace.size() == 30);
    const double zero_objective = svm_objective(LinearModel{std::vector<double>(10, 0.0), 0.0}, X, y, c);
    CHECK(trace.back() < 0.5 * zero_objective);
    CHECK(trace.back() <= trace.front() + 1e-9);
    int correct = 0;
    for (std::size_t i = 0; i < Xt.size(); ++i) correct += predict(m, Xt[i]) == yt[i];
    CHECK(correct >= 97);
  }
}

TEST_CASE("L1 penalty zeroes more noise weights than L2") {
  std::vector<SparseVector> X;
  std::vector<int> y;
  blobs(200, 3, &X, &y);
  SvmConfig c;
  c.alpha = 0.01;
  c.penalty = Penalty::kL1;
  const auto l1 = train_binary(X, 10, y, c);
  c.penalty = Penalty::kL2;
  const auto l2 = train_binary(X, 10, y, c);
  auto zeros = [](const LinearModel& m) { return std::count(m.w.begin() + 2, m.w.end(), 0.0); };
  CHECK(zeros(l1) > zeros(l2));
  CHECK(zeros(l1) >= 2);
  CHECK(l1.w[0] > 0.0);
}

TEST_CASE("single-class input is rejected") {
  std::vector<SparseVector> X = {{{0, 1.0}}, {{0, 2.0}}};
  CHECK_THROWS_WITH_AS(train_binary(X, 1, {1, 1}, SvmConfig{}), "single-class input", Error);
  CHECK_THROWS_AS(train_binary(X, 1, {1, 0}, SvmConfig{}), Error);
  CHECK_THROWS_AS(train_binary(X, 0, {1, -1}, SvmConfig{}), Error);
}

TEST_CASE("binary relevance falls back to a constant negative model") {
  std::vector<SparseVector> X = {{{0, 1.0}}, {{0, -1.0}}, {{1, 1.0}}};
  const std::vector<std::vector<int>> Y = {{1, 0}, {0, 0}, {1, 0}};
  const auto models = train_binary_relevance(X, 2, Y, SvmConfig{});
  REQUIRE(models.size() == 2);
  CHECK(models[1].b == -1.0);
  CHECK(models[1].w == std::vector<double>{0.0, 0.0});
  for (const auto& x : X) CHECK(decision(models[1], x) == -1.0);
}

TEST_CASE("multi-class prediction takes the lowest index among ties") {
  const std::vector<LinearModel> models = {{{0.0}, 0.2}, {{0.0}, 0.7}, {{0.0}, 0.7}};
  CHECK(predict_multiclass(models, {{0, 1.0}}) == 1);
  const std::vector<LinearModel> flat = {{{0.0}, -1.0}, {{0.0}, -1.0}};
  CHECK(predict_multiclass(flat, {}) == 0);
}

TEST_CASE("one-vs-rest training is deterministic and worker-independent") {
  Rng rng(4);
  std::normal_distribution<double> noise(0.0, 0.2);
  std::vector<SparseVector> X;
  std::vector<int> labels;
  for (int i = 0; i < 90; ++i) {
    const int c = i % 3;
    SparseVector x;
    for (int j = 0; j < 3; ++j) x.push_back({j, (j == c ? 1.0 : 0.0) + noise(rng)});
    X.push_back(x);
    labels.push_back(c);
  }
  SvmConfig c;
  c.rng_seed = 17;
  const auto a = train_multiclass_ovr(X, 3, labels, 3, c, 1);
  const auto b = train_multiclass_ovr(X, 3, labels, 3, c, 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(a[k].w == b[k].w);
    CHECK(a[k].b == b[k].b);
  }
  int correct = 0;
  for (std::size_t i = 0; i < X.size(); ++i) correct += predict_multiclass(a, X[i]) == labels[i];
  CHECK(correct >= 85);
  CHECK_THROWS_AS(train_multiclass_ovr(X, 3, std::vector<int>(90, 3), 3, c), Error);
}

TEST_CASE("model file round trip") {
  const std::vector<LinearModel> models = {{{0.1, -1e-300, 3.0}, 0.25}, {{0.0, 0.0, 1.0 / 3.0}, -1.0}};
  SvmConfig c;
  c.penalty = Penalty::kL1;
  c.alpha = 0.5;
  std::stringstream ss;
  write_svm_models(ss, models, c);
  SvmConfig back_cfg;
  const auto back = read_svm_models(ss, &back_cfg);
  REQUIRE(back.size() == 2);
  CHECK(back[0].w == models[0].w);
  CHECK(back[1].w == models[1].w);
  CHECK(back[1].b == -1.0);
  CHECK(back_cfg.penalty == Penalty::kL1);
  CHECK(back_cfg.alpha == 0.5);
  std::stringstream bad("{}");
  CHECK_THROWS_AS(read_svm_models(bad), Error);
}

TEST_CASE("svm config validation") {
  SvmConfig c;
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SvmConfig{};
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}
