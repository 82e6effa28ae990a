// zrtopic/tests/acceptance/acceptance.cc

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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.h"
#include "json.hpp"
#include "zrtopic/aud.h"
#include "zrtopic/bow.h"
#include "zrtopic/cnn.h"
#include "zrtopic/corpus.h"
#include "zrtopic/embed.h"
#include "zrtopic/eval.h"
#include "zrtopic/svm.h"
#include "zrtopic/utd.h"

using namespace zrtopic;
namespace fs = std::filesystem;

namespace {

// Tolerances and thresholds.
constexpr double kDtwTol = 1e-12;
constexpr double kHmmTol = 1e-10;
constexpr double kApTol = 1e-15;  // one rounding of the exact rational
constexpr double kGradTol = 1e-4;
constexpr double kRowSumTol = 1e-10;
constexpr double kStickTol = 1e-12;
constexpr double kNormTol = 1e-12;
constexpr double kElboRelTol = 1e-6;
constexpr double kVbSeconds = 120.0;
constexpr double kEndToEndSeconds = 900.0;
constexpr double kAudSvmMin = 0.90;
constexpr double kAudCnnMin = 0.90;
constexpr double kUtdRecallMin = 0.90;
constexpr double kUtdOverlapMin = 0.90;
constexpr double kUtdSvmMin = 0.85;
constexpr int kTrendSeeds = 5;

constexpr std::uint64_t kRoot = 20260301;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// Oracle equivalences.

void check_dtw_oracle() {
  Rng rng(kRoot + 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const int rows = std::uniform_int_distribution<int>(1, 6)(rng);
    const int cols = std::uniform_int_distribution<int>(1, 6)(rng);
    Matrix field(rows, cols);
    for (Eigen::Index i = 0; i < field.size(); ++i) field.data()[i] = u(rng);
    const int diagonal = std::uniform_int_distribution<int>(-(rows - 1), cols - 1)(rng);
    const int band = std::uniform_int_distribution<int>(0, 3)(rng);
    const double offset = std::uniform_real_distribution<double>(0.2, 0.9)(rng);
    const AlignmentPath p = local_align(field, diagonal, band, offset);
    worst = std::max(worst, std::abs(p.score - oracle::best_alignment_score(field, diagonal, band, offset)));
    worst = std::max(worst, std::abs(p.score - alignment_objective(field, p.cells, offset)));
  }
  report("dtw-vs-brute-force", worst <= kDtwTol, fmt("2000 grids <= 6x6, max |diff| %.2e", worst));
}

PhoneLoopHmm random_hmm(int units, int states, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  PhoneLoopHmm h;
  h.num_units = units;
  h.states_per_unit = states;
  std::vector<double> entry(units);
  double total = 0.0;
  for (auto& e : entry) total += (e = u(rng));
  for (double e : entry) h.log_entry.push_back(std::log(e / total));
  for (int i = 0; i < units * states; ++i) {
    const double p = u(rng);
    h.log_stay.push_back(std::log(p));
    h.log_next.push_back(std::log1p(-p));
  }
  return h;
}

Matrix random_emissions(int frames, int states, Rng& rng) {
  std::normal_distribution<double> n(0.0, 2.0);
  Matrix e(frames, states);
  for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = n(rng);
  return e;
}

void check_hmm_oracles() {
  Rng rng(kRoot + 2);
  double viterbi = 0.0, evidence = 0.0, posterior = 0.0;
  for (int trial = 0; trial < 120; ++trial) {
    const int units = 1 + trial % 3;
    const int states = 2 + (trial / 3) % 2;
    const int frames = 1 + (trial / 6) % 5;
    const PhoneLoopHmm h = random_hmm(units, states, rng);
    const Matrix e = random_emissions(frames, h.num_states(), rng);
    viterbi = std::max(viterbi, std::abs(viterbi_path(h, e).log_score - oracle::viterbi_brute(h, e, nullptr)));
    const ForwardBackwardResult fb = forward_backward(h, e);
    evidence = std::max(evidence, std::abs(fb.log_evidence - oracle::log_evidence_brute(h, e)));
    posterior = std::max(posterior, (fb.state_posteriors - oracle::posteriors_brute(h, e)).cwiseAbs().maxCoeff());
  }
  report("viterbi-vs-brute-force", viterbi <= kHmmTol, fmt("<= 3 units x 5 frames, max |diff| %.2e", viterbi));
  report("forward-vs-path-sum", evidence <= kHmmTol && posterior <= kHmmTol,
         fmt("log-evidence max |diff| %.2e, posteriors %.2e", evidence, posterior));
}

void check_ap_oracle() {
  Rng rng(kRoot + 3);
  double worst = 0.0;
  int cases = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    const int n = 1 + trial % 10;
    std::vector<double> s(n);
    std::vector<int> r(n);
    for (int i = 0; i < n; ++i) {
      s[i] = std::uniform_int_distribution<int>(0, 5)(rng) / 5.0;
      r[i] = std::bernoulli_distribution(0.4)(rng);
    }
    const auto ap = average_precision(s, r);
    if (!ap) continue;
    ++cases;
    worst = std::max(worst, std::abs(*ap - oracle::ap_rational(s, r)));
  }
  report("ap-vs-pr-area", worst <= kApTol, fmt("%.0f rankings <= 10 items, max |diff| %.2e", cases, worst));
}

void check_huffman_oracle() {
  Rng rng(kRoot + 4);
  int bad = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    const int V = 1 + trial % 6;
    std::vector<double> f(V);
    for (double& x : f) x = std::uniform_int_distribution<int>(1, 30)(rng);
    const HuffmanTree t = build_huffman(f);
    double cost = 0.0;
    for (int i = 0; i < V; ++i) cost += f[i] * t.codes[i].size();
    if (cost != oracle::optimal_prefix_cost(f)) ++bad;
    for (int i = 0; i < V; ++i)
      for (int j = 0; j < V; ++j)
        if (i != j && t.codes[i].size() <= t.codes[j].size() &&
            std::equal(t.codes[i].begin(), t.codes[i].end(), t.codes[j].begin()))
          ++bad;
  }
  report("huffman-optimal-prefix", bad == 0, fmt("3000 vocabularies <= 6, %.0f mismatches", bad));
}

Match edge(int a, int b, double sim) {
  Match m;
  m.utt_a = "u" + std::to_string(a);
  m.utt_b = "u" + std::to_string(b);
  m.span_a = m.span_b = Span{0, 59};
  m.dtw_similarity = sim;
  return m;
}

void check_components_oracle() {
  Rng rng(kRoot + 5);
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 12)(rng);
    std::vector<Match> matches;
    std::vector<std::pair<int, int>> kept;
    for (int i = 0; i + 1 < n; ++i) matches.push_back(edge(i, i + 1, 0.0));
    const int edges = std::uniform_int_distribution<int>(0, 2 * n)(rng);
    for (int k = 0; k < edges; ++k) {
      const int a = std::uniform_int_distribution<int>(0, n - 1)(rng);
      const int b = std::uniform_int_distribution<int>(0, n - 1)(rng);
      if (a == b) continue;
      const double w = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      matches.push_back(edge(a, b, w));
      if (w >= 0.88) kept.push_back({a, b});
    }
    const auto clusters = cluster_terms(matches, 0.88, false);
    const auto reach = oracle::reachability(n, kept);
    std::map<std::string, int> cluster_of;
    for (std::size_t c = 0; c < clusters.clusters.size(); ++c)
      for (const auto& node : clusters.clusters[c]) cluster_of[node.utterance_id] = static_cast<int>(c);
    if (static_cast<int>(cluster_of.size()) != n) {
      ++bad;
      continue;
    }
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if ((cluster_of["u" + std::to_string(a)] == cluster_of["u" + std::to_string(b)]) != reach[a][b]) ++bad;
  }
  report("components-vs-reachability", bad == 0, fmt("1000 graphs <= 12 nodes, %.0f mismatches", bad));
}

// ---------------------------------------------------------------------------
// Numerical checks.

template <typename P>
double tensor_error(CnnModel& m, P& param, const Matrix& analytic, const PaddedBatch& batch, int skip_rows) {
  Matrix numeric = Matrix::Zero(param.rows(), param.cols());
  auto loss = [&]() { return batch_loss(m, forward(m, batch, false).probs, batch.targets); };
  for (Eigen::Index r = skip_rows; r < param.rows(); ++r)
    for (Eigen::Index c = 0; c < param.cols(); ++c) numeric(r, c) = oracle::central_difference(loss, param(r, c));
  const Eigen::Index rows = param.rows() - skip_rows;
  return oracle::relative_error(analytic.bottomRows(rows), numeric.bottomRows(rows));
}

double cnn_gradient_error(CnnHead head, std::uint64_t seed) {
  Rng rng(seed);
  CnnConfig c;
  c.embed_dim = 4;
  c.window = 3;
  c.conv_units = 6;
  c.hidden_units = 5;
  c.dropout = 0.0;
  c.head = head;
  c.rng_seed = seed;
  CnnModel m = init_cnn(c, 7, 3);
  std::normal_distribution<double> n(0.0, 0.6);
  for (Matrix* p : {&m.embedding, &m.conv, &m.hidden, &m.output})
    for (Eigen::Index i = 0; i < p->size(); ++i) p->data()[i] = n(rng);
  for (Vector* p : {&m.conv_bias, &m.hidden_bias, &m.output_bias})
    for (Eigen::Index i = 0; i < p->size(); ++i) (*p)[i] = n(rng);
  m.embedding.row(0).setZero();
  Matrix targets = Matrix::Zero(3, 3);
  targets(0, 1) = targets(1, 0) = targets(2, 2) = 1.0;
  if (head == CnnHead::kSigmoid) targets(0, 2) = 1.0;
  const PaddedBatch batch = make_batch({{1, 2, 3}, {4, 5, 6, 7, 1}, {2}}, targets, {0, 1, 2}, 5);
  const CnnGradients g = backward(m, batch, forward(m, batch, false));
  double worst = 0.0;
  worst = std::max(worst, tensor_error(m, m.embedding, g.embedding, batch, 1));
  worst = std::max(worst, tensor_error(m, m.conv, g.conv, batch, 0));
  worst = std::max(worst, tensor_error(m, m.conv_bias, Matrix(g.conv_bias), batch, 0));
  worst = std::max(worst, tensor_error(m, m.hidden, g.hidden, batch, 0));
  worst = std::max(worst, tensor_error(m, m.hidden_bias, Matrix(g.hidden_bias), batch, 0));
  worst = std::max(worst, tensor_error(m, m.output, g.output, batch, 0));
  worst = std::max(worst, tensor_error(m, m.output_bias, Matrix(g.output_bias), batch, 0));
  return worst;
}

void check_gradients() {
  double cnn = 0.0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    cnn = std::max(cnn, cnn_gradient_error(CnnHead::kSoftmax, s));
    cnn = std::max(cnn, cnn_gradient_error(CnnHead::kSigmoid, s));
  }
  report("cnn-gradient", cnn < kGradTol, fmt("max relative error %.2e over 20 models", cnn));

  Rng rng(kRoot + 6);
  std::normal_distribution<double> n(0.0, 0.5);
  double sg = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int V = 2 + trial % 7, dim = 5;
    std::vector<double> freq(V);
    for (double& f : freq) f = std::uniform_int_distribution<int>(1, 9)(rng);
    const HuffmanTree t = build_huffman(freq);
    const int target = trial % V;
    Vector v(dim);
    Matrix U(t.num_internal(), dim);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = n(rng);
    for (Eigen::Index i = 0; i < U.size(); ++i) U.data()[i] = n(rng);
    Vector gv = Vector::Zero(dim);
    Matrix gu = Matrix::Zero(U.rows(), dim);
    hs_gradient(v, U, t.codes[target], t.points[target], gv, gu);
    auto loss = [&]() { return hs_loss(v, U, t.codes[target], t.points[target]); };
    Matrix nv(dim, 1), nu(U.rows(), dim);
    for (int i = 0; i < dim; ++i) nv(i, 0) = oracle::central_difference(loss, v[i]);
    for (Eigen::Index i = 0; i < U.size(); ++i) nu.data()[i] = oracle::central_difference(loss, U.data()[i]);
    sg = std::max({sg, oracle::relative_error(Matrix(gv), nv), oracle::relative_error(gu, nu)});
  }
  report("skipgram-gradient", sg < kGradTol, fmt("max relative error %.2e over 50 trees", sg));
}

void check_sticks() {
  Rng rng(kRoot + 7);
  std::gamma_distribution<double> g(1.5, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<BetaParams> sticks(1 + trial);
    for (auto& s : sticks) s = {g(rng) + 1e-3, g(rng) + 1e-3};
    const auto pi = stick_weights(sticks);
    double sum = 0.0;
    for (double p : pi) sum += p;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  report("stick-weights-sum", worst <= kStickTol, fmt("truncations 1..200, max |sum - 1| %.2e", worst));
}

// ---------------------------------------------------------------------------
// Synthetic end-to-end.

struct CvLog {
  std::vector<CvOutcome> outcomes;
  RepeatedResult summary;
};

CvLog repeated_svm(const std::vector<NgramCounts>& counts, const LabelData& labels, const FoldPlan& plan,
                   const BowConfig& bow) {
  CvLog log;
  log.summary = repeat_experiment(
      [&](std::uint64_t seed) {
        SvmExperiment exp{bow, SvmConfig{}};
        exp.svm.rng_seed = seed;
        log.outcomes.push_back(run_cv_svm(counts, labels, plan, exp));
        return log.outcomes.back();
      },
      kDefaultRepeats, derive_seed(kRoot, "svm-repeats"));
  return log;
}

CnnConfig reduced_cnn() {
  CnnConfig c;
  c.conv_units = 64;
  c.hidden_units = 64;
  c.max_epochs = 50;
  return c;
}

struct Encoded {
  UnitIndex index;
  std::vector<std::vector<int>> docs;     // raw unit ids
  std::vector<std::vector<int>> encoded;  // CNN indices
};

Encoded encode(const Corpus& corpus, const std::vector<UnitSequence>& seqs) {
  Encoded e;
  e.docs = document_unit_sequences(corpus, seqs);
  e.index = UnitIndex::build(e.docs);
  for (const auto& d : e.docs) e.encoded.push_back(e.index.encode(d));
  return e;
}

bool svm_protocol_ok(const CvLog& log, int k) {
  if (log.outcomes.size() != kDefaultRepeats || log.summary.values.size() != kDefaultRepeats) return false;
  for (const auto& h : log.summary.plan_hashes)
    if (h != log.summary.plan_hashes.front()) return false;
  for (const auto& o : log.outcomes) {
    if (static_cast<int>(o.folds.size()) != k) return false;
    std::set<int> tested;
    for (const auto& f : o.folds) {
      const auto& s = f.split;
      if (s.validation_fold || static_cast<int>(s.train_folds.size()) != k - 1 || !s.validation_docs.empty())
        return false;
      if (std::count(s.train_folds.begin(), s.train_folds.end(), s.test_fold)) return false;
      tested.insert(s.test_fold);
    }
    if (static_cast<int>(tested.size()) != k) return false;
  }
  return true;
}

bool cnn_protocol_ok(const CvLog& log, int k, int docs) {
  if (log.outcomes.size() != kDefaultRepeats || log.summary.values.size() != kDefaultRepeats) return false;
  for (const auto& h : log.summary.plan_hashes)
    if (h != log.summary.plan_hashes.front()) return false;
  for (const auto& o : log.outcomes) {
    if (static_cast<int>(o.folds.size()) != k) return false;
    for (const auto& f : o.folds) {
      const auto& s = f.split;
      if (!s.validation_fold || static_cast<int>(s.train_folds.size()) != k - 2) return false;
      if (*s.validation_fold == s.test_fold) return false;
      std::set<int> all(s.train_docs.begin(), s.train_docs.end());
      all.insert(s.validation_docs.begin(), s.validation_docs.end());
      all.insert(s.test_docs.begin(), s.test_docs.end());
      if (static_cast<int>(all.size()) != docs ||
          s.train_docs.size() + s.validation_docs.size() + s.test_docs.size() != static_cast<std::size_t>(docs))
        return false;
    }
  }
  return true;
}

struct AudRun {
  SyntheticCorpus data;
  PhoneLoopModel model;
  std::vector<UnitSequence> units;
};

// Returns end-to-end seconds spent.
double run_end_to_end(AudRun* aud) {
  const auto t_start = Clock::now();
  SyntheticSpec spec;
  spec.rng_seed = derive_seed(kRoot, "synth");
  aud->data = generate_synthetic_corpus(spec);
  const Corpus& corpus = aud->data.corpus;
  const LabelData labels = label_data(corpus);
  const FoldPlan plan =
      make_folds(document_ids(corpus), stratification_keys(corpus), 10, derive_seed(kRoot, "folds"));

  // Variational Bayes on 180 documents.
  AudConfig ac;
  ac.rng_seed = derive_seed(kRoot, "aud");
  aud->model = init_model(ac, compute_corpus_stats(corpus));
  const auto t_vb = Clock::now();
  const VbTrace trace = vb_train(aud->model, corpus, 10);
  const double vb_seconds = since(t_vb);
  bool monotone = trace.elbo.size() == 10;
  double worst_drop = 0.0;
  for (std::size_t i = 1; i < trace.elbo.size(); ++i) {
    const double drop = (trace.elbo[i - 1] - trace.elbo[i]) / std::abs(trace.elbo[i - 1]);
    worst_drop = std::max(worst_drop, drop);
    if (drop > kElboRelTol) monotone = false;
  }
  report("vb-elbo-monotone", monotone,
         fmt("%.0f docs, 10 iterations, worst relative drop %.2e", static_cast<double>(corpus.documents().size()),
             worst_drop));
  report("vb-runtime", vb_seconds < kVbSeconds, fmt("%.1f s (limit %.0f s)", vb_seconds, kVbSeconds));

  // Posterior rows on real features.
  {
    const PhoneLoopHmm hmm = unified_hmm(aud->model, HmmMode::kExpected);
    double worst = 0.0;
    for (std::size_t u = 0; u < corpus.utterances().size(); u += 9) {
      const Matrix e = emission_log_likelihoods(aud->model, corpus.utterances()[u].data, HmmMode::kExpected);
      const auto fb = forward_backward(hmm, e);
      worst = std::max(worst, (fb.state_posteriors.rowwise().sum().array() - 1.0).abs().maxCoeff());
    }
    const auto pi = stick_weights(aud->model.sticks);
    double sum = 0.0;
    for (double p : pi) sum += p;
    report("posterior-row-sums", worst <= kRowSumTol, fmt("trained model, max |row sum - 1| %.2e", worst));
    report("trained-stick-weights-sum", std::abs(sum - 1.0) <= kStickTol,
           fmt("T = %.0f, |sum - 1| %.2e", pi.size(), std::abs(sum - 1.0)));
  }

  aud->units = tokenize_corpus_aud(aud->model, corpus);
  const auto counts = document_ngram_counts(corpus, aud->units, 3);

  // Unit-norm TF-IDF vectors.
  {
    const auto f = BowFeaturizer::fit(counts, BowConfig{});
    double worst = 0.0;
    for (const auto& c : counts) {
      const auto v = f.transform(c);
      if (!v.values.empty()) worst = std::max(worst, std::abs(std::sqrt(squared_norm(v.values)) - 1.0));
    }
    report("l2-unit-norm", worst <= kNormTol, fmt("trigram TF-IDF, max |norm - 1| %.2e", worst));
  }

  const CvLog svm = repeated_svm(counts, labels, plan, BowConfig{});
  report("aud-svm-accuracy", svm.summary.mean >= kAudSvmMin,
         "10-fold x 5: " + svm.summary.format() + fmt(" (min %.2f)", kAudSvmMin));

  const Encoded enc = encode(corpus, aud->units);
  CvLog cnn;
  cnn.summary = repeat_experiment(
      [&](std::uint64_t seed) {
        CnnExperiment exp{reduced_cnn(), Matrix()};
        exp.cnn.rng_seed = seed;
        cnn.outcomes.push_back(run_cv_cnn(enc.encoded, enc.index.size(), labels, plan, exp));
        return cnn.outcomes.back();
      },
      kDefaultRepeats, derive_seed(kRoot, "cnn-repeats"));
  report("aud-cnn-accuracy", cnn.summary.mean >= kAudCnnMin,
         "10-fold x 5: " + cnn.summary.format() + fmt(" (min %.2f)", kAudCnnMin));

  const bool svm_ok = svm_protocol_ok(svm, 10);
  const bool cnn_ok = cnn_protocol_ok(cnn, 10, static_cast<int>(corpus.documents().size()));
  report("protocol-fidelity", svm_ok && cnn_ok,
         std::string("5 repeats on one plan; SVM 9/1 ") + (svm_ok ? "ok" : "violated") + ", CNN 8/1/1 " +
             (cnn_ok ? "ok" : "violated"));

  // Term discovery on a corpus with planted repeated terms.
  SyntheticSpec ts;
  ts.terms_per_topic = 2;
  ts.term_occurrences_per_doc = 3;
  ts.rng_seed = derive_seed(kRoot, "synth-terms");
  const SyntheticCorpus terms = generate_synthetic_corpus(ts);
  const UtdConfig uc;
  const auto matches = find_matches(terms.corpus, uc);
  const auto clusters = cluster_terms(matches, uc.graph_edge_threshold, false);
  int recovered = 0;
  for (const auto& p : terms.truth.planted) {
    const Span truth{p.start, p.end};
    double best = 0.0;
    for (const auto& c : clusters.clusters)
      for (const auto& node : c)
        if (node.utterance_id == p.utterance_id)
          best = std::max(best, span_overlap(truth, node.span) /
                                    static_cast<double>(std::max(truth.length(), node.span.length())));
    recovered += best >= kUtdOverlapMin;
  }
  const double recall = static_cast<double>(recovered) / terms.truth.planted.size();
  report("utd-term-recovery", recall >= kUtdRecallMin,
         fmt("%.0f / %.0f planted occurrences at >= 90%% overlap", recovered,
             static_cast<double>(terms.truth.planted.size())) +
             fmt(" (%.3f)", recall));

  const auto utd_counts = term_counts_to_ngrams(tokenize_documents_utd(clusters, terms.corpus));
  const LabelData utd_labels = label_data(terms.corpus);
  const FoldPlan utd_plan = make_folds(document_ids(terms.corpus), stratification_keys(terms.corpus), 10,
                                       derive_seed(kRoot, "utd-folds"));
  const CvLog utd_svm = repeated_svm(utd_counts, utd_labels, utd_plan, BowConfig{1, true, true});
  report("utd-svm-accuracy", utd_svm.summary.mean >= kUtdSvmMin,
         "10-fold x 5: " + utd_svm.summary.format() + fmt(" (min %.2f)", kUtdSvmMin));

  return since(t_start);
}

// ---------------------------------------------------------------------------
// Trends over seeds.

void check_pretraining_trend(const AudRun& aud) {
  const Corpus& corpus = aud.data.corpus;
  const LabelData labels = label_data(corpus);
  const Encoded enc = encode(corpus, aud.units);
  std::vector<double> pre, rnd;
  for (int s = 0; s < kTrendSeeds; ++s) {
    const std::uint64_t seed = derive_seed(kRoot, "trend-a-" + std::to_string(s));
    const FoldPlan plan = make_folds(document_ids(corpus), stratification_keys(corpus), 10, seed);
    CnnExperiment exp{reduced_cnn(), Matrix()};
    exp.cnn.max_epochs = 20;
    exp.cnn.rng_seed = derive_seed(seed, "cnn");
    rnd.push_back(run_cv_cnn(enc.encoded, enc.index.size(), labels, plan, exp).metric);
    EmbedConfig ec;
    ec.dim = exp.cnn.embed_dim;
    ec.rng_seed = derive_seed(seed, "embed");
    const EmbeddingTable table = train_skipgram(enc.docs, ec);
    exp.pretrained = export_for_cnn(table, enc.index.units, ec.dim, derive_seed(seed, "export"));
    pre.push_back(run_cv_cnn(enc.encoded, enc.index.size(), labels, plan, exp).metric);
  }
  report("trend-pretraining", median(pre) >= median(rnd),
         fmt("median accuracy pretrained %.3f vs random %.3f", median(pre), median(rnd)));
}

void check_concentration_trend(const Corpus& corpus) {
  std::vector<double> low, high;
  for (int s = 0; s < kTrendSeeds; ++s) {
    for (double gamma : {1.0, 10.0}) {
      AudConfig ac;
      ac.truncation = 100;
      ac.concentration = gamma;
      ac.rng_seed = derive_seed(kRoot, "trend-b-" + std::to_string(s));
      PhoneLoopModel m = init_model(ac, compute_corpus_stats(corpus));
      vb_train(m, corpus, 5);
      const double distinct = count_distinct_units(tokenize_corpus_aud(m, corpus));
      (gamma == 1.0 ? low : high).push_back(distinct);
    }
  }
  report("trend-concentration", median(high) >= median(low),
         fmt("median distinct units gamma=10 %.0f vs gamma=1 %.0f", median(high), median(low)));
}

void check_curve_trend(const AudRun& aud) {
  const Corpus& corpus = aud.data.corpus;
  const LabelData labels = label_data(corpus);
  const auto counts = document_ngram_counts(corpus, aud.units, 3);
  std::vector<double> first, last;
  for (int s = 0; s < kTrendSeeds; ++s) {
    const std::uint64_t seed = derive_seed(kRoot, "trend-c-" + std::to_string(s));
    const FoldPlan plan = make_folds(document_ids(corpus), stratification_keys(corpus), 10, seed);
    SvmExperiment exp;
    exp.svm.rng_seed = derive_seed(seed, "svm");
    const auto curve = learning_curve(plan, labels, svm_scorer(counts, labels, exp), default_in_domain(labels));
    first.push_back(curve.front().metric);
    last.push_back(curve.back().metric);
  }
  report("trend-learning-curve", median(last) >= median(first),
         fmt("median accuracy t=9 %.3f vs t=1 %.3f", median(last), median(first)));
}

// ---------------------------------------------------------------------------
// Command-line reproducibility.

const char* kCliSvmConfig = R"({
  "seed": 77,
  "synth": {"num_topics": 3, "docs_per_topic": 8, "units_per_utterance": 25, "terms_per_topic": 1,
            "term_occurrences_per_doc": 2},
  "aud": {"truncation": 20, "training_iterations": 3},
  "embed": {"dim": 8, "epochs": 2},
  "cnn": {"embed_dim": 8, "conv_units": 8, "hidden_units": 8, "max_epochs": 2},
  "svm": {"epochs": 5}
})";

const char* kCliCnnConfig = R"({
  "seed": 78,
  "synth": {"num_topics": 2, "docs_per_topic": 8, "units_per_utterance": 20},
  "aud": {"truncation": 15, "training_iterations": 2},
  "embed": {"dim": 8, "epochs": 2},
  "cnn": {"embed_dim": 8, "conv_units": 8, "hidden_units": 8, "max_epochs": 2, "dropout": 0.3},
  "eval": {"classifier": "cnn", "pretrained": true}
})";

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream is(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    files[fs::relative(e.path(), root).string()] = ss.str();
  }
  return files;
}

bool run_cli(const std::vector<std::string>& stages, const fs::path& config, const fs::path& out, int workers) {
  for (const auto& st : stages) {
    const std::string cmd = std::string("\"") + ZRTOPIC_CLI + "\" " + st + " --config " + config.string() +
                            " --out " + out.string() + " --workers " + std::to_string(workers) + " 2>/dev/null";
    if (std::system(cmd.c_str()) != 0) {
      std::printf("      stage %s failed in %s\n", st.c_str(), out.string().c_str());
      return false;
    }
  }
  return true;
}

void check_cli_reproducibility() {
  const fs::path base = fs::temp_directory_path() / "zrtopic_acceptance_cli";
  fs::remove_all(base);
  fs::create_directories(base);
  const fs::path svm_cfg = base / "svm.json", cnn_cfg = base / "cnn.json";
  std::ofstream(svm_cfg) << kCliSvmConfig;
  std::ofstream(cnn_cfg) << kCliCnnConfig;
  const std::vector<std::string> svm_stages = {"synth",     "utd",      "aud-train", "aud-decode", "featurize",
                                               "embed",     "train-svm", "train-cnn", "evaluate",   "curve"};
  const std::vector<std::string> cnn_stages = {"synth", "aud-train", "evaluate"};

  bool ran = true;
  for (const char* run : {"a", "b"}) {
    ran = ran && run_cli(svm_stages, svm_cfg, base / "svm" / run, 1);
    ran = ran && run_cli(cnn_stages, cnn_cfg, base / "cnn" / run, 1);
  }
  ran = ran && run_cli(svm_stages, svm_cfg, base / "svm" / "w3", 3);
  ran = ran && run_cli(cnn_stages, cnn_cfg, base / "cnn" / "w3", 3);
  if (!ran) {
    report("cli-byte-identical-rerun", false, "a stage exited non-zero");
    report("cli-workers-match", false, "a stage exited non-zero");
    report("cli-protocol", false, "a stage exited non-zero");
    return;
  }
  const auto sa = tree(base / "svm" / "a"), sb = tree(base / "svm" / "b"), s3 = tree(base / "svm" / "w3");
  const auto ca = tree(base / "cnn" / "a"), cb = tree(base / "cnn" / "b"), c3 = tree(base / "cnn" / "w3");
  report("cli-byte-identical-rerun", sa == sb && ca == cb,
         fmt("%.0f + %.0f files compared across two runs", sa.size(), ca.size()));
  report("cli-workers-match", sa == s3 && ca == c3, "workers=3 output equals workers=1 output");

  bool ok = true;
  for (const auto* files : {&sa, &ca}) {
    const auto s = nlohmann::json::parse(files->at("results/summary.json"));
    ok = ok && s.at("repeats") == kDefaultRepeats && s.at("folds") == 10 && s.at("values").size() == 5;
    std::istringstream csv(files->at("results/results.csv"));
    std::string line;
    std::map<std::string, int> folds_per_repeat;
    std::getline(csv, line);
    while (std::getline(csv, line)) {
      const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
      if (line.substr(c2 + 1, 3) != "all") ++folds_per_repeat[line.substr(c1 + 1, c2 - c1 - 1)];
    }
    ok = ok && folds_per_repeat.size() == 5;
    for (const auto& [r, n] : folds_per_repeat) ok = ok && n == 10;
  }
  report("cli-protocol", ok, "summary and results record 5 repeats x 10 folds");
  fs::remove_all(base);
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  check_dtw_oracle();
  check_hmm_oracles();
  check_ap_oracle();
  check_huffman_oracle();
  check_components_oracle();
  check_gradients();
  check_sticks();

  AudRun aud;
  const double e2e = run_end_to_end(&aud);
  report("end-to-end-runtime", e2e < kEndToEndSeconds, fmt("%.1f s (limit %.0f s)", e2e, kEndToEndSeconds));

  check_pretraining_trend(aud);
  check_concentration_trend(aud.data.corpus);
  check_curve_trend(aud);
  check_cli_reproducibility();

  std::printf("%s  %d failed, %.1f s total\n", g_failures ? "FAILED" : "ALL PASSED", g_failures, since(t0));
  return g_failures ? 1 : 0;
}
