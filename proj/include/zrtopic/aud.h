// zrtopic/aud.h

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

// Acoustic unit discovery with a truncated Dirichlet-process phone loop.
//
// Every unit is a left-to-right HMM whose states emit diagonal-covariance
// GMMs. Units are mixed with stick-breaking weights and the whole loop is
// handled as one HMM: entering unit u costs pi_u, leaving the last state of
// any unit re-enters the loop. Training is mean-field variational Bayes with
// conjugate posteriors:
//   sticks          v_u ~ Beta(a_u, b_u), prior Beta(1, gamma), v_T = 1
//   transitions     per state Dirichlet over {stay, next}
//   mixture weights per state Dirichlet over its Gaussians
//   Gaussians       per dimension Normal-Gamma(mean, kappa, shape, rate)

#ifndef ZRTOPIC_AUD_H_
#define ZRTOPIC_AUD_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "zrtopic/common.h"
#include "zrtopic/corpus.h"

namespace zrtopic {

struct AudConfig {
  int truncation = 200;
  int states_per_unit = 3;
  int gaussians_per_state = 2;
  double concentration = 1.0;  // gamma
  int training_iterations = 10;
  std::uint64_t rng_seed = 0;

  void validate() const;
  int num_states() const { return truncation * states_per_unit; }
};

struct BetaParams {
  double a = 1.0;
  double b = 1.0;
};

struct GaussianPosterior {
  Vector mean;
  double kappa = 1.0;
  double shape = 1.0;
  Vector rate;
};

struct StatePosterior {
  std::vector<double> weight_counts;        // Dirichlet over Gaussians
  double stay = 1.0;                        // Dirichlet over {stay, next}
  double next = 1.0;
  std::vector<GaussianPosterior> gaussians;
};

struct AudPrior {
  Vector mean;
  Vector variance;
  double kappa = 1.0;
  double shape = 1.0;
  Vector rate;
  double dirichlet = 1.0;
  double variance_floor_ratio = 1e-3;
};

struct PhoneLoopModel {
  AudConfig config;
  int dim = 0;
  AudPrior prior;
  std::vector<StatePosterior> states;  // unit-major: unit * S + state
  std::vector<BetaParams> sticks;      // one per unit; the last is closed at v = 1

  int num_units() const { return config.truncation; }
  int states_per_unit() const { return config.states_per_unit; }
  const StatePosterior& state(int unit, int s) const { return states[unit * config.states_per_unit + s]; }
};

struct CorpusStats {
  Vector mean;
  Vector variance;
  long frames = 0;
};

CorpusStats compute_corpus_stats(const Corpus& corpus);

/// Means start at the global mean plus seeded N(0, global std) perturbations;
/// all other posteriors start at the prior.
PhoneLoopModel init_model(const AudConfig& config, const CorpusStats& stats);

/// Expected mixture weights: pi_u = E[v_u] prod_{j<u}(1 - E[v_j]); the last
/// unit takes the remaining mass.
std::vector<double> stick_weights(const std::vector<BetaParams>& sticks);
/// E[log pi_u] under the Beta posteriors with the same closure.
std::vector<double> expected_log_stick_weights(const std::vector<BetaParams>& sticks);

enum class HmmMode {
  kExpected,     // posterior-mean parameters (normalized probabilities)
  kExpectedLog,  // exp(E[log theta]) parameters used by the VB E-step
};

/// The phone loop as one HMM over truncation * states_per_unit states. All
/// quantities are natural logs.
struct PhoneLoopHmm {
  int num_units = 0;
  int states_per_unit = 0;
  std::vector<double> log_entry;  // per unit
  std::vector<double> log_stay;   // per state
  std::vector<double> log_next;   // per state; for a last state this is exit

  int num_states() const { return num_units * states_per_unit; }
  /// Dense transition probabilities (not logs), num_states x num_states.
  Matrix dense_transitions() const;
  /// Initial state probabilities (not logs).
  Vector initial_probabilities() const;
};

PhoneLoopHmm unified_hmm(const PhoneLoopModel& model, HmmMode mode = HmmMode::kExpected);

/// Per-frame, per-state emission log-likelihoods (frames x states).
Matrix emission_log_likelihoods(const PhoneLoopModel& model, const Matrix& frames, HmmMode mode);

struct ForwardBackwardResult {
  Matrix state_posteriors;         // frames x states
  std::vector<double> stay_counts;  // expected stay transitions per state
  std::vector<double> next_counts;  // expected next/exit transitions per state
  std::vector<double> entry_counts; // expected unit entries (incl. frame 0)
  double log_evidence = 0.0;
};

/// Scaled forward-backward over the phone loop topology; falls back to a
/// log-domain pass when the scaled recursion underflows.
ForwardBackwardResult forward_backward(const PhoneLoopHmm& hmm, const Matrix& log_emissions);
/// Log-domain reference implementation of the same recursion.
ForwardBackwardResult forward_backward_log(const PhoneLoopHmm& hmm, const Matrix& log_emissions);

/// Most probable arc path; returns per-frame states plus, per frame, whether
/// that frame starts a new unit occurrence.
struct ViterbiPath {
  std::vector<int> states;
  std::vector<bool> unit_start;
  double log_score = 0.0;
};
ViterbiPath viterbi_path(const PhoneLoopHmm& hmm, const Matrix& log_emissions);

struct UnitSegment {
  int unit = 0;
  int start = 0;  // inclusive
  int end = 0;    // inclusive
  friend bool operator==(const UnitSegment&, const UnitSegment&) = default;
};

struct UnitSequence {
  std::string utterance_id;
  std::vector<UnitSegment> units;

  std::vector<int> unit_ids() const;
};

UnitSequence viterbi_decode(const PhoneLoopModel& model, const FeatureMatrix& utterance);
std::vector<UnitSequence> tokenize_corpus_aud(const PhoneLoopModel& model, const Corpus& corpus, int workers = 1);

/// Sum of KL(q || prior) over every posterior factor of the model.
double model_kl_divergence(const PhoneLoopModel& model);

struct VbTrace {
  std::vector<double> elbo;  // one value per iteration, evaluated at its E-step
};

/// Synchronous VB: per iteration one E-step over the whole corpus followed by
/// one M-step over every conjugate posterior.
VbTrace vb_train(PhoneLoopModel& model, const Corpus& corpus, int iterations, int workers = 1);

/// Number of distinct units in a set of tokenizations.
int count_distinct_units(const std::vector<UnitSequence>& sequences);

// Binary model file ("AUD1") and JSON-lines unit sequences.
void write_model(std::ostream& os, const PhoneLoopModel& model);
PhoneLoopModel read_model(std::istream& is);
void write_unit_sequences(std::ostream& os, const std::vector<UnitSequence>& sequences);
std::vector<UnitSequence> read_unit_sequences(std::istream& is);

}  // namespace zrtopic

#endif  // ZRTOPIC_AUD_H_
