// zrtopic/aud_train.cc

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

#include <cmath>

#include "aud_internal.h"

namespace zrtopic {

namespace {

// Utterances are accumulated in fixed-size chunks which are then summed in
// chunk order, so the totals do not depend on the worker count.
constexpr std::size_t kChunk = 8;

struct SufficientStats {
  Vector occupancy;  // per Gaussian
  Matrix first;      // Gaussians x dim
  Matrix second;     // Gaussians x dim
  std::vector<double> stay, next, entry;
  double log_evidence = 0.0;

  SufficientStats(int gaussians, int dim, int states, int units)
      : occupancy(Vector::Zero(gaussians)),
        first(Matrix::Zero(gaussians, dim)),
        second(Matrix::Zero(gaussians, dim)),
        stay(states, 0.0),
        next(states, 0.0),
        entry(units, 0.0) {}

  void add(const SufficientStats& o) {
    occupancy += o.occupancy;
    first += o.first;
    second += o.second;
    for (std::size_t i = 0; i < stay.size(); ++i) {
      stay[i] += o.stay[i];
      next[i] += o.next[i];
    }
    for (std::size_t u = 0; u < entry.size(); ++u) entry[u] += o.entry[u];
    log_evidence += o.log_evidence;
  }
};

void accumulate(const PhoneLoopModel& model, const PhoneLoopHmm& hmm, const aud_detail::GaussianTable& table,
                const Matrix& frames, SufficientStats& st) {
  const int M = model.config.gaussians_per_state;
  const Matrix comp = aud_detail::component_log_likelihoods(table, frames);
  const Matrix state = aud_detail::state_log_likelihoods(comp, M);
  const auto fb = forward_backward(hmm, state);

  Matrix resp(comp.rows(), comp.cols());
  for (Eigen::Index t = 0; t < comp.rows(); ++t) {
    for (Eigen::Index g = 0; g < comp.cols(); ++g) {
      const Eigen::Index s = g / M;
      const double occ = fb.state_posteriors(t, s);
      resp(t, g) = occ > 0.0 ? occ * std::exp(comp(t, g) - state(t, s)) : 0.0;
    }
  }
  st.occupancy += resp.colwise().sum().transpose();
  st.first.noalias() += resp.transpose() * frames;
  st.second.noalias() += resp.transpose() * frames.array().square().matrix();
  for (std::size_t i = 0; i < st.stay.size(); ++i) {
    st.stay[i] += fb.stay_counts[i];
    st.next[i] += fb.next_counts[i];
  }
  for (std::size_t u = 0; u < st.entry.size(); ++u) st.entry[u] += fb.entry_counts[u];
  st.log_evidence += fb.log_evidence;
}

void m_step(PhoneLoopModel& model, const SufficientStats& st) {
  const AudPrior& p = model.prior;
  const int M = model.config.gaussians_per_state;
  for (std::size_t i = 0; i < model.states.size(); ++i) {
    auto& s = model.states[i];
    s.stay = p.dirichlet + st.stay[i];
    s.next = p.dirichlet + st.next[i];
    for (int m = 0; m < M; ++m) {
      const int g = static_cast<int>(i) * M + m;
      const double n = st.occupancy[g];
      s.weight_counts[m] = p.dirichlet + n;
      auto& gp = s.gaussians[m];
      gp.kappa = p.kappa + n;
      gp.shape = p.shape + 0.5 * n;
      for (int d = 0; d < model.dim; ++d) {
        const double mean = (p.kappa * p.mean[d] + st.first(g, d)) / gp.kappa;
        double rate = p.rate[d] + 0.5 * (st.second(g, d) + p.kappa * p.mean[d] * p.mean[d] - gp.kappa * mean * mean);
        rate = std::max(rate, p.variance_floor_ratio * p.variance[d] * gp.shape);
        gp.mean[d] = mean;
        gp.rate[d] = rate;
      }
    }
  }
  const int T = model.num_units();
  double tail = 0.0;
  for (int u = T - 1; u >= 0; --u) {
    if (u + 1 < T) {
      model.sticks[u].a = 1.0 + st.entry[u];
      model.sticks[u].b = model.config.concentration + tail;
    }
    tail += st.entry[u];
  }
}

}  // namespace

VbTrace vb_train(PhoneLoopModel& model, const Corpus& corpus, int iterations, int workers) {
  VbTrace trace;
  if (iterations <= 0) return trace;
  const auto& utts = corpus.utterances();
  if (utts.empty()) throw Error("empty corpus");
  if (corpus.dim() != model.dim) throw Error("dimension mismatch: features vs AUD model");
  const int G = static_cast<int>(model.states.size()) * model.config.gaussians_per_state;
  const int n = static_cast<int>(model.states.size());
  const std::size_t num_chunks = (utts.size() + kChunk - 1) / kChunk;

  for (int it = 0; it < iterations; ++it) {
    const auto hmm = unified_hmm(model, HmmMode::kExpectedLog);
    const auto table = aud_detail::gaussian_table(model, HmmMode::kExpectedLog);
    std::vector<SufficientStats> chunks(num_chunks, SufficientStats(G, model.dim, n, model.num_units()));
    parallel_for(num_chunks, workers, [&](std::size_t c) {
      const std::size_t end = std::min(utts.size(), (c + 1) * kChunk);
      for (std::size_t k = c * kChunk; k < end; ++k) accumulate(model, hmm, table, utts[k].data, chunks[c]);
    });
    SufficientStats total(G, model.dim, n, model.num_units());
    for (const auto& c : chunks) total.add(c);
    const double elbo = total.log_evidence - model_kl_divergence(model);
    if (!std::isfinite(elbo)) throw Error("non-finite likelihood");
    trace.elbo.push_back(elbo);
    m_step(model, total);
  }
  return trace;
}

}  // namespace zrtopic
