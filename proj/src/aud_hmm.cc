// zrtopic/aud_hmm.cc

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
#include <limits>
#include <numbers>

#include <boost/math/special_functions/digamma.hpp>

#include "aud_internal.h"

namespace zrtopic {

namespace aud_detail {

GaussianTable gaussian_table(const PhoneLoopModel& model, HmmMode mode) {
  const int D = model.dim;
  const int M = model.config.gaussians_per_state;
  const int G = static_cast<int>(model.states.size()) * M;
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  GaussianTable t{Matrix(2 * D, G), Vector(G)};
  for (std::size_t i = 0; i < model.states.size(); ++i) {
    const auto& st = model.states[i];
    double wsum = 0.0;
    for (double w : st.weight_counts) wsum += w;
    const double dig_wsum = boost::math::digamma(wsum);
    for (int m = 0; m < M; ++m) {
      const int g = static_cast<int>(i) * M + m;
      const auto& gp = st.gaussians[m];
      double off = 0.0, extra = 0.0, log_shape = 0.0;
      if (mode == HmmMode::kExpected) {
        off = std::log(st.weight_counts[m] / wsum);
        log_shape = std::log(gp.shape);
      } else {
        off = boost::math::digamma(st.weight_counts[m]) - dig_wsum;
        log_shape = boost::math::digamma(gp.shape);
        extra = 1.0 / gp.kappa;
      }
      for (int d = 0; d < D; ++d) {
        const double prec = gp.shape / gp.rate[d];
        t.coef(d, g) = -0.5 * prec;
        t.coef(D + d, g) = prec * gp.mean[d];
        off += 0.5 * (log_shape - std::log(gp.rate[d]) - log_2pi - prec * gp.mean[d] * gp.mean[d] - extra);
      }
      t.offset[g] = off;
    }
  }
  return t;
}

Matrix component_log_likelihoods(const GaussianTable& table, const Matrix& frames) {
  const Eigen::Index D = frames.cols();
  if (table.coef.rows() != 2 * D) throw Error("dimension mismatch: features vs AUD model");
  Matrix aug(frames.rows(), 2 * D);
  aug.leftCols(D) = frames.array().square().matrix();
  aug.rightCols(D) = frames;
  Matrix out = aug * table.coef;
  out.rowwise() += table.offset.transpose();
  return out;
}

Matrix state_log_likelihoods(const Matrix& components, int per_state) {
  const Eigen::Index n = components.cols() / per_state;
  Matrix out(components.rows(), n);
  for (Eigen::Index t = 0; t < components.rows(); ++t) {
    for (Eigen::Index s = 0; s < n; ++s) {
      const auto seg = components.row(t).segment(s * per_state, per_state);
      const double mx = seg.maxCoeff();
      out(t, s) = std::isfinite(mx) ? mx + std::log((seg.array() - mx).exp().sum()) : mx;
    }
  }
  return out;
}

}  // namespace aud_detail

Matrix emission_log_likelihoods(const PhoneLoopModel& model, const Matrix& frames, HmmMode mode) {
  using namespace aud_detail;
  return state_log_likelihoods(component_log_likelihoods(gaussian_table(model, mode), frames),
                               model.config.gaussians_per_state);
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_shapes(const PhoneLoopHmm& hmm, const Matrix& le) {
  if (le.cols() != hmm.num_states()) throw Error("emission matrix does not match HMM state count");
  if (le.rows() < 1) throw Error("empty utterance");
}

ForwardBackwardResult empty_result(const PhoneLoopHmm& hmm, Eigen::Index frames) {
  ForwardBackwardResult r;
  r.state_posteriors = Matrix::Zero(frames, hmm.num_states());
  r.stay_counts.assign(hmm.num_states(), 0.0);
  r.next_counts.assign(hmm.num_states(), 0.0);
  r.entry_counts.assign(hmm.num_units, 0.0);
  return r;
}

double log_sum(const double* v, int n) {
  double mx = kNegInf;
  for (int i = 0; i < n; ++i) mx = std::max(mx, v[i]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

}  // namespace

ForwardBackwardResult forward_backward_log(const PhoneLoopHmm& hmm, const Matrix& le) {
  check_shapes(hmm, le);
  const int U = hmm.num_units, S = hmm.states_per_unit, n = hmm.num_states();
  const Eigen::Index T = le.rows();
  Matrix la = Matrix::Constant(T, n, kNegInf);
  Matrix lb = Matrix::Zero(T, n);
  std::vector<double> lexit(T, kNegInf), buf(std::max(U, n));

  for (int u = 0; u < U; ++u) la(0, u * S) = hmm.log_entry[u] + le(0, u * S);
  auto exit_mass = [&](Eigen::Index t) {
    for (int u = 0; u < U; ++u) buf[u] = la(t, u * S + S - 1) + hmm.log_next[u * S + S - 1];
    return log_sum(buf.data(), U);
  };
  lexit[0] = exit_mass(0);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (int u = 0; u < U; ++u) {
      for (int s = 0; s < S; ++s) {
        const int i = u * S + s;
        const double from = s > 0 ? la(t - 1, i - 1) + hmm.log_next[i - 1] : hmm.log_entry[u] + lexit[t - 1];
        la(t, i) = log_add(la(t - 1, i) + hmm.log_stay[i], from) + le(t, i);
      }
    }
    lexit[t] = exit_mass(t);
  }
  const double log_z = log_sum(la.row(T - 1).data(), n);
  if (!std::isfinite(log_z)) throw Error("non-finite likelihood");

  std::vector<double> lreenter(T, kNegInf);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    for (int v = 0; v < U; ++v) buf[v] = hmm.log_entry[v] + le(t + 1, v * S) + lb(t + 1, v * S);
    lreenter[t + 1] = log_sum(buf.data(), U);
    for (int u = 0; u < U; ++u) {
      for (int s = 0; s < S; ++s) {
        const int i = u * S + s;
        const double fwd = s + 1 < S ? le(t + 1, i + 1) + lb(t + 1, i + 1) : lreenter[t + 1];
        lb(t, i) = log_add(hmm.log_stay[i] + le(t + 1, i) + lb(t + 1, i), hmm.log_next[i] + fwd);
      }
    }
  }

  ForwardBackwardResult r = empty_result(hmm, T);
  r.log_evidence = log_z;
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int i = 0; i < n; ++i) r.state_posteriors(t, i) = std::exp(la(t, i) + lb(t, i) - log_z);
    const double sum = r.state_posteriors.row(t).sum();
    if (sum > 0.0) r.state_posteriors.row(t) /= sum;
  }
  for (int u = 0; u < U; ++u) r.entry_counts[u] = r.state_posteriors(0, u * S);
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    for (int u = 0; u < U; ++u) {
      for (int s = 0; s < S; ++s) {
        const int i = u * S + s;
        r.stay_counts[i] += std::exp(la(t, i) + hmm.log_stay[i] + le(t + 1, i) + lb(t + 1, i) - log_z);
        const double fwd = s + 1 < S ? le(t + 1, i + 1) + lb(t + 1, i + 1) : lreenter[t + 1];
        r.next_counts[i] += std::exp(la(t, i) + hmm.log_next[i] + fwd - log_z);
      }
      r.entry_counts[u] += std::exp(lexit[t] + hmm.log_entry[u] + le(t + 1, u * S) + lb(t + 1, u * S) - log_z);
    }
  }
  return r;
}

ForwardBackwardResult forward_backward(const PhoneLoopHmm& hmm, const Matrix& le) {
  check_shapes(hmm, le);
  const int U = hmm.num_units, S = hmm.states_per_unit, n = hmm.num_states();
  const Eigen::Index T = le.rows();

  // Emissions scaled by their per-frame maximum.
  Vector shift(T);
  Matrix e(T, n);
  for (Eigen::Index t = 0; t < T; ++t) {
    shift[t] = le.row(t).maxCoeff();
    if (!std::isfinite(shift[t])) throw Error("non-finite likelihood");
    e.row(t) = (le.row(t).array() - shift[t]).exp();
  }
  std::vector<double> stay(n), next(n), entry(U);
  for (int i = 0; i < n; ++i) {
    stay[i] = std::exp(hmm.log_stay[i]);
    next[i] = std::exp(hmm.log_next[i]);
  }
  for (int u = 0; u < U; ++u) entry[u] = std::exp(hmm.log_entry[u]);

  Matrix a = Matrix::Zero(T, n);
  std::vector<double> c(T), exit(T);
  auto finish_frame = [&](Eigen::Index t) {
    c[t] = a.row(t).sum();
    if (!(c[t] > 0.0) || !std::isfinite(c[t])) return false;
    a.row(t) /= c[t];
    double x = 0.0;
    for (int u = 0; u < U; ++u) x += a(t, u * S + S - 1) * next[u * S + S - 1];
    exit[t] = x;
    return true;
  };
  for (int u = 0; u < U; ++u) a(0, u * S) = entry[u] * e(0, u * S);
  if (!finish_frame(0)) return forward_backward_log(hmm, le);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (int u = 0; u < U; ++u) {
      for (int s = 0; s < S; ++s) {
        const int i = u * S + s;
        const double from = s > 0 ? a(t - 1, i - 1) * next[i - 1] : entry[u] * exit[t - 1];
        a(t, i) = e(t, i) * (a(t - 1, i) * stay[i] + from);
      }
    }
    if (!finish_frame(t)) return forward_backward_log(hmm, le);
  }

  Matrix b = Matrix::Ones(T, n);
  std::vector<double> reenter(T, 0.0);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    double r = 0.0;
    for (int v = 0; v < U; ++v) r += entry[v] * e(t + 1, v * S) * b(t + 1, v * S);
    reenter[t + 1] = r;
    const double inv = 1.0 / c[t + 1];
    for (int i = 0; i < n; ++i) {
      const bool last = (i % S) == S - 1;
      const double fwd = last ? r : e(t + 1, i + 1) * b(t + 1, i + 1);
      b(t, i) = (stay[i] * e(t + 1, i) * b(t + 1, i) + next[i] * fwd) * inv;
    }
  }

  ForwardBackwardResult res = empty_result(hmm, T);
  double log_z = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) log_z += std::log(c[t]) + shift[t];
  res.log_evidence = log_z;
  res.state_posteriors = a.cwiseProduct(b);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double sum = res.state_posteriors.row(t).sum();
    if (!(sum > 0.0) || !std::isfinite(sum)) return forward_backward_log(hmm, le);
    res.state_posteriors.row(t) /= sum;
  }
  for (int u = 0; u < U; ++u) res.entry_counts[u] = res.state_posteriors(0, u * S);
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    const double inv = 1.0 / c[t + 1];
    for (int i = 0; i < n; ++i) {
      const double at = a(t, i) * inv;
      if (at == 0.0) continue;
      const bool last = (i % S) == S - 1;
      res.stay_counts[i] += at * stay[i] * e(t + 1, i) * b(t + 1, i);
      res.next_counts[i] += at * next[i] * (last ? reenter[t + 1] : e(t + 1, i + 1) * b(t + 1, i + 1));
    }
    const double x = exit[t] * inv;
    for (int v = 0; v < U; ++v) res.entry_counts[v] += x * entry[v] * e(t + 1, v * S) * b(t + 1, v * S);
  }
  return res;
}

ViterbiPath viterbi_path(const PhoneLoopHmm& hmm, const Matrix& le) {
  check_shapes(hmm, le);
  const int U = hmm.num_units, S = hmm.states_per_unit, n = hmm.num_states();
  const Eigen::Index T = le.rows();
  Matrix d = Matrix::Constant(T, n, kNegInf);
  // Backpointer: previous state; entered[t,i] marks a loop re-entry.
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> back(T, n);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> entered(T, n);
  back.setConstant(-1);
  entered.setConstant(false);
  for (int u = 0; u < U; ++u) {
    d(0, u * S) = hmm.log_entry[u] + le(0, u * S);
    entered(0, u * S) = true;
  }
  for (Eigen::Index t = 1; t < T; ++t) {
    double best_exit = kNegInf;
    int best_exit_state = -1;
    for (int u = 0; u < U; ++u) {
      const int i = u * S + S - 1;
      const double v = d(t - 1, i) + hmm.log_next[i];
      if (best_exit_state < 0 || v > best_exit) {
        best_exit = v;
        best_exit_state = i;
      }
    }
    for (int u = 0; u < U; ++u) {
      for (int s = 0; s < S; ++s) {
        const int i = u * S + s;
        const double stay = d(t - 1, i) + hmm.log_stay[i];
        const double from = s > 0 ? d(t - 1, i - 1) + hmm.log_next[i - 1] : hmm.log_entry[u] + best_exit;
        if (stay >= from) {
          d(t, i) = stay + le(t, i);
          back(t, i) = i;
        } else {
          d(t, i) = from + le(t, i);
          back(t, i) = s > 0 ? i - 1 : best_exit_state;
          entered(t, i) = s == 0;
        }
      }
    }
  }
  ViterbiPath path;
  Eigen::Index best = 0;
  path.log_score = d.row(T - 1).maxCoeff(&best);
  path.states.resize(T);
  path.unit_start.resize(T);
  int cur = static_cast<int>(best);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    path.states[t] = cur;
    path.unit_start[t] = entered(t, cur);
    if (t > 0) cur = back(t, cur);
  }
  return path;
}

namespace {

UnitSequence segments_from_path(const std::string& id, const ViterbiPath& path, int S) {
  UnitSequence seq;
  seq.utterance_id = id;
  for (std::size_t t = 0; t < path.states.size(); ++t) {
    const int unit = path.states[t] / S;
    const int frame = static_cast<int>(t);
    // Consecutive occurrences of the same unit collapse into one segment.
    if (!seq.units.empty() && seq.units.back().unit == unit) {
      seq.units.back().end = frame;
    } else {
      seq.units.push_back({unit, frame, frame});
    }
  }
  return seq;
}

}  // namespace

UnitSequence viterbi_decode(const PhoneLoopModel& model, const FeatureMatrix& utterance) {
  if (utterance.dim() != model.dim) throw Error("dimension mismatch: features vs AUD model");
  const auto hmm = unified_hmm(model, HmmMode::kExpected);
  const auto le = emission_log_likelihoods(model, utterance.data, HmmMode::kExpected);
  return segments_from_path(utterance.utterance_id, viterbi_path(hmm, le), model.states_per_unit());
}

std::vector<UnitSequence> tokenize_corpus_aud(const PhoneLoopModel& model, const Corpus& corpus, int workers) {
  if (!corpus.utterances().empty() && corpus.dim() != model.dim)
    throw Error("dimension mismatch: features vs AUD model");
  const auto hmm = unified_hmm(model, HmmMode::kExpected);
  const auto table = aud_detail::gaussian_table(model, HmmMode::kExpected);
  const auto& utts = corpus.utterances();
  std::vector<UnitSequence> out(utts.size());
  parallel_for(utts.size(), workers, [&](std::size_t k) {
    const auto le = aud_detail::state_log_likelihoods(aud_detail::component_log_likelihoods(table, utts[k].data),
                                                      model.config.gaussians_per_state);
    out[k] = segments_from_path(utts[k].utterance_id, viterbi_path(hmm, le), model.states_per_unit());
  });
  return out;
}

}  // namespace zrtopic
