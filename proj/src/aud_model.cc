// zrtopic/aud_model.cc

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
#include <istream>
#include <ostream>
#include <set>

#include <boost/math/special_functions/digamma.hpp>

#include "json.hpp"
#include "zrtopic/aud.h"
#include "zrtopic/binary_io.h"

namespace zrtopic {

namespace {

double digamma(double x) { return boost::math::digamma(x); }

double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

double kl_beta(double a, double b, double a0, double b0) {
  return log_beta_fn(a0, b0) - log_beta_fn(a, b) + (a - a0) * digamma(a) + (b - b0) * digamma(b) +
         (a0 - a + b0 - b) * digamma(a + b);
}

double kl_dirichlet(const std::vector<double>& alpha, double alpha0) {
  double sum = 0.0;
  for (double a : alpha) sum += a;
  const double sum0 = alpha0 * alpha.size();
  double kl = std::lgamma(sum) - std::lgamma(sum0);
  const double dsum = digamma(sum);
  for (double a : alpha) kl += std::lgamma(alpha0) - std::lgamma(a) + (a - alpha0) * (digamma(a) - dsum);
  return kl;
}

double kl_gamma(double a, double b, double a0, double b0) {
  return (a - a0) * digamma(a) - std::lgamma(a) + std::lgamma(a0) + a0 * (std::log(b) - std::log(b0)) +
         a * (b0 - b) / b;
}

// KL between Normal-Gamma posteriors for one dimension.
double kl_normal_gamma(double m, double kappa, double a, double b, double m0, double kappa0, double a0,
                       double b0) {
  const double d = m - m0;
  return kl_gamma(a, b, a0, b0) + 0.5 * (kappa0 / kappa + kappa0 * (a / b) * d * d - 1.0 + std::log(kappa / kappa0));
}

}  // namespace

void AudConfig::validate() const {
  if (truncation < 1) throw Error("aud config: truncation must be >= 1");
  if (states_per_unit < 1 || gaussians_per_state < 1) throw Error("aud config: counts must be >= 1");
  if (!(concentration > 0.0)) throw Error("aud config: concentration must be positive");
  if (training_iterations < 0) throw Error("aud config: iterations must be >= 0");
}

CorpusStats compute_corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  if (corpus.utterances().empty()) throw Error("empty corpus");
  const int dim = corpus.dim();
  Vector sum = Vector::Zero(dim);
  for (const auto& u : corpus.utterances()) {
    sum += u.data.colwise().sum().transpose();
    st.frames += u.num_frames();
  }
  if (st.frames == 0) throw Error("empty corpus");
  st.mean = sum / static_cast<double>(st.frames);
  Vector sq = Vector::Zero(dim);
  for (const auto& u : corpus.utterances())
    sq += (u.data.rowwise() - st.mean.transpose()).array().square().matrix().colwise().sum().transpose();
  st.variance = sq / static_cast<double>(st.frames);
  return st;
}

PhoneLoopModel init_model(const AudConfig& config, const CorpusStats& stats) {
  config.validate();
  if (stats.frames <= 0 || stats.mean.size() == 0) throw Error("empty corpus");
  for (Eigen::Index d = 0; d < stats.variance.size(); ++d)
    if (!(stats.variance[d] > 0.0) || !std::isfinite(stats.variance[d])) throw Error("degenerate variance");

  PhoneLoopModel model;
  model.config = config;
  model.dim = static_cast<int>(stats.mean.size());
  AudPrior& p = model.prior;
  p.mean = stats.mean;
  p.variance = stats.variance;
  p.kappa = 1.0;
  p.shape = 1.0;
  p.rate = stats.variance * p.shape;
  p.dirichlet = 1.0;

  Rng rng(config.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Vector stddev = stats.variance.array().sqrt();
  model.states.resize(config.num_states());
  for (auto& s : model.states) {
    s.weight_counts.assign(config.gaussians_per_state, p.dirichlet);
    s.stay = p.dirichlet;
    s.next = p.dirichlet;
    s.gaussians.resize(config.gaussians_per_state);
    for (auto& g : s.gaussians) {
      g.mean.resize(model.dim);
      for (int d = 0; d < model.dim; ++d) g.mean[d] = p.mean[d] + normal(rng) * stddev[d];
      g.kappa = p.kappa;
      g.shape = p.shape;
      g.rate = p.rate;
    }
  }
  model.sticks.assign(config.truncation, BetaParams{1.0, config.concentration});
  return model;
}

std::vector<double> stick_weights(const std::vector<BetaParams>& sticks) {
  const std::size_t T = sticks.size();
  std::vector<double> pi(T, 0.0);
  double rest = 1.0;
  for (std::size_t u = 0; u + 1 < T; ++u) {
    const double ev = sticks[u].a / (sticks[u].a + sticks[u].b);
    pi[u] = ev * rest;
    rest *= 1.0 - ev;
  }
  if (T > 0) pi[T - 1] = rest;
  return pi;
}

std::vector<double> expected_log_stick_weights(const std::vector<BetaParams>& sticks) {
  const std::size_t T = sticks.size();
  std::vector<double> out(T, 0.0);
  double rest = 0.0;
  for (std::size_t u = 0; u + 1 < T; ++u) {
    const double dab = digamma(sticks[u].a + sticks[u].b);
    out[u] = digamma(sticks[u].a) - dab + rest;
    rest += digamma(sticks[u].b) - dab;
  }
  if (T > 0) out[T - 1] = rest;
  return out;
}

PhoneLoopHmm unified_hmm(const PhoneLoopModel& model, HmmMode mode) {
  PhoneLoopHmm hmm;
  hmm.num_units = model.num_units();
  hmm.states_per_unit = model.states_per_unit();
  const int n = hmm.num_states();
  hmm.log_stay.resize(n);
  hmm.log_next.resize(n);
  if (mode == HmmMode::kExpected) {
    for (double p : stick_weights(model.sticks)) hmm.log_entry.push_back(std::log(p));
    for (int i = 0; i < n; ++i) {
      const auto& s = model.states[i];
      hmm.log_stay[i] = std::log(s.stay / (s.stay + s.next));
      hmm.log_next[i] = std::log(s.next / (s.stay + s.next));
    }
  } else {
    hmm.log_entry = expected_log_stick_weights(model.sticks);
    for (int i = 0; i < n; ++i) {
      const auto& s = model.states[i];
      const double dsum = digamma(s.stay + s.next);
      hmm.log_stay[i] = digamma(s.stay) - dsum;
      hmm.log_next[i] = digamma(s.next) - dsum;
    }
  }
  return hmm;
}

Matrix PhoneLoopHmm::dense_transitions() const {
  const int n = num_states();
  const int S = states_per_unit;
  Matrix A = Matrix::Zero(n, n);
  for (int u = 0; u < num_units; ++u) {
    for (int s = 0; s < S; ++s) {
      const int i = u * S + s;
      A(i, i) += std::exp(log_stay[i]);
      if (s + 1 < S) {
        A(i, i + 1) += std::exp(log_next[i]);
      } else {
        for (int v = 0; v < num_units; ++v) A(i, v * S) += std::exp(log_next[i] + log_entry[v]);
      }
    }
  }
  return A;
}

Vector PhoneLoopHmm::initial_probabilities() const {
  Vector p = Vector::Zero(num_states());
  for (int u = 0; u < num_units; ++u) p[u * states_per_unit] = std::exp(log_entry[u]);
  return p;
}

double model_kl_divergence(const PhoneLoopModel& model) {
  const AudPrior& p = model.prior;
  double kl = 0.0;
  for (int u = 0; u + 1 < model.num_units(); ++u)
    kl += kl_beta(model.sticks[u].a, model.sticks[u].b, 1.0, model.config.concentration);
  for (const auto& s : model.states) {
    kl += kl_dirichlet({s.stay, s.next}, p.dirichlet);
    kl += kl_dirichlet(s.weight_counts, p.dirichlet);
    for (const auto& g : s.gaussians)
      for (int d = 0; d < model.dim; ++d)
        kl += kl_normal_gamma(g.mean[d], g.kappa, g.shape, g.rate[d], p.mean[d], p.kappa, p.shape, p.rate[d]);
  }
  return kl;
}

std::vector<int> UnitSequence::unit_ids() const {
  std::vector<int> ids;
  ids.reserve(units.size());
  for (const auto& s : units) ids.push_back(s.unit);
  return ids;
}

int count_distinct_units(const std::vector<UnitSequence>& sequences) {
  std::set<int> seen;
  for (const auto& seq : sequences)
    for (const auto& s : seq.units) seen.insert(s.unit);
  return static_cast<int>(seen.size());
}

// ---------------------------------------------------------------------------
// Serialization.

namespace {

constexpr std::uint32_t kModelVersion = 1;

void write_vector(std::ostream& os, const Vector& v) {
  binio::write_u32(os, static_cast<std::uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) binio::write_f64(os, v[i]);
}

Vector read_vector(std::istream& is, int expected) {
  const std::uint32_t n = binio::need_u32(is);
  if (static_cast<int>(n) != expected) throw Error("AUD model: vector length mismatch");
  Vector v(n);
  for (std::uint32_t i = 0; i < n; ++i) v[i] = binio::need_f64(is);
  return v;
}

}  // namespace

void write_model(std::ostream& os, const PhoneLoopModel& model) {
  using namespace binio;
  os.write("AUD1", 4);
  write_u32(os, kModelVersion);
  const AudConfig& c = model.config;
  write_u32(os, c.truncation);
  write_u32(os, c.states_per_unit);
  write_u32(os, c.gaussians_per_state);
  write_f64(os, c.concentration);
  write_u32(os, c.training_iterations);
  write_u64(os, c.rng_seed);
  write_u32(os, model.dim);

  const AudPrior& p = model.prior;
  write_vector(os, p.mean);
  write_vector(os, p.variance);
  write_f64(os, p.kappa);
  write_f64(os, p.shape);
  write_vector(os, p.rate);
  write_f64(os, p.dirichlet);
  write_f64(os, p.variance_floor_ratio);

  for (const auto& s : model.states) {
    write_f64(os, s.stay);
    write_f64(os, s.next);
    for (double w : s.weight_counts) write_f64(os, w);
    for (const auto& g : s.gaussians) {
      write_vector(os, g.mean);
      write_f64(os, g.kappa);
      write_f64(os, g.shape);
      write_vector(os, g.rate);
    }
  }
  for (const auto& b : model.sticks) {
    write_f64(os, b.a);
    write_f64(os, b.b);
  }
  if (!os) throw Error("failed to write AUD model");
}

PhoneLoopModel read_model(std::istream& is) {
  using namespace binio;
  expect_magic(is, "AUD1");
  if (need_u32(is) != kModelVersion) throw Error("AUD model: unsupported version");
  PhoneLoopModel model;
  AudConfig& c = model.config;
  c.truncation = static_cast<int>(need_u32(is));
  c.states_per_unit = static_cast<int>(need_u32(is));
  c.gaussians_per_state = static_cast<int>(need_u32(is));
  c.concentration = need_f64(is);
  c.training_iterations = static_cast<int>(need_u32(is));
  c.rng_seed = need_u64(is);
  c.validate();
  model.dim = static_cast<int>(need_u32(is));
  if (model.dim < 1) throw Error("AUD model: bad dimension");

  AudPrior& p = model.prior;
  p.mean = read_vector(is, model.dim);
  p.variance = read_vector(is, model.dim);
  p.kappa = need_f64(is);
  p.shape = need_f64(is);
  p.rate = read_vector(is, model.dim);
  p.dirichlet = need_f64(is);
  p.variance_floor_ratio = need_f64(is);

  model.states.resize(c.num_states());
  for (auto& s : model.states) {
    s.stay = need_f64(is);
    s.next = need_f64(is);
    s.weight_counts.resize(c.gaussians_per_state);
    for (auto& w : s.weight_counts) w = need_f64(is);
    s.gaussians.resize(c.gaussians_per_state);
    for (auto& g : s.gaussians) {
      g.mean = read_vector(is, model.dim);
      g.kappa = need_f64(is);
      g.shape = need_f64(is);
      g.rate = read_vector(is, model.dim);
    }
  }
  model.sticks.resize(c.truncation);
  for (auto& b : model.sticks) {
    b.a = need_f64(is);
    b.b = need_f64(is);
  }
  return model;
}

void write_unit_sequences(std::ostream& os, const std::vector<UnitSequence>& sequences) {
  for (const auto& seq : sequences) {
    nlohmann::json units = nlohmann::json::array();
    for (const auto& s : seq.units) units.push_back({s.unit, s.start, s.end});
    os << nlohmann::json{{"utterance_id", seq.utterance_id}, {"units", units}}.dump() << "\n";
  }
}

std::vector<UnitSequence> read_unit_sequences(std::istream& is) {
  std::vector<UnitSequence> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      UnitSequence seq;
      seq.utterance_id = j.at("utterance_id").get<std::string>();
      for (const auto& u : j.at("units"))
        seq.units.push_back({u.at(0).get<int>(), u.at(1).get<int>(), u.at(2).get<int>()});
      out.push_back(std::move(seq));
    } catch (const nlohmann::json::exception& e) {
      throw Error("malformed unit sequence line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace zrtopic
