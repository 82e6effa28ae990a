// zrtopic/cnn.cc

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
#include <istream>
#include <ostream>

#include "zrtopic/binary_io.h"
#include "zrtopic/cnn.h"

namespace zrtopic {

namespace {

constexpr double kClip = 1e-12;

using WindowMap = Eigen::Map<const Matrix, 0, Eigen::OuterStride<>>;

void fill_uniform(Rng& rng, Eigen::Ref<Matrix> m) {
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(rng);
}

void fill_uniform(Rng& rng, Vector& v) {
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = u(rng);
}

Vector dropout_mask(Rng& rng, Eigen::Index n, double rate) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 - rate;
  Vector m(n);
  for (Eigen::Index i = 0; i < n; ++i) m[i] = u(rng) < keep ? 1.0 / keep : 0.0;
  return m;
}

}  // namespace

void CnnConfig::validate() const {
  if (embed_dim < 1 || conv_units < 1 || hidden_units < 1) throw Error("cnn config: layer sizes must be >= 1");
  if (window < 1 || window % 2 == 0) throw Error("cnn config: window must be odd");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("cnn config: dropout must be in [0, 1)");
  if (batch_size < 1) throw Error("cnn config: batch size must be >= 1");
  if (max_epochs < 0) throw Error("cnn config: max_epochs must be >= 0");
  if (!(rho > 0.0 && rho < 1.0) || !(epsilon > 0.0)) throw Error("cnn config: bad Adadelta constants");
}

CnnGradients CnnGradients::zeros_like(const CnnModel& m) {
  CnnGradients g;
  g.embedding = Matrix::Zero(m.embedding.rows(), m.embedding.cols());
  g.conv = Matrix::Zero(m.conv.rows(), m.conv.cols());
  g.hidden = Matrix::Zero(m.hidden.rows(), m.hidden.cols());
  g.output = Matrix::Zero(m.output.rows(), m.output.cols());
  g.conv_bias = Vector::Zero(m.conv_bias.size());
  g.hidden_bias = Vector::Zero(m.hidden_bias.size());
  g.output_bias = Vector::Zero(m.output_bias.size());
  return g;
}

AdadeltaState AdadeltaState::zeros_like(const CnnModel& m) {
  return {CnnGradients::zeros_like(m), CnnGradients::zeros_like(m)};
}

CnnModel init_cnn(const CnnConfig& config, int vocab_size, int num_labels, const Matrix& pretrained) {
  config.validate();
  if (vocab_size < 1) throw Error("cnn: vocabulary must be non-empty");
  if (num_labels < 1) throw Error("cnn: need at least one label");
  CnnModel m;
  m.config = config;
  m.num_labels = num_labels;
  const int D = config.embed_dim, C = config.conv_units, H = config.hidden_units;
  Rng rng(config.rng_seed);
  m.embedding = Matrix::Zero(vocab_size + 1, D);
  if (pretrained.size() > 0) {
    if (pretrained.rows() != vocab_size + 1 || pretrained.cols() != D)
      throw Error("cnn: pretrained embedding shape mismatch");
    m.embedding = pretrained;
  } else {
    fill_uniform(rng, m.embedding.bottomRows(vocab_size));
  }
  m.embedding.row(0).setZero();
  m.conv.resize(config.window * D, C);
  fill_uniform(rng, m.conv);
  m.conv_bias.resize(C);
  fill_uniform(rng, m.conv_bias);
  m.hidden.resize(C, H);
  fill_uniform(rng, m.hidden);
  m.hidden_bias.resize(H);
  fill_uniform(rng, m.hidden_bias);
  m.output.resize(H, num_labels);
  fill_uniform(rng, m.output);
  m.output_bias.resize(num_labels);
  fill_uniform(rng, m.output_bias);
  return m;
}

PaddedBatch make_batch(const std::vector<std::vector<int>>& sequences, const Matrix& targets,
                       const std::vector<int>& rows, int max_len) {
  PaddedBatch b;
  b.targets.resize(static_cast<Eigen::Index>(rows.size()), targets.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& seq = sequences.at(rows[k]);
    if (seq.empty()) throw Error("sequence of length 0");
    if (static_cast<int>(seq.size()) > max_len) throw Error("sequence longer than padding length");
    std::vector<int> padded(max_len, 0);
    std::copy(seq.begin(), seq.end(), padded.begin());
    b.indices.push_back(std::move(padded));
    b.targets.row(k) = targets.row(rows[k]);
  }
  return b;
}

ForwardResult forward(const CnnModel& model, const PaddedBatch& batch, bool train_mode, std::uint64_t dropout_seed,
                      int workers) {
  const auto& cfg = model.config;
  const int D = cfg.embed_dim, n = cfg.window, C = cfg.conv_units, half = (n - 1) / 2;
  const int B = static_cast<int>(batch.indices.size());
  const bool drop = train_mode && cfg.dropout > 0.0;
  ForwardResult out;
  out.probs.resize(B, model.num_labels);
  out.caches.resize(B);
  parallel_for(B, workers, [&](std::size_t e) {
    const auto& idx = batch.indices[e];
    const int m = static_cast<int>(idx.size());
    if (m == 0) throw Error("sequence of length 0");
    ExampleCache& c = out.caches[e];
    Rng rng(derive_seed(dropout_seed, static_cast<std::uint64_t>(e)));

    c.x = Matrix::Zero(m + n - 1, D);
    for (int i = 0; i < m; ++i) {
      if (idx[i] < 0 || idx[i] > model.vocab_size()) throw Error("token index out of range");
      if (idx[i] != 0) c.x.row(half + i) = model.embedding.row(idx[i]);
    }
    if (drop) {
      c.embed_mask.resize(c.x.rows(), D);
      const Vector flat = dropout_mask(rng, c.x.size(), cfg.dropout);
      c.embed_mask = Eigen::Map<const Matrix>(flat.data(), c.x.rows(), D);
      c.x = c.x.cwiseProduct(c.embed_mask);
    }

    const WindowMap win(c.x.data(), m, n * D, Eigen::OuterStride<>(D));
    Matrix a = win * model.conv;
    a.rowwise() += model.conv_bias.transpose();
    c.argmax.assign(C, 0);
    Vector best = a.row(0).transpose();
    for (int i = 1; i < m; ++i)
      for (int u = 0; u < C; ++u)
        if (a(i, u) > best[u]) {
          best[u] = a(i, u);
          c.argmax[u] = i;
        }
    c.pooled_pre = best.cwiseMax(0.0);
    c.pooled_mask = drop ? dropout_mask(rng, C, cfg.dropout) : Vector::Ones(C);
    c.pooled = c.pooled_pre.cwiseProduct(c.pooled_mask);

    c.hidden_pre = (c.pooled.transpose() * model.hidden).transpose() + model.hidden_bias;
    c.hidden_mask = drop ? dropout_mask(rng, cfg.hidden_units, cfg.dropout) : Vector::Ones(cfg.hidden_units);
    c.hidden_act = c.hidden_pre.cwiseMax(0.0).cwiseProduct(c.hidden_mask);

    Vector z = (c.hidden_act.transpose() * model.output).transpose() + model.output_bias;
    if (cfg.head == CnnHead::kSoftmax) {
      z.array() -= z.maxCoeff();
      z = z.array().exp();
      z /= z.sum();
    } else {
      z = (1.0 + (-z.array()).exp()).inverse();
    }
    c.probs = z;
    out.probs.row(e) = z.transpose();
  });
  return out;
}

double categorical_cross_entropy(const Vector& probs, const Vector& target) {
  double loss = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k)
    if (target[k] != 0.0) loss -= target[k] * std::log(std::clamp(probs[k], kClip, 1.0 - kClip));
  return loss;
}

double binary_cross_entropy(const Vector& probs, const Vector& target) {
  double loss = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    const double o = std::clamp(probs[k], kClip, 1.0 - kClip);
    loss -= target[k] * std::log(o) + (1.0 - target[k]) * std::log(1.0 - o);
  }
  return loss;
}

double batch_loss(const CnnModel& model, const Matrix& probs, const Matrix& targets) {
  if (probs.rows() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const Vector o = probs.row(r).transpose(), y = targets.row(r).transpose();
    total += model.config.head == CnnHead::kSoftmax ? categorical_cross_entropy(o, y) : binary_cross_entropy(o, y);
  }
  return total / static_cast<double>(probs.rows());
}

CnnGradients backward(const CnnModel& model, const PaddedBatch& batch, const ForwardResult& fwd, int workers) {
  const auto& cfg = model.config;
  const int D = cfg.embed_dim, n = cfg.window, C = cfg.conv_units, H = cfg.hidden_units, half = (n - 1) / 2;
  const int B = static_cast<int>(batch.indices.size());
  CnnGradients g = CnnGradients::zeros_like(model);
  if (B == 0) return g;

  // Both heads pair with their loss so that d loss / d logits = o - y.
  const Matrix dz3 = (fwd.probs - batch.targets) / static_cast<double>(B);
  const Matrix conv_t = model.conv.transpose();  // C x (n * D), contiguous rows
  Matrix dz2(B, H), dpooled(B, C);
  std::vector<Matrix> dx(B);
  parallel_for(B, workers, [&](std::size_t e) {
    const ExampleCache& c = fwd.caches[e];
    Vector dh = model.output * dz3.row(e).transpose();
    dh = dh.cwiseProduct(c.hidden_mask);
    for (int h = 0; h < H; ++h)
      if (c.hidden_pre[h] <= 0.0) dh[h] = 0.0;
    dz2.row(e) = dh.transpose();
    Vector dp = model.hidden * dh;
    dp = dp.cwiseProduct(c.pooled_mask);
    for (int u = 0; u < C; ++u)
      if (c.pooled_pre[u] <= 0.0) dp[u] = 0.0;
    dpooled.row(e) = dp.transpose();
    dx[e] = Matrix::Zero(c.x.rows(), D);
    for (int u = 0; u < C; ++u) {
      if (dp[u] == 0.0) continue;
      Eigen::Map<Vector>(dx[e].data() + static_cast<Eigen::Index>(c.argmax[u]) * D, n * D) +=
          dp[u] * conv_t.row(u).transpose();
    }
    if (c.embed_mask.size() > 0) dx[e] = dx[e].cwiseProduct(c.embed_mask);
  });

  Matrix h2(B, H), pooled(B, C);
  for (int e = 0; e < B; ++e) {
    h2.row(e) = fwd.caches[e].hidden_act.transpose();
    pooled.row(e) = fwd.caches[e].pooled.transpose();
  }
  g.output.noalias() = h2.transpose() * dz3;
  g.output_bias = dz3.colwise().sum().transpose();
  g.hidden.noalias() = pooled.transpose() * dz2;
  g.hidden_bias = dz2.colwise().sum().transpose();
  g.conv_bias = dpooled.colwise().sum().transpose();

  Matrix dconv_t = Matrix::Zero(C, n * D);
  for (int e = 0; e < B; ++e) {
    const ExampleCache& c = fwd.caches[e];
    for (int u = 0; u < C; ++u) {
      const double d = dpooled(e, u);
      if (d == 0.0) continue;
      dconv_t.row(u) +=
          d * Eigen::Map<const Vector>(c.x.data() + static_cast<Eigen::Index>(c.argmax[u]) * D, n * D).transpose();
    }
    const auto& idx = batch.indices[e];
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (idx[i] != 0) g.embedding.row(idx[i]) += dx[e].row(half + i);
  }
  g.conv = dconv_t.transpose();
  g.embedding.row(0).setZero();
  return g;
}

namespace {

template <class P>
void adadelta_update(P& param, P& eg, P& edx, const P& grad, double rho, double eps) {
  eg = rho * eg + (1.0 - rho) * grad.cwiseProduct(grad);
  const P delta = -((edx.array() + eps).sqrt() / (eg.array() + eps).sqrt() * grad.array()).matrix();
  edx = rho * edx + (1.0 - rho) * delta.cwiseProduct(delta);
  param += delta;
}

}  // namespace

void adadelta_step(CnnModel& m, AdadeltaState& s, const CnnGradients& g) {
  const double rho = m.config.rho, eps = m.config.epsilon;
  adadelta_update(m.embedding, s.grad_sq.embedding, s.update_sq.embedding, g.embedding, rho, eps);
  m.embedding.row(0).setZero();
  adadelta_update(m.conv, s.grad_sq.conv, s.update_sq.conv, g.conv, rho, eps);
  adadelta_update(m.conv_bias, s.grad_sq.conv_bias, s.update_sq.conv_bias, g.conv_bias, rho, eps);
  adadelta_update(m.hidden, s.grad_sq.hidden, s.update_sq.hidden, g.hidden, rho, eps);
  adadelta_update(m.hidden_bias, s.grad_sq.hidden_bias, s.update_sq.hidden_bias, g.hidden_bias, rho, eps);
  adadelta_update(m.output, s.grad_sq.output, s.update_sq.output, g.output, rho, eps);
  adadelta_update(m.output_bias, s.grad_sq.output_bias, s.update_sq.output_bias, g.output_bias, rho, eps);
}

// ---------------------------------------------------------------------------
// Checkpoints.

namespace {

constexpr std::uint32_t kCnnVersion = 1;

void write_vec(std::ostream& os, const Vector& v) { binio::write_block(os, v.transpose()); }

Vector read_vec(std::istream& is, Eigen::Index n) {
  const Matrix m = binio::read_block(is);
  if (m.rows() != 1 || m.cols() != n) throw Error("CNN checkpoint: bias shape mismatch");
  return m.row(0).transpose();
}

Matrix read_mat(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  Matrix m = binio::read_block(is);
  if (m.rows() != rows || m.cols() != cols) throw Error("CNN checkpoint: matrix shape mismatch");
  return m;
}

}  // namespace

void write_cnn(std::ostream& os, const CnnModel& m) {
  using namespace binio;
  const auto& c = m.config;
  os.write("CNN1", 4);
  write_u32(os, kCnnVersion);
  write_u32(os, c.embed_dim);
  write_u32(os, c.window);
  write_u32(os, c.conv_units);
  write_u32(os, c.hidden_units);
  write_f64(os, c.dropout);
  write_u32(os, c.batch_size);
  write_u32(os, c.max_epochs);
  write_u32(os, c.head == CnnHead::kSoftmax ? 0 : 1);
  write_f64(os, c.rho);
  write_f64(os, c.epsilon);
  write_u32(os, c.select_on_validation_ap ? 1 : 0);
  write_u64(os, c.rng_seed);
  write_u32(os, m.num_labels);
  write_block(os, m.embedding);
  write_block(os, m.conv);
  write_vec(os, m.conv_bias);
  write_block(os, m.hidden);
  write_vec(os, m.hidden_bias);
  write_block(os, m.output);
  write_vec(os, m.output_bias);
  if (!os) throw Error("failed to write CNN checkpoint");
}

CnnModel read_cnn(std::istream& is) {
  using namespace binio;
  expect_magic(is, "CNN1");
  if (need_u32(is) != kCnnVersion) throw Error("CNN checkpoint: unsupported version");
  CnnModel m;
  auto& c = m.config;
  c.embed_dim = static_cast<int>(need_u32(is));
  c.window = static_cast<int>(need_u32(is));
  c.conv_units = static_cast<int>(need_u32(is));
  c.hidden_units = static_cast<int>(need_u32(is));
  c.dropout = need_f64(is);
  c.batch_size = static_cast<int>(need_u32(is));
  c.max_epochs = static_cast<int>(need_u32(is));
  c.head = need_u32(is) == 0 ? CnnHead::kSoftmax : CnnHead::kSigmoid;
  c.rho = need_f64(is);
  c.epsilon = need_f64(is);
  c.select_on_validation_ap = need_u32(is) != 0;
  c.rng_seed = need_u64(is);
  c.validate();
  m.num_labels = static_cast<int>(need_u32(is));
  m.embedding = read_block(is);
  if (m.embedding.rows() < 2 || m.embedding.cols() != c.embed_dim) throw Error("CNN checkpoint: bad embedding");
  m.conv = read_mat(is, c.window * c.embed_dim, c.conv_units);
  m.conv_bias = read_vec(is, c.conv_units);
  m.hidden = read_mat(is, c.conv_units, c.hidden_units);
  m.hidden_bias = read_vec(is, c.hidden_units);
  m.output = read_mat(is, c.hidden_units, m.num_labels);
  m.output_bias = read_vec(is, m.num_labels);
  return m;
}

}  // namespace zrtopic
