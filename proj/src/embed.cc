// zrtopic/embed.cc

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
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "zrtopic/embed.h"

namespace zrtopic {

HuffmanTree build_huffman(const std::vector<double>& frequencies) {
  const int n = static_cast<int>(frequencies.size());
  if (n == 0) throw Error("empty vocabulary");
  for (double f : frequencies)
    if (!(f > 0.0) || !std::isfinite(f)) throw Error("Huffman frequencies must be positive");
  HuffmanTree tree;
  tree.codes.resize(n);
  tree.points.resize(n);
  if (n == 1) return tree;

  std::set<std::pair<double, int>> queue;
  for (int i = 0; i < n; ++i) queue.emplace(frequencies[i], i);
  std::vector<int> parent(2 * n - 1, -1);
  std::vector<std::uint8_t> bit(2 * n - 1, 0);
  for (int k = 0; k < n - 1; ++k) {
    const auto a = *queue.begin();
    queue.erase(queue.begin());
    const auto b = *queue.begin();
    queue.erase(queue.begin());
    const int node = n + k;
    parent[a.second] = node;
    parent[b.second] = node;
    bit[b.second] = 1;
    queue.emplace(a.first + b.first, node);
  }
  for (int i = 0; i < n; ++i) {
    auto& code = tree.codes[i];
    auto& path = tree.points[i];
    for (int cur = i; parent[cur] >= 0; cur = parent[cur]) {
      code.push_back(bit[cur]);
      path.push_back(parent[cur] - n);
    }
    std::reverse(code.begin(), code.end());
    std::reverse(path.begin(), path.end());
  }
  return tree;
}

void EmbedConfig::validate() const {
  if (dim < 1) throw Error("embed config: dim must be >= 1");
  if (window < 1) throw Error("embed config: window must be >= 1");
  if (epochs < 0) throw Error("embed config: epochs must be >= 0");
  if (!(initial_learning_rate > 0.0)) throw Error("embed config: learning rate must be positive");
}

std::optional<int> EmbeddingTable::row_of(int unit) const {
  auto it = std::lower_bound(units.begin(), units.end(), unit);
  if (it == units.end() || *it != unit) return std::nullopt;
  return static_cast<int>(it - units.begin());
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// -log sigma(z), stable for large |z|.
double neg_log_sigmoid(double z) { return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)); }

}  // namespace

double hs_loss(const Vector& input, const Matrix& internal, const std::vector<std::uint8_t>& code,
               const std::vector<int>& path) {
  double loss = 0.0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    const double z = internal.row(path[k]).dot(input);
    loss += neg_log_sigmoid(code[k] ? -z : z);
  }
  return loss;
}

void hs_gradient(const Vector& input, const Matrix& internal, const std::vector<std::uint8_t>& code,
                 const std::vector<int>& path, Vector& grad_input, Matrix& grad_internal) {
  grad_input = Vector::Zero(input.size());
  grad_internal = Matrix::Zero(internal.rows(), internal.cols());
  for (std::size_t k = 0; k < path.size(); ++k) {
    const double g = 1.0 - code[k] - sigmoid(internal.row(path[k]).dot(input));
    grad_input -= g * internal.row(path[k]).transpose();
    grad_internal.row(path[k]) -= g * input.transpose();
  }
}

EmbeddingTable train_skipgram(const std::vector<std::vector<int>>& sequences, const EmbedConfig& config) {
  config.validate();
  std::map<int, double> freq;
  long total_tokens = 0;
  for (const auto& s : sequences) {
    for (int u : s) freq[u] += 1.0;
    total_tokens += static_cast<long>(s.size());
  }
  if (freq.empty()) throw Error("skip-gram needs non-empty sequences");

  EmbeddingTable table;
  std::vector<double> f;
  for (const auto& [u, c] : freq) {
    table.units.push_back(u);
    f.push_back(c);
  }
  table.tree = build_huffman(f);
  const int V = static_cast<int>(table.units.size());
  const int D = config.dim;

  Rng rng(config.rng_seed);
  std::uniform_real_distribution<double> init(-0.5 / D, 0.5 / D);
  table.vectors.resize(V, D);
  for (int r = 0; r < V; ++r)
    for (int c = 0; c < D; ++c) table.vectors(r, c) = init(rng);
  table.internal = Matrix::Zero(table.tree.num_internal(), D);

  std::vector<std::vector<int>> rows;
  for (const auto& s : sequences) {
    std::vector<int> r;
    for (int u : s) r.push_back(*table.row_of(u));
    rows.push_back(std::move(r));
  }

  std::uniform_int_distribution<int> radius(1, config.window);
  const double total = static_cast<double>(total_tokens) * std::max(1, config.epochs);
  long processed = 0;
  Vector neu(D);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss = 0.0;
    long pairs = 0;
    for (const auto& seq : rows) {
      const int m = static_cast<int>(seq.size());
      for (int i = 0; i < m; ++i, ++processed) {
        double lr = config.initial_learning_rate;
        if (config.decay)
          lr = std::max(config.final_learning_rate,
                        config.initial_learning_rate -
                            (config.initial_learning_rate - config.final_learning_rate) * processed / total);
        const int r = radius(rng);
        auto v = table.vectors.row(seq[i]);
        for (int j = std::max(0, i - r); j <= std::min(m - 1, i + r); ++j) {
          if (j == i) continue;
          const auto& code = table.tree.codes[seq[j]];
          const auto& path = table.tree.points[seq[j]];
          neu.setZero();
          for (std::size_t k = 0; k < path.size(); ++k) {
            auto u = table.internal.row(path[k]);
            const double z = u.dot(v);
            loss += neg_log_sigmoid(code[k] ? -z : z);
            const double g = (1.0 - code[k] - sigmoid(z)) * lr;
            neu += g * u.transpose();
            u += g * v;
          }
          v += neu.transpose();
          ++pairs;
        }
      }
    }
    table.epoch_loss.push_back(pairs > 0 ? loss / pairs : 0.0);
  }
  return table;
}

Matrix export_for_cnn(const EmbeddingTable& table, const std::vector<int>& units, int dim, std::uint64_t seed) {
  if (!table.units.empty() && table.dim() != dim) throw Error("embedding dimension mismatch");
  Rng rng(seed);
  std::uniform_real_distribution<double> init(-0.05, 0.05);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(units.size()) + 1, dim);
  for (std::size_t k = 0; k < units.size(); ++k) {
    if (auto r = table.row_of(units[k])) {
      out.row(k + 1) = table.vectors.row(*r);
    } else {
      for (int c = 0; c < dim; ++c) out(k + 1, c) = init(rng);
    }
  }
  return out;
}

void write_embeddings(std::ostream& os, const EmbeddingTable& table) {
  os << table.units.size() << " " << table.dim() << "\n";
  char buf[40];
  for (std::size_t r = 0; r < table.units.size(); ++r) {
    os << table.units[r];
    for (int c = 0; c < table.dim(); ++c) {
      std::snprintf(buf, sizeof(buf), " %.17g", table.vectors(r, c));
      os << buf;
    }
    os << "\n";
  }
}

EmbeddingTable read_embeddings(std::istream& is) {
  long count = 0, dim = 0;
  std::string line;
  if (!std::getline(is, line)) throw Error("malformed embedding file: missing header");
  {
    std::istringstream hs(line);
    if (!(hs >> count >> dim) || count < 0 || dim < 1) throw Error("malformed embedding file: bad header");
  }
  EmbeddingTable table;
  table.vectors.resize(count, dim);
  std::vector<std::pair<int, Eigen::Index>> order;
  for (long r = 0; r < count; ++r) {
    if (!std::getline(is, line)) throw Error("malformed embedding file: fewer rows than declared");
    std::istringstream ls(line);
    int unit = 0;
    if (!(ls >> unit)) throw Error("malformed embedding file: bad row");
    for (long c = 0; c < dim; ++c)
      if (!(ls >> table.vectors(r, c))) throw Error("malformed embedding file: short row");
    order.emplace_back(unit, r);
  }
  std::sort(order.begin(), order.end());
  Matrix sorted(count, dim);
  for (long k = 0; k < count; ++k) {
    if (k > 0 && order[k].first == order[k - 1].first) throw Error("malformed embedding file: duplicate unit");
    table.units.push_back(order[k].first);
    sorted.row(k) = table.vectors.row(order[k].second);
  }
  table.vectors = std::move(sorted);
  return table;
}

}  // namespace zrtopic
