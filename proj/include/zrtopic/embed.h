// zrtopic/embed.h

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

// Skip-gram unit embeddings trained with a Huffman-coded hierarchical softmax.

#ifndef ZRTOPIC_EMBED_H_
#define ZRTOPIC_EMBED_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "zrtopic/common.h"

namespace zrtopic {

struct HuffmanTree {
  // Per token: branch bits from the root and the internal nodes visited.
  // Internal nodes are numbered 0 .. num_tokens - 2, the root is the last.
  std::vector<std::vector<std::uint8_t>> codes;
  std::vector<std::vector<int>> points;

  int num_tokens() const { return static_cast<int>(codes.size()); }
  int num_internal() const { return num_tokens() > 1 ? num_tokens() - 1 : 0; }
};

/// Huffman code over token ids 0 .. n-1. Merge order breaks frequency ties by
/// token id, with merged nodes ordered after every original token.
HuffmanTree build_huffman(const std::vector<double>& frequencies);

struct EmbedConfig {
  int dim = 50;
  int window = 5;
  int epochs = 20;
  double initial_learning_rate = 0.025;
  double final_learning_rate = 1e-4;
  bool decay = true;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct EmbeddingTable {
  std::vector<int> units;  // sorted unit ids, one row each
  Matrix vectors;          // units x dim
  Matrix internal;         // Huffman internal nodes x dim
  HuffmanTree tree;
  std::vector<double> epoch_loss;  // mean pair loss per epoch

  int dim() const { return static_cast<int>(vectors.cols()); }
  std::optional<int> row_of(int unit) const;
};

/// Hierarchical-softmax loss of predicting a token with the given code and
/// path from an input vector: -sum_k log sigma((1 - 2 code_k) u_k . v).
double hs_loss(const Vector& input, const Matrix& internal, const std::vector<std::uint8_t>& code,
               const std::vector<int>& path);

/// Gradients of hs_loss with respect to the input vector and the internal
/// node rows (only rows on the path are non-zero).
void hs_gradient(const Vector& input, const Matrix& internal, const std::vector<std::uint8_t>& code,
                 const std::vector<int>& path, Vector& grad_input, Matrix& grad_internal);

/// Skip-gram over unit sequences: each center predicts every context token
/// within a radius sampled uniformly from [1, window].
EmbeddingTable train_skipgram(const std::vector<std::vector<int>>& sequences, const EmbedConfig& config);

/// (units.size() + 1) x dim matrix; row 0 is the zero PAD row and row k + 1
/// holds units[k]. Units missing from the table get seeded U(-0.05, 0.05).
Matrix export_for_cnn(const EmbeddingTable& table, const std::vector<int>& units, int dim, std::uint64_t seed);

// Text format: "count dim" header, then "unit v1 ... v_dim" per line.
void write_embeddings(std::ostream& os, const EmbeddingTable& table);
EmbeddingTable read_embeddings(std::istream& is);

}  // namespace zrtopic

#endif  // ZRTOPIC_EMBED_H_
