// zrtopic/utd.cc

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

#include "zrtopic/utd.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace zrtopic {

void UtdConfig::validate() const {
  if (!(cosine_threshold > 0.0 && cosine_threshold < 1.0)) throw Error("utd: cosine threshold must be in (0,1)");
  if (!(median_filter_duration > 0.0)) throw Error("utd: median filter duration must be positive");
  if (!(min_match_duration > 0.0)) throw Error("utd: minimum match duration must be positive");
  if (!(graph_edge_threshold > 0.0 && graph_edge_threshold < 1.0))
    throw Error("utd: graph edge threshold must be in (0,1)");
  if (!(alignment_offset > 0.0 && alignment_offset < 1.0)) throw Error("utd: alignment offset must be in (0,1)");
  if (dtw_band_width < 0) throw Error("utd: band width must be non-negative");
  if (!(frame_period > 0.0)) throw Error("utd: frame period must be positive");
}

int UtdConfig::median_filter_frames() const { return median_filter_length(median_filter_duration, frame_period); }

int UtdConfig::min_match_frames() const {
  return std::max(1, static_cast<int>(std::lround(min_match_duration / frame_period)));
}

int span_overlap(const Span& a, const Span& b) {
  return std::max(0, std::min(a.end, b.end) - std::max(a.start, b.start) + 1);
}

double span_iou(const Span& a, const Span& b) {
  const int inter = span_overlap(a, b);
  const int uni = a.length() + b.length() - inter;
  return uni > 0 ? static_cast<double>(inter) / uni : 0.0;
}

Matrix normalize_rows(const Matrix& frames) {
  Matrix out = frames;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double n = out.row(r).norm();
    if (n > 0.0)
      out.row(r) /= n;
    else
      out.row(r).setZero();
  }
  return out;
}

SparseSimilarity sparse_cosine_matrix_normalized(const Matrix& a_unit, const Matrix& b_unit, double threshold) {
  if (a_unit.cols() != b_unit.cols()) throw Error("dimension mismatch between feature matrices");
  SparseSimilarity out;
  out.rows = static_cast<int>(a_unit.rows());
  out.cols = static_cast<int>(b_unit.rows());
  const Matrix dense = a_unit * b_unit.transpose();
  for (int i = 0; i < out.rows; ++i) {
    const double* row = dense.data() + static_cast<Eigen::Index>(i) * out.cols;
    for (int j = 0; j < out.cols; ++j) {
      if (row[j] >= threshold) out.entries.push_back({i, j, std::min(1.0, row[j])});
    }
  }
  return out;
}

SparseSimilarity sparse_cosine_matrix(const Matrix& a, const Matrix& b, double threshold) {
  if (a.cols() != b.cols()) throw Error("dimension mismatch between feature matrices");
  return sparse_cosine_matrix_normalized(normalize_rows(a), normalize_rows(b), threshold);
}

int median_filter_length(double kappa, double frame_period) {
  int n = static_cast<int>(std::lround(kappa / frame_period));
  if (n < 1) n = 1;
  if (n % 2 == 0) ++n;
  return n;
}

std::vector<bool> median_filter_binary(const std::vector<bool>& signal, int length) {
  const int n = static_cast<int>(signal.size());
  const int half = length / 2;
  const int majority = half + 1;
  std::vector<int> prefix(n + 1, 0);
  for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + (signal[i] ? 1 : 0);
  std::vector<bool> out(n, false);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    out[i] = prefix[hi + 1] - prefix[lo] >= majority;
  }
  return out;
}

std::vector<DiagonalSeed> diagonal_search(const SparseSimilarity& sim, int filter_length, int min_frames) {
  std::vector<DiagonalSeed> seeds;
  if (sim.entries.empty()) return seeds;
  const int offset = sim.rows - 1;
  const int num_diagonals = sim.rows + sim.cols - 1;
  const int majority = filter_length / 2 + 1;
  std::vector<int> counts(num_diagonals, 0);
  for (const auto& e : sim.entries) ++counts[e.j - e.i + offset];

  // A run of surviving points needs at least `majority` present points in
  // some window and must reach min_frames, so sparse diagonals are skipped.
  const int needed = std::min(majority, min_frames);
  std::vector<std::vector<int>> rows_on(num_diagonals);
  for (const auto& e : sim.entries) {
    const int k = e.j - e.i + offset;
    if (counts[k] >= needed) rows_on[k].push_back(e.i);
  }
  for (int k = 0; k < num_diagonals; ++k) {
    if (rows_on[k].empty()) continue;
    const int d = k - offset;
    const int first = std::max(0, -d);
    const int last = std::min(sim.rows - 1, sim.cols - 1 - d);
    std::vector<bool> signal(last - first + 1, false);
    for (int i : rows_on[k]) signal[i - first] = true;
    const auto filtered = median_filter_binary(signal, filter_length);
    int run_start = -1;
    for (int p = 0; p <= static_cast<int>(filtered.size()); ++p) {
      const bool on = p < static_cast<int>(filtered.size()) && filtered[p];
      if (on && run_start < 0) run_start = p;
      if (!on && run_start >= 0) {
        if (p - run_start >= min_frames) seeds.push_back({d, first + run_start, first + p - 1});
        run_start = -1;
      }
    }
  }
  return seeds;
}

std::vector<DiagonalSeed> diagonal_search(const SparseSimilarity& sim, const UtdConfig& config) {
  return diagonal_search(sim, config.median_filter_frames(), config.min_match_frames());
}

namespace {

enum Move : unsigned char { kStart = 0, kDiag = 1, kUp = 2, kLeft = 3 };

}  // namespace

AlignmentPath local_align(const Matrix& field, int diagonal, int band_width, double offset) {
  const int rows = static_cast<int>(field.rows());
  const int cols = static_cast<int>(field.cols());
  constexpr double kNeg = -std::numeric_limits<double>::infinity();
  std::vector<double> best(static_cast<std::size_t>(rows) * cols, kNeg);
  std::vector<unsigned char> from(best.size(), kStart);
  auto in_band = [&](int r, int c) { return std::abs(c - r - diagonal) <= band_width; };
  auto at = [&](int r, int c) { return static_cast<std::size_t>(r) * cols + c; };

  double top = kNeg;
  int top_r = -1, top_c = -1;
  for (int r = 0; r < rows; ++r) {
    const int c_lo = std::max(0, r + diagonal - band_width);
    const int c_hi = std::min(cols - 1, r + diagonal + band_width);
    for (int c = c_lo; c <= c_hi; ++c) {
      const double gain = field(r, c) - offset;
      double value = kNeg;
      unsigned char move = kStart;
      if (r > 0 && c > 0 && in_band(r - 1, c - 1) && best[at(r - 1, c - 1)] > kNeg) {
        value = best[at(r - 1, c - 1)] + 2.0 * gain;
        move = kDiag;
      }
      if (r > 0 && in_band(r - 1, c) && best[at(r - 1, c)] + gain > value) {
        value = best[at(r - 1, c)] + gain;
        move = kUp;
      }
      if (c > 0 && in_band(r, c - 1) && best[at(r, c - 1)] + gain > value) {
        value = best[at(r, c - 1)] + gain;
        move = kLeft;
      }
      if (2.0 * gain > value) {
        value = 2.0 * gain;
        move = kStart;
      }
      best[at(r, c)] = value;
      from[at(r, c)] = move;
      if (value > top) {
        top = value;
        top_r = r;
        top_c = c;
      }
    }
  }

  AlignmentPath path;
  if (top_r < 0) return path;
  int r = top_r, c = top_c;
  for (;;) {
    path.cells.emplace_back(r, c);
    const unsigned char move = from[at(r, c)];
    if (move == kStart) break;
    if (move == kDiag) {
      --r;
      --c;
    } else if (move == kUp) {
      --r;
    } else {
      --c;
    }
  }
  std::reverse(path.cells.begin(), path.cells.end());
  path.score = top;
  return path;
}

double alignment_objective(const Matrix& field, const std::vector<std::pair<int, int>>& cells, double offset) {
  double total = 0.0;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto [r, c] = cells[k];
    double w = 2.0;
    if (k > 0) {
      const auto [pr, pc] = cells[k - 1];
      w = (r - pr == 1 && c - pc == 1) ? 2.0 : 1.0;
    }
    total += w * (field(r, c) - offset);
  }
  return total;
}

Match segmental_dtw_normalized(const std::string& utt_a, const Matrix& a_unit, const std::string& utt_b,
                               const Matrix& b_unit, const DiagonalSeed& seed, int band_width, double offset) {
  const int n = static_cast<int>(a_unit.rows());
  const int m = static_cast<int>(b_unit.rows());
  if (seed.length() < 2) throw Error("degenerate seed: fewer than 2 frames");
  if (seed.start < 0 || seed.end >= n || seed.start + seed.diagonal < 0 || seed.end + seed.diagonal >= m)
    throw Error("seed outside utterance bounds");
  if (a_unit.cols() != b_unit.cols()) throw Error("dimension mismatch between feature matrices");

  const int r0 = std::max(0, seed.start - band_width);
  const int r1 = std::min(n - 1, seed.end + band_width);
  const int c0 = std::max(0, r0 + seed.diagonal - band_width);
  const int c1 = std::min(m - 1, r1 + seed.diagonal + band_width);
  const Matrix field = a_unit.middleRows(r0, r1 - r0 + 1) * b_unit.middleRows(c0, c1 - c0 + 1).transpose();
  const AlignmentPath path = local_align(field, seed.diagonal + r0 - c0, band_width, offset);

  Match match;
  match.utt_a = utt_a;
  match.utt_b = utt_b;
  double total = 0.0;
  for (const auto& [r, c] : path.cells) total += field(r, c);
  const double mean_sim = total / static_cast<double>(path.cells.size());
  match.dtw_similarity = std::clamp(mean_sim, 0.0, 1.0);
  match.path_length = static_cast<int>(path.cells.size());
  match.span_a = {r0 + path.cells.front().first, r0 + path.cells.back().first};
  match.span_b = {c0 + path.cells.front().second, c0 + path.cells.back().second};
  return match;
}

Match segmental_dtw(const FeatureMatrix& a, const FeatureMatrix& b, const DiagonalSeed& seed, int band_width,
                    double offset) {
  return segmental_dtw_normalized(a.utterance_id, normalize_rows(a.data), b.utterance_id, normalize_rows(b.data),
                                  seed, band_width, offset);
}

BandFeatures band_features(const Match& match, const SparseSimilarity& sim) {
  BandFeatures f{};
  const int main_diag = match.span_b.start - match.span_a.start;
  auto first = std::lower_bound(sim.entries.begin(), sim.entries.end(), match.span_a.start,
                                [](const SimilarityEntry& e, int row) { return e.i < row; });
  for (auto it = first; it != sim.entries.end() && it->i <= match.span_a.end; ++it) {
    if (it->j < match.span_b.start || it->j > match.span_b.end) continue;
    const int off = std::abs(it->j - it->i - main_diag);
    if (off <= 2)
      f[0] += 1.0;
    else if (off <= 7)
      f[1] += 1.0;
    else if (off <= 12)
      f[2] += 1.0;
  }
  const double norm = std::max(1, match.path_length);
  for (auto& v : f) v /= norm;
  return f;
}

double rescore_features(const BandFeatures& features, const RescoreModel& model) {
  if (model.weights.size() != features.size()) throw Error("rescore model has wrong feature count");
  double z = model.bias;
  for (std::size_t k = 0; k < features.size(); ++k) z += model.weights[k] * features[k];
  return 1.0 / (1.0 + std::exp(-z));
}

double rescore(const Match& match, const SparseSimilarity& sim, const RescoreModel& model) {
  return rescore_features(band_features(match, sim), model);
}

RescoreModel train_rescorer(const std::vector<LabeledPair>& pairs, const RescorerTrainConfig& config) {
  if (pairs.empty()) throw Error("rescorer: no training pairs");
  const std::size_t dim = pairs.front().features.size();
  std::size_t positives = 0;
  for (const auto& p : pairs) {
    if (p.features.size() != dim) throw Error("rescorer: inconsistent feature sizes");
    positives += p.same_word ? 1 : 0;
  }
  if (positives == 0 || positives == pairs.size()) throw Error("rescorer: single-class data");

  RescoreModel model;
  model.weights.assign(dim, 0.0);
  model.bias = 0.0;
  std::vector<double> grad(dim);
  const double n = static_cast<double>(pairs.size());
  for (int it = 0; it < config.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_bias = 0.0;
    for (const auto& p : pairs) {
      double z = model.bias;
      for (std::size_t k = 0; k < dim; ++k) z += model.weights[k] * p.features[k];
      const double err = 1.0 / (1.0 + std::exp(-z)) - (p.same_word ? 1.0 : 0.0);
      for (std::size_t k = 0; k < dim; ++k) grad[k] += err * p.features[k];
      grad_bias += err;
    }
    for (std::size_t k = 0; k < dim; ++k)
      model.weights[k] -= config.learning_rate * (grad[k] / n + config.l2 * model.weights[k]);
    model.bias -= config.learning_rate * grad_bias / n;
  }
  return model;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

struct NodeAssignment {
  std::vector<TermNode> nodes;
  std::vector<int> side_a;  // node of each match's a-side
  std::vector<int> side_b;
};

NodeAssignment assign_nodes(const std::vector<Match>& matches) {
  struct Candidate {
    std::string utt;
    Span span;
    int id;
  };
  std::vector<Candidate> cands;
  cands.reserve(matches.size() * 2);
  for (std::size_t k = 0; k < matches.size(); ++k) {
    cands.push_back({matches[k].utt_a, matches[k].span_a, static_cast<int>(2 * k)});
    cands.push_back({matches[k].utt_b, matches[k].span_b, static_cast<int>(2 * k + 1)});
  }
  std::vector<int> order(cands.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    const auto& a = cands[x];
    const auto& b = cands[y];
    if (a.utt != b.utt) return a.utt < b.utt;
    if (a.span.start != b.span.start) return a.span.start < b.span.start;
    if (a.span.end != b.span.end) return a.span.end < b.span.end;
    return a.id < b.id;
  });

  UnionFind uf(static_cast<int>(cands.size()));
  for (std::size_t p = 0; p < order.size(); ++p) {
    const auto& a = cands[order[p]];
    for (std::size_t q = p + 1; q < order.size(); ++q) {
      const auto& b = cands[order[q]];
      if (b.utt != a.utt || b.span.start > a.span.end) break;
      if (span_iou(a.span, b.span) > 0.5) uf.unite(order[p], order[q]);
    }
  }

  // A merged node spans the (lower) median start to the median end of its
  // members; nodes are ordered by (utterance, start, end).
  std::unordered_map<int, std::vector<int>> members;
  for (int idx : order) members[uf.find(idx)].push_back(idx);
  std::vector<std::pair<TermNode, int>> nodes;
  for (const auto& [root, idxs] : members) {
    std::vector<int> starts, ends;
    for (int idx : idxs) {
      starts.push_back(cands[idx].span.start);
      ends.push_back(cands[idx].span.end);
    }
    const std::size_t mid = (idxs.size() - 1) / 2;
    std::nth_element(starts.begin(), starts.begin() + mid, starts.end());
    std::nth_element(ends.begin(), ends.begin() + mid, ends.end());
    nodes.push_back({{cands[idxs[0]].utt, Span{starts[mid], std::max(starts[mid], ends[mid])}}, root});
  }
  std::sort(nodes.begin(), nodes.end(), [](const auto& x, const auto& y) {
    if (x.first.utterance_id != y.first.utterance_id) return x.first.utterance_id < y.first.utterance_id;
    if (x.first.span.start != y.first.span.start) return x.first.span.start < y.first.span.start;
    return x.first.span.end < y.first.span.end;
  });
  std::unordered_map<int, int> root_to_node;
  NodeAssignment out;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    root_to_node[nodes[k].second] = static_cast<int>(k);
    out.nodes.push_back(nodes[k].first);
  }
  out.side_a.resize(matches.size());
  out.side_b.resize(matches.size());
  for (std::size_t k = 0; k < matches.size(); ++k) {
    out.side_a[k] = root_to_node.at(uf.find(static_cast<int>(2 * k)));
    out.side_b[k] = root_to_node.at(uf.find(static_cast<int>(2 * k + 1)));
  }
  return out;
}

}  // namespace

std::vector<TermNode> merge_nodes(const std::vector<Match>& matches) { return assign_nodes(matches).nodes; }

TermClusterSet cluster_terms(const std::vector<Match>& matches, double edge_threshold, bool use_rescoring) {
  TermClusterSet out;
  if (matches.empty()) return out;
  const NodeAssignment graph = assign_nodes(matches);
  UnionFind uf(static_cast<int>(graph.nodes.size()));
  for (std::size_t k = 0; k < matches.size(); ++k) {
    double weight = matches[k].dtw_similarity;
    if (use_rescoring) {
      if (!matches[k].rescored_similarity) throw Error("rescoring requested but match has no rescored similarity");
      weight = *matches[k].rescored_similarity;
    }
    if (weight >= edge_threshold) uf.unite(graph.side_a[k], graph.side_b[k]);
  }
  std::map<int, std::size_t> cluster_of_root;
  for (std::size_t n = 0; n < graph.nodes.size(); ++n) {
    const int root = uf.find(static_cast<int>(n));
    auto it = cluster_of_root.find(root);
    if (it == cluster_of_root.end()) {
      it = cluster_of_root.emplace(root, out.clusters.size()).first;
      out.clusters.emplace_back();
    }
    out.clusters[it->second].push_back(graph.nodes[n]);
  }
  return out;
}

std::vector<std::map<int, int>> tokenize_documents_utd(const TermClusterSet& clusters, const Corpus& corpus) {
  const auto& docs = corpus.documents();
  std::unordered_map<std::string, std::vector<std::size_t>> docs_of_utt;
  for (std::size_t d = 0; d < docs.size(); ++d)
    for (const auto& u : docs[d].utterance_ids) docs_of_utt[u].push_back(d);
  std::vector<std::map<int, int>> out(docs.size());
  for (std::size_t c = 0; c < clusters.clusters.size(); ++c) {
    for (const auto& node : clusters.clusters[c]) {
      auto it = docs_of_utt.find(node.utterance_id);
      if (it == docs_of_utt.end()) continue;
      for (std::size_t d : it->second) ++out[d][static_cast<int>(c)];
    }
  }
  return out;
}

std::vector<Match> find_matches(const Corpus& corpus, const UtdConfig& config, int workers) {
  config.validate();
  const auto& utts = corpus.utterances();
  const int n = static_cast<int>(utts.size());
  std::vector<Matrix> unit(n);
  parallel_for(n, workers, [&](std::size_t k) { unit[k] = normalize_rows(utts[k].data); });

  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) pairs.emplace_back(a, b);

  const int filter = config.median_filter_frames();
  const int min_frames = config.min_match_frames();
  std::vector<std::vector<Match>> per_pair(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t p) {
    const auto [a, b] = pairs[p];
    const SparseSimilarity sim = sparse_cosine_matrix_normalized(unit[a], unit[b], config.cosine_threshold);
    const auto seeds = diagonal_search(sim, filter, min_frames);
    std::vector<Match> found;
    for (const auto& seed : seeds) {
      Match m = segmental_dtw_normalized(utts[a].utterance_id, unit[a], utts[b].utterance_id, unit[b], seed,
                                         config.dtw_band_width, config.alignment_offset);
      if (m.span_a.length() < min_frames || m.span_b.length() < min_frames) continue;
      m.band_features = band_features(m, sim);
      found.push_back(std::move(m));
    }
    // Several seeds can land on the same repetition; keep the best of each.
    std::stable_sort(found.begin(), found.end(),
                     [](const Match& x, const Match& y) { return x.dtw_similarity > y.dtw_similarity; });
    std::vector<Match> kept;
    for (auto& m : found) {
      const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const Match& k) {
        return span_iou(k.span_a, m.span_a) > 0.5 && span_iou(k.span_b, m.span_b) > 0.5;
      });
      if (!duplicate) kept.push_back(std::move(m));
    }
    std::sort(kept.begin(), kept.end(), [](const Match& x, const Match& y) {
      if (x.span_a.start != y.span_a.start) return x.span_a.start < y.span_a.start;
      return x.span_b.start < y.span_b.start;
    });
    per_pair[p] = std::move(kept);
  });

  std::vector<Match> out;
  for (auto& v : per_pair)
    for (auto& m : v) out.push_back(std::move(m));
  return out;
}

void apply_rescoring(std::vector<Match>& matches, const RescoreModel& model) {
  for (auto& m : matches) m.rescored_similarity = rescore_features(m.band_features, model);
}

}  // namespace zrtopic
