// zrtopic/utd.h

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

// Unsupervised term discovery: sparse cosine similarity between utterance
// pairs, median-filtered diagonal line search, band-limited segmental DTW,
// optional logistic rescoring and connected-component clustering.

#ifndef ZRTOPIC_UTD_H_
#define ZRTOPIC_UTD_H_

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zrtopic/common.h"
#include "zrtopic/corpus.h"

namespace zrtopic {

struct UtdConfig {
  double cosine_threshold = 0.5;        // delta
  double median_filter_duration = 0.7;  // kappa, seconds
  double min_match_duration = 0.5;      // seconds
  double graph_edge_threshold = 0.88;
  bool use_rescoring = false;
  int dtw_band_width = 75;  // frames
  // Per-cell similarity a path must exceed to grow; trims extensions into
  // merely similar neighbouring frames.
  double alignment_offset = 0.8;
  double frame_period = 0.010;

  void validate() const;
  int median_filter_frames() const;
  int min_match_frames() const;
};

/// Inclusive frame range.
struct Span {
  int start = 0;
  int end = 0;
  int length() const { return end - start + 1; }
  friend bool operator==(const Span&, const Span&) = default;
};

/// Frames shared by two spans.
int span_overlap(const Span& a, const Span& b);
/// Intersection over union of two spans.
double span_iou(const Span& a, const Span& b);

constexpr int kNumRescoreBands = 3;
using BandFeatures = std::array<double, kNumRescoreBands>;

struct Match {
  std::string utt_a;
  std::string utt_b;
  Span span_a;
  Span span_b;
  double dtw_similarity = 0.0;
  std::optional<double> rescored_similarity;
  int path_length = 0;
  BandFeatures band_features{};
};

struct SimilarityEntry {
  int i = 0;
  int j = 0;
  double value = 0.0;
};

/// Entries with cosine >= threshold, sorted by (i, j).
struct SparseSimilarity {
  int rows = 0;
  int cols = 0;
  std::vector<SimilarityEntry> entries;
};

/// Rows scaled to unit L2 norm; zero rows stay zero (cosine 0 with anything).
Matrix normalize_rows(const Matrix& frames);

SparseSimilarity sparse_cosine_matrix(const Matrix& a, const Matrix& b, double threshold);
/// Same, but both inputs already row-normalized.
SparseSimilarity sparse_cosine_matrix_normalized(const Matrix& a_unit, const Matrix& b_unit, double threshold);

/// Run of frames along diagonal j - i = diagonal, rows [start, end].
struct DiagonalSeed {
  int diagonal = 0;
  int start = 0;
  int end = 0;
  int length() const { return end - start + 1; }
};

/// round(kappa / frame_period), bumped to the next odd number when even.
int median_filter_length(double kappa, double frame_period);

/// Median filter (zero outside the signal) over a binary sequence.
std::vector<bool> median_filter_binary(const std::vector<bool>& signal, int length);

std::vector<DiagonalSeed> diagonal_search(const SparseSimilarity& sim, int filter_length, int min_frames);
std::vector<DiagonalSeed> diagonal_search(const SparseSimilarity& sim, const UtdConfig& config);

/// Monotone path through a similarity field; cells are (row, col).
struct AlignmentPath {
  std::vector<std::pair<int, int>> cells;
  double score = 0.0;  // alignment objective
};

/// Best monotone path with steps (1,0), (0,1), (1,1) over the cells of
/// `field` with |col - row - diagonal| <= band_width. Free start and end.
/// Objective: sum over cells of w * (similarity - offset), where w = 2 for the
/// first cell and for cells entered diagonally, 1 otherwise.
AlignmentPath local_align(const Matrix& field, int diagonal, int band_width, double offset);

/// Scores one path under the local_align objective (used by tests and oracles).
double alignment_objective(const Matrix& field, const std::vector<std::pair<int, int>>& cells, double offset);

/// Segmental DTW around a seed. The search region covers the seed rows
/// extended by band_width on either side and columns within band_width of the
/// seed diagonal. dtw_similarity = 1 - mean cosine distance along the path.
Match segmental_dtw(const FeatureMatrix& a, const FeatureMatrix& b, const DiagonalSeed& seed, int band_width,
                    double offset);
Match segmental_dtw_normalized(const std::string& utt_a, const Matrix& a_unit, const std::string& utt_b,
                               const Matrix& b_unit, const DiagonalSeed& seed, int band_width, double offset);

struct RescoreModel {
  std::vector<double> weights = std::vector<double>(kNumRescoreBands, 0.0);
  double bias = 0.0;
};

/// Counts of sparse entries inside the match rectangle in diagonal bands of
/// width 5 at offsets 0, +-5, +-10 (pooled over +-), divided by path length.
BandFeatures band_features(const Match& match, const SparseSimilarity& sim);
double rescore_features(const BandFeatures& features, const RescoreModel& model);
double rescore(const Match& match, const SparseSimilarity& sim, const RescoreModel& model);

struct LabeledPair {
  std::vector<double> features;
  bool same_word = false;
};

struct RescorerTrainConfig {
  int iterations = 2000;
  double learning_rate = 0.5;
  double l2 = 0.0;
};

/// Logistic regression by full-batch gradient descent on the mean log-loss,
/// starting from zero weights.
RescoreModel train_rescorer(const std::vector<LabeledPair>& pairs, const RescorerTrainConfig& config = {});

struct TermNode {
  std::string utterance_id;
  Span span;
  friend bool operator==(const TermNode&, const TermNode&) = default;
};

struct TermClusterSet {
  std::vector<std::vector<TermNode>> clusters;
};

/// Builds the segment graph (merging same-utterance segments with overlap
/// ratio > 0.5), drops edges below threshold and returns connected components.
TermClusterSet cluster_terms(const std::vector<Match>& matches, double edge_threshold, bool use_rescoring);

/// Node identities produced by cluster_terms before edge thresholding.
std::vector<TermNode> merge_nodes(const std::vector<Match>& matches);

/// Per document: term-category id -> occurrence count.
std::vector<std::map<int, int>> tokenize_documents_utd(const TermClusterSet& clusters, const Corpus& corpus);

/// All matches between distinct utterance pairs, reduced in sorted pair order.
std::vector<Match> find_matches(const Corpus& corpus, const UtdConfig& config, int workers = 1);

/// Fills rescored_similarity from the stored band features.
void apply_rescoring(std::vector<Match>& matches, const RescoreModel& model);

// JSON-lines serialization.
void write_matches(std::ostream& os, const std::vector<Match>& matches);
std::vector<Match> read_matches(std::istream& is);
void write_clusters(std::ostream& os, const TermClusterSet& clusters);
TermClusterSet read_clusters(std::istream& is);
void write_rescorer(std::ostream& os, const RescoreModel& model);
RescoreModel read_rescorer(std::istream& is);

}  // namespace zrtopic

#endif  // ZRTOPIC_UTD_H_
