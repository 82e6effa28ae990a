// zrtopic/corpus.h

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

#ifndef ZRTOPIC_CORPUS_H_
#define ZRTOPIC_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "zrtopic/common.h"

namespace zrtopic {

/// Acoustic features of one utterance, frames x dims.
struct FeatureMatrix {
  std::string utterance_id;
  double frame_period = 0.010;
  Matrix data;

  int num_frames() const { return static_cast<int>(data.rows()); }
  int dim() const { return static_cast<int>(data.cols()); }
};

// Binary feature files: "ZRF1", u32 frames, u32 dim, u32 id length, id bytes,
// then frames*dim little-endian doubles, row-major.
void write_features(std::ostream& os, const FeatureMatrix& features);
FeatureMatrix read_features(std::istream& is);
void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& features);
FeatureMatrix load_feature_file(const std::filesystem::path& path);

struct SingleLabel {
  int topic = 0;
};
struct MultiLabel {
  std::vector<int> labels;  // sorted, unique
};
using LabelSet = std::variant<SingleLabel, MultiLabel>;

struct SpokenDocument {
  std::string doc_id;
  std::vector<std::string> utterance_ids;
  LabelSet labels;
};

class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(int num_labels) : num_labels_(num_labels) {}

  void add_utterance(FeatureMatrix features);
  void add_document(SpokenDocument document);

  const std::vector<FeatureMatrix>& utterances() const { return utterances_; }
  const std::vector<SpokenDocument>& documents() const { return documents_; }
  const FeatureMatrix& utterance(const std::string& id) const;
  std::size_t utterance_index(const std::string& id) const;
  bool has_utterance(const std::string& id) const { return index_.count(id) > 0; }

  int num_labels() const { return num_labels_; }
  void set_num_labels(int k) { num_labels_ = k; }
  bool multi_label() const;
  int dim() const;
  long total_frames() const;

  /// Throws Error when a document references a missing utterance, feature
  /// dims disagree, values are non-finite or a label is out of range.
  void validate() const;

 private:
  int num_labels_ = 0;
  std::vector<FeatureMatrix> utterances_;
  std::vector<SpokenDocument> documents_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Single-label topic per document; throws on multi-label corpora.
std::vector<int> single_labels(const Corpus& corpus);
/// Binary docs x K relevance matrix (works for both label kinds).
std::vector<std::vector<int>> label_matrix(const Corpus& corpus);
/// Label used for fold stratification: the topic, or the smallest label.
std::vector<int> stratification_keys(const Corpus& corpus);
std::vector<std::string> document_ids(const Corpus& corpus);

/// Corpus manifest (JSON) with features stored next to it under feats/.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& manifest_path);

// ---------------------------------------------------------------------------
// Synthetic corpora with known unit sequences, topics and planted terms.

struct SyntheticSpec {
  int num_topics = 6;
  int num_latent_units = 40;
  int states_per_unit = 3;
  double topic_concentration = 0.2;  // symmetric Dirichlet over units per topic
  int docs_per_topic = 30;
  int utterances_per_doc = 1;
  int units_per_utterance = 40;
  int min_unit_frames = 6;
  int max_unit_frames = 12;
  int dim = 12;
  double emission_mean_scale = 1.0;
  double noise_std = 0.25;
  // Planted repeated terms: fixed frame templates shared by a topic.
  int terms_per_topic = 0;
  int term_units = 8;
  int min_term_frames = 60;
  int term_occurrences_per_doc = 0;
  // Multi-label mode: each document carries 1..max_labels_per_doc of the
  // first num_topics-1 topics, or only the last ("out-of-domain") one.
  bool multi_label = false;
  int max_labels_per_doc = 2;
  double out_of_domain_fraction = 0.25;
  double frame_period = 0.010;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

struct UnitToken {
  int unit = 0;
  int start = 0;  // inclusive frame
  int end = 0;    // inclusive frame
};

struct PlantedOccurrence {
  std::string utterance_id;
  int term = 0;
  int start = 0;
  int end = 0;
};

struct GroundTruth {
  std::map<std::string, std::vector<UnitToken>> units;  // per utterance
  std::vector<std::vector<int>> doc_labels;             // per document
  std::vector<PlantedOccurrence> planted;
  Matrix unit_means;  // (units * states) x dim
};

struct SyntheticCorpus {
  Corpus corpus;
  GroundTruth truth;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec);

}  // namespace zrtopic

#endif  // ZRTOPIC_CORPUS_H_
