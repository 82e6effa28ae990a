// zrtopic/bow.h

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

// Bag-of-n-gram document vectors: counting, vocabulary, smooth IDF and L2.

#ifndef ZRTOPIC_BOW_H_
#define ZRTOPIC_BOW_H_

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zrtopic/aud.h"
#include "zrtopic/corpus.h"

namespace zrtopic {

using Ngram = std::vector<int>;
using NgramCounts = std::map<Ngram, double>;

/// Counts of all contiguous n-grams; empty when the sequence is shorter than n.
NgramCounts count_ngrams(const std::vector<int>& tokens, int n);

/// Sparse vector: (column, value) pairs with strictly increasing columns.
using SparseVector = std::vector<std::pair<int, double>>;

struct DocVector {
  std::string doc_id;
  SparseVector values;
};

double dot(const SparseVector& x, const std::vector<double>& w);
double squared_norm(const SparseVector& x);

class Vocabulary {
 public:
  Vocabulary() = default;
  /// Columns in lexicographic n-gram order over everything seen in `docs`.
  static Vocabulary fit(const std::vector<NgramCounts>& docs, int order);

  int order() const { return order_; }
  int size() const { return static_cast<int>(terms_.size()); }
  std::optional<int> lookup(const Ngram& g) const;
  const std::vector<Ngram>& terms() const { return terms_; }

 private:
  int order_ = 1;
  std::vector<Ngram> terms_;
  std::map<Ngram, int> index_;

  friend Vocabulary vocabulary_from_terms(std::vector<Ngram> terms, int order);
};

Vocabulary vocabulary_from_terms(std::vector<Ngram> terms, int order);

/// idf(t) = ln((1 + N) / (1 + df(t))) + 1 over the training documents.
std::vector<double> fit_idf(const Vocabulary& vocab, const std::vector<NgramCounts>& training_docs);

/// tf (times idf when given), then L2 normalization when requested. Out of
/// vocabulary n-grams are dropped.
DocVector transform(const Vocabulary& vocab, const NgramCounts& counts, const std::vector<double>* idf, bool l2,
                    const std::string& doc_id = "");

struct BowConfig {
  int order = 3;
  bool use_idf = true;
  bool l2_normalize = true;
};

/// Vocabulary plus optional IDF fitted on one set of training documents.
struct BowFeaturizer {
  BowConfig config;
  Vocabulary vocab;
  std::vector<double> idf;  // empty when IDF is disabled

  static BowFeaturizer fit(const std::vector<NgramCounts>& training_docs, const BowConfig& config);
  DocVector transform(const NgramCounts& counts, const std::string& doc_id = "") const;
  int dim() const { return vocab.size(); }
};

/// Per-document concatenation of the unit ids of its utterances, in order.
std::vector<std::vector<int>> document_unit_sequences(const Corpus& corpus,
                                                      const std::vector<UnitSequence>& sequences);

/// Per-document n-gram counts; n-grams never span utterance boundaries.
std::vector<NgramCounts> document_ngram_counts(const Corpus& corpus, const std::vector<UnitSequence>& sequences,
                                               int order);

/// Unigram counts from per-document term-category bags.
std::vector<NgramCounts> term_counts_to_ngrams(const std::vector<std::map<int, int>>& bags);

// Serialization: vocabulary + idf as JSON, vectors and counts as JSON lines.
void write_featurizer(std::ostream& os, const BowFeaturizer& f);
BowFeaturizer read_featurizer(std::istream& is);
void write_doc_vectors(std::ostream& os, const std::vector<DocVector>& docs);
std::vector<DocVector> read_doc_vectors(std::istream& is);
void write_ngram_counts(std::ostream& os, const std::vector<std::string>& doc_ids,
                        const std::vector<NgramCounts>& counts);
std::vector<NgramCounts> read_ngram_counts(std::istream& is, std::vector<std::string>* doc_ids = nullptr);

}  // namespace zrtopic

#endif  // ZRTOPIC_BOW_H_
