// zrtopic/bow.cc

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
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "zrtopic/bow.h"

namespace zrtopic {

using nlohmann::json;

NgramCounts count_ngrams(const std::vector<int>& tokens, int n) {
  if (n < 1) throw Error("n-gram order must be >= 1");
  NgramCounts out;
  if (static_cast<int>(tokens.size()) < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) out[Ngram(tokens.begin() + i, tokens.begin() + i + n)] += 1.0;
  return out;
}

double dot(const SparseVector& x, const std::vector<double>& w) {
  double s = 0.0;
  for (const auto& [j, v] : x) s += v * w[j];
  return s;
}

double squared_norm(const SparseVector& x) {
  double s = 0.0;
  for (const auto& e : x) s += e.second * e.second;
  return s;
}

Vocabulary vocabulary_from_terms(std::vector<Ngram> terms, int order) {
  Vocabulary v;
  v.order_ = order;
  v.terms_ = std::move(terms);
  for (std::size_t i = 0; i < v.terms_.size(); ++i) {
    if (!v.index_.emplace(v.terms_[i], static_cast<int>(i)).second) throw Error("duplicate vocabulary entry");
  }
  return v;
}

Vocabulary Vocabulary::fit(const std::vector<NgramCounts>& docs, int order) {
  std::set<Ngram> all;
  for (const auto& d : docs)
    for (const auto& [g, c] : d)
      if (c > 0.0) all.insert(g);
  return vocabulary_from_terms(std::vector<Ngram>(all.begin(), all.end()), order);
}

std::optional<int> Vocabulary::lookup(const Ngram& g) const {
  auto it = index_.find(g);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<double> fit_idf(const Vocabulary& vocab, const std::vector<NgramCounts>& training_docs) {
  if (training_docs.empty()) throw Error("IDF needs at least one training document");
  std::vector<double> df(vocab.size(), 0.0);
  for (const auto& d : training_docs)
    for (const auto& [g, c] : d)
      if (c > 0.0)
        if (auto j = vocab.lookup(g)) df[*j] += 1.0;
  const double n = static_cast<double>(training_docs.size());
  std::vector<double> idf(vocab.size());
  for (int j = 0; j < vocab.size(); ++j) idf[j] = std::log((1.0 + n) / (1.0 + df[j])) + 1.0;
  return idf;
}

DocVector transform(const Vocabulary& vocab, const NgramCounts& counts, const std::vector<double>* idf, bool l2,
                    const std::string& doc_id) {
  DocVector out;
  out.doc_id = doc_id;
  for (const auto& [g, c] : counts) {
    if (c == 0.0) continue;
    if (auto j = vocab.lookup(g)) out.values.emplace_back(*j, idf ? c * (*idf)[*j] : c);
  }
  std::sort(out.values.begin(), out.values.end());
  if (l2) {
    const double norm = std::sqrt(squared_norm(out.values));
    if (norm > 0.0)
      for (auto& e : out.values) e.second /= norm;
  }
  return out;
}

BowFeaturizer BowFeaturizer::fit(const std::vector<NgramCounts>& training_docs, const BowConfig& config) {
  BowFeaturizer f;
  f.config = config;
  f.vocab = Vocabulary::fit(training_docs, config.order);
  if (config.use_idf) f.idf = fit_idf(f.vocab, training_docs);
  return f;
}

DocVector BowFeaturizer::transform(const NgramCounts& counts, const std::string& doc_id) const {
  return zrtopic::transform(vocab, counts, config.use_idf ? &idf : nullptr, config.l2_normalize, doc_id);
}

namespace {

std::unordered_map<std::string, const UnitSequence*> index_sequences(const std::vector<UnitSequence>& sequences) {
  std::unordered_map<std::string, const UnitSequence*> idx;
  for (const auto& s : sequences) idx[s.utterance_id] = &s;
  return idx;
}

const UnitSequence& find_sequence(const std::unordered_map<std::string, const UnitSequence*>& idx,
                                  const std::string& id) {
  auto it = idx.find(id);
  if (it == idx.end()) throw Error("no unit sequence for utterance " + id);
  return *it->second;
}

}  // namespace

std::vector<std::vector<int>> document_unit_sequences(const Corpus& corpus,
                                                      const std::vector<UnitSequence>& sequences) {
  const auto idx = index_sequences(sequences);
  std::vector<std::vector<int>> out;
  for (const auto& doc : corpus.documents()) {
    std::vector<int> units;
    for (const auto& u : doc.utterance_ids) {
      const auto ids = find_sequence(idx, u).unit_ids();
      units.insert(units.end(), ids.begin(), ids.end());
    }
    out.push_back(std::move(units));
  }
  return out;
}

std::vector<NgramCounts> document_ngram_counts(const Corpus& corpus, const std::vector<UnitSequence>& sequences,
                                               int order) {
  const auto idx = index_sequences(sequences);
  std::vector<NgramCounts> out;
  for (const auto& doc : corpus.documents()) {
    NgramCounts c;
    for (const auto& u : doc.utterance_ids)
      for (const auto& [g, n] : count_ngrams(find_sequence(idx, u).unit_ids(), order)) c[g] += n;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<NgramCounts> term_counts_to_ngrams(const std::vector<std::map<int, int>>& bags) {
  std::vector<NgramCounts> out;
  for (const auto& bag : bags) {
    NgramCounts c;
    for (const auto& [term, n] : bag) c[{term}] = n;
    out.push_back(std::move(c));
  }
  return out;
}

void write_featurizer(std::ostream& os, const BowFeaturizer& f) {
  json j;
  j["order"] = f.config.order;
  j["use_idf"] = f.config.use_idf;
  j["l2_normalize"] = f.config.l2_normalize;
  j["terms"] = f.vocab.terms();
  j["idf"] = f.idf;
  os << j.dump() << "\n";
}

BowFeaturizer read_featurizer(std::istream& is) {
  json j;
  try {
    is >> j;
    BowFeaturizer f;
    f.config.order = j.at("order").get<int>();
    f.config.use_idf = j.at("use_idf").get<bool>();
    f.config.l2_normalize = j.at("l2_normalize").get<bool>();
    f.vocab = vocabulary_from_terms(j.at("terms").get<std::vector<Ngram>>(), f.config.order);
    f.idf = j.at("idf").get<std::vector<double>>();
    if (f.config.use_idf && static_cast<int>(f.idf.size()) != f.vocab.size())
      throw Error("vocabulary file: idf length mismatch");
    return f;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed vocabulary file: ") + e.what());
  }
}

void write_doc_vectors(std::ostream& os, const std::vector<DocVector>& docs) {
  for (const auto& d : docs) os << json{{"doc_id", d.doc_id}, {"values", d.values}}.dump() << "\n";
}

std::vector<DocVector> read_doc_vectors(std::istream& is) {
  std::vector<DocVector> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      out.push_back({j.at("doc_id").get<std::string>(), j.at("values").get<SparseVector>()});
    } catch (const json::exception& e) {
      throw Error(std::string("malformed vector line: ") + e.what());
    }
  }
  return out;
}

void write_ngram_counts(std::ostream& os, const std::vector<std::string>& doc_ids,
                        const std::vector<NgramCounts>& counts) {
  if (doc_ids.size() != counts.size()) throw Error("count list does not match document list");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    json entries = json::array();
    for (const auto& [g, c] : counts[i]) entries.push_back({g, c});
    os << json{{"doc_id", doc_ids[i]}, {"counts", entries}}.dump() << "\n";
  }
}

std::vector<NgramCounts> read_ngram_counts(std::istream& is, std::vector<std::string>* doc_ids) {
  std::vector<NgramCounts> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      NgramCounts c;
      for (const auto& e : j.at("counts")) c[e.at(0).get<Ngram>()] = e.at(1).get<double>();
      if (doc_ids) doc_ids->push_back(j.at("doc_id").get<std::string>());
      out.push_back(std::move(c));
    } catch (const json::exception& e) {
      throw Error(std::string("malformed count line: ") + e.what());
    }
  }
  return out;
}

}  // namespace zrtopic
