// zrtopic/corpus.cc

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

#include "zrtopic/corpus.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "json.hpp"

#include "zrtopic/binary_io.h"

namespace zrtopic {

namespace fs = std::filesystem;
using nlohmann::json;

void write_features(std::ostream& os, const FeatureMatrix& features) {
  if (features.num_frames() < 1 || features.dim() < 1)
    throw Error("feature matrix must have at least one frame and one dim");
  os.write("ZRF1", 4);
  binio::write_u32(os, static_cast<std::uint32_t>(features.num_frames()));
  binio::write_u32(os, static_cast<std::uint32_t>(features.dim()));
  binio::write_u32(os, static_cast<std::uint32_t>(features.utterance_id.size()));
  os.write(features.utterance_id.data(), static_cast<std::streamsize>(features.utterance_id.size()));
  for (int r = 0; r < features.num_frames(); ++r)
    for (int c = 0; c < features.dim(); ++c) binio::write_f64(os, features.data(r, c));
  if (!os) throw Error("failed writing feature stream");
}

FeatureMatrix read_features(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || std::string(magic.data(), 4) != "ZRF1")
    throw Error("malformed header: bad magic");
  std::uint32_t frames = 0, dim = 0, id_len = 0;
  if (!binio::read_u32(is, frames) || !binio::read_u32(is, dim) || !binio::read_u32(is, id_len))
    throw Error("malformed header: truncated");
  if (frames == 0 || dim == 0) throw Error("malformed header: empty shape");
  if (id_len > (1u << 20)) throw Error("malformed header: id too long");
  FeatureMatrix out;
  out.utterance_id.resize(id_len);
  if (id_len > 0 && !is.read(out.utterance_id.data(), id_len))
    throw Error("malformed header: truncated id");
  out.data.resize(frames, dim);
  for (std::uint32_t r = 0; r < frames; ++r) {
    for (std::uint32_t c = 0; c < dim; ++c) {
      double v = 0.0;
      if (!binio::read_f64(is, v)) throw Error("shape mismatch: fewer values than declared");
      if (!std::isfinite(v)) throw Error("non-finite feature value");
      out.data(r, c) = v;
    }
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw Error("shape mismatch: trailing data after declared values");
  return out;
}

void write_feature_file(const fs::path& path, const FeatureMatrix& features) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path.string());
  write_features(os, features);
}

FeatureMatrix load_feature_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open feature file: " + path.string());
  return read_features(is);
}

void Corpus::add_utterance(FeatureMatrix features) {
  if (index_.count(features.utterance_id))
    throw Error("duplicate utterance id: " + features.utterance_id);
  index_.emplace(features.utterance_id, utterances_.size());
  utterances_.push_back(std::move(features));
}

void Corpus::add_document(SpokenDocument document) {
  documents_.push_back(std::move(document));
}

const FeatureMatrix& Corpus::utterance(const std::string& id) const {
  return utterances_[utterance_index(id)];
}

std::size_t Corpus::utterance_index(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error("unknown utterance: " + id);
  return it->second;
}

bool Corpus::multi_label() const {
  return !documents_.empty() && std::holds_alternative<MultiLabel>(documents_.front().labels);
}

int Corpus::dim() const { return utterances_.empty() ? 0 : utterances_.front().dim(); }

long Corpus::total_frames() const {
  long n = 0;
  for (const auto& u : utterances_) n += u.num_frames();
  return n;
}

void Corpus::validate() const {
  if (utterances_.empty()) throw Error("corpus has no utterances");
  const int d = dim();
  for (const auto& u : utterances_) {
    if (u.num_frames() < 1 || u.dim() < 1) throw Error("empty utterance: " + u.utterance_id);
    if (u.dim() != d) throw Error("feature dim mismatch in utterance " + u.utterance_id);
    if (!u.data.allFinite()) throw Error("non-finite feature value in " + u.utterance_id);
  }
  const bool multi = multi_label();
  for (const auto& doc : documents_) {
    if (doc.utterance_ids.empty()) throw Error("document without utterances: " + doc.doc_id);
    for (const auto& id : doc.utterance_ids)
      if (!has_utterance(id))
        throw Error("document " + doc.doc_id + " references missing utterance " + id);
    if (std::holds_alternative<MultiLabel>(doc.labels) != multi)
      throw Error("mixed single- and multi-label documents");
    if (const auto* s = std::get_if<SingleLabel>(&doc.labels)) {
      if (s->topic < 0 || s->topic >= num_labels_) throw Error("label out of range in " + doc.doc_id);
    } else {
      const auto& m = std::get<MultiLabel>(doc.labels).labels;
      if (m.empty()) throw Error("multi-label document without labels: " + doc.doc_id);
      for (int l : m)
        if (l < 0 || l >= num_labels_) throw Error("label out of range in " + doc.doc_id);
    }
  }
}

std::vector<int> single_labels(const Corpus& corpus) {
  std::vector<int> out;
  out.reserve(corpus.documents().size());
  for (const auto& doc : corpus.documents()) {
    const auto* s = std::get_if<SingleLabel>(&doc.labels);
    if (!s) throw Error("corpus is multi-label");
    out.push_back(s->topic);
  }
  return out;
}

std::vector<std::vector<int>> label_matrix(const Corpus& corpus) {
  std::vector<std::vector<int>> out;
  for (const auto& doc : corpus.documents()) {
    std::vector<int> row(corpus.num_labels(), 0);
    if (const auto* s = std::get_if<SingleLabel>(&doc.labels)) {
      row[s->topic] = 1;
    } else {
      for (int l : std::get<MultiLabel>(doc.labels).labels) row[l] = 1;
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<int> stratification_keys(const Corpus& corpus) {
  std::vector<int> out;
  for (const auto& doc : corpus.documents()) {
    if (const auto* s = std::get_if<SingleLabel>(&doc.labels))
      out.push_back(s->topic);
    else
      out.push_back(std::get<MultiLabel>(doc.labels).labels.front());
  }
  return out;
}

std::vector<std::string> document_ids(const Corpus& corpus) {
  std::vector<std::string> out;
  for (const auto& doc : corpus.documents()) out.push_back(doc.doc_id);
  return out;
}

void write_corpus(const fs::path& dir, const Corpus& corpus) {
  fs::create_directories(dir / "feats");
  json manifest;
  manifest["num_labels"] = corpus.num_labels();
  manifest["multi_label"] = corpus.multi_label();
  json docs = json::array();
  for (const auto& doc : corpus.documents()) {
    json d;
    d["doc_id"] = doc.doc_id;
    json utts = json::array();
    for (const auto& id : doc.utterance_ids) utts.push_back("feats/" + id + ".zrf");
    d["utterances"] = utts;
    if (const auto* s = std::get_if<SingleLabel>(&doc.labels))
      d["label"] = s->topic;
    else
      d["labels"] = std::get<MultiLabel>(doc.labels).labels;
    docs.push_back(std::move(d));
  }
  manifest["documents"] = docs;
  for (const auto& u : corpus.utterances())
    write_feature_file(dir / "feats" / (u.utterance_id + ".zrf"), u);
  std::ofstream os(dir / "corpus.json");
  if (!os) throw Error("cannot write corpus manifest in " + dir.string());
  os << manifest.dump(1) << "\n";
}

Corpus load_corpus(const fs::path& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw Error("cannot open corpus manifest: " + manifest_path.string());
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed corpus manifest: ") + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  Corpus corpus(manifest.at("num_labels").get<int>());
  std::map<std::string, std::string> path_to_id;
  for (const auto& d : manifest.at("documents")) {
    SpokenDocument doc;
    doc.doc_id = d.at("doc_id").get<std::string>();
    for (const auto& p : d.at("utterances")) {
      const std::string rel = p.get<std::string>();
      auto it = path_to_id.find(rel);
      if (it == path_to_id.end()) {
        const fs::path full = base / rel;
        if (!fs::exists(full)) throw Error("document " + doc.doc_id + " references missing utterance " + rel);
        FeatureMatrix f = load_feature_file(full);
        it = path_to_id.emplace(rel, f.utterance_id).first;
        corpus.add_utterance(std::move(f));
      }
      doc.utterance_ids.push_back(it->second);
    }
    if (d.contains("labels")) {
      MultiLabel m{d.at("labels").get<std::vector<int>>()};
      std::sort(m.labels.begin(), m.labels.end());
      m.labels.erase(std::unique(m.labels.begin(), m.labels.end()), m.labels.end());
      doc.labels = m;
    } else {
      doc.labels = SingleLabel{d.at("label").get<int>()};
    }
    corpus.add_document(std::move(doc));
  }
  corpus.validate();
  return corpus;
}

}  // namespace zrtopic
