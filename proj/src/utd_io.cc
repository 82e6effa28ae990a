// zrtopic/utd_io.cc

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

#include <istream>
#include <ostream>

#include "json.hpp"

#include "zrtopic/utd.h"

namespace zrtopic {

using nlohmann::json;

namespace {

json span_json(const Span& s) { return json::array({s.start, s.end}); }

Span span_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

template <class Fn>
void for_each_line(std::istream& is, Fn&& fn) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw Error("malformed JSON line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

void write_matches(std::ostream& os, const std::vector<Match>& matches) {
  for (const auto& m : matches) {
    json j;
    j["utt_a"] = m.utt_a;
    j["utt_b"] = m.utt_b;
    j["span_a"] = span_json(m.span_a);
    j["span_b"] = span_json(m.span_b);
    j["dtw_similarity"] = m.dtw_similarity;
    j["rescored_similarity"] = m.rescored_similarity ? json(*m.rescored_similarity) : json(nullptr);
    j["path_length"] = m.path_length;
    j["band_features"] = m.band_features;
    os << j.dump() << "\n";
  }
}

std::vector<Match> read_matches(std::istream& is) {
  std::vector<Match> out;
  for_each_line(is, [&](const json& j) {
    Match m;
    m.utt_a = j.at("utt_a").get<std::string>();
    m.utt_b = j.at("utt_b").get<std::string>();
    m.span_a = span_from(j.at("span_a"));
    m.span_b = span_from(j.at("span_b"));
    m.dtw_similarity = j.at("dtw_similarity").get<double>();
    if (j.contains("rescored_similarity") && !j.at("rescored_similarity").is_null())
      m.rescored_similarity = j.at("rescored_similarity").get<double>();
    m.path_length = j.value("path_length", 0);
    if (j.contains("band_features")) m.band_features = j.at("band_features").get<BandFeatures>();
    out.push_back(std::move(m));
  });
  return out;
}

void write_clusters(std::ostream& os, const TermClusterSet& clusters) {
  for (std::size_t c = 0; c < clusters.clusters.size(); ++c) {
    json nodes = json::array();
    for (const auto& n : clusters.clusters[c]) nodes.push_back({{"utt", n.utterance_id}, {"span", span_json(n.span)}});
    os << json{{"cluster", c}, {"nodes", nodes}}.dump() << "\n";
  }
}

TermClusterSet read_clusters(std::istream& is) {
  TermClusterSet out;
  for_each_line(is, [&](const json& j) {
    std::vector<TermNode> nodes;
    for (const auto& n : j.at("nodes")) nodes.push_back({n.at("utt").get<std::string>(), span_from(n.at("span"))});
    if (nodes.empty()) throw Error("cluster without nodes");
    out.clusters.push_back(std::move(nodes));
  });
  return out;
}

void write_rescorer(std::ostream& os, const RescoreModel& model) {
  os << json{{"weights", model.weights}, {"bias", model.bias}}.dump() << "\n";
}

RescoreModel read_rescorer(std::istream& is) {
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed rescorer file: ") + e.what());
  }
  RescoreModel m;
  m.weights = j.at("weights").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  if (m.weights.size() != kNumRescoreBands) throw Error("rescorer has wrong feature count");
  return m;
}

}  // namespace zrtopic
