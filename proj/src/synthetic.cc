// zrtopic/synthetic.cc

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
#include <cstdio>
#include <numeric>

#include "zrtopic/corpus.h"

namespace zrtopic {

void SyntheticSpec::validate() const {
  if (num_topics < 1 || num_latent_units < 1 || states_per_unit < 1 || docs_per_topic < 1 ||
      utterances_per_doc < 1 || units_per_utterance < 1 || dim < 1)
    throw Error("synthetic spec: counts must be positive");
  if (min_unit_frames < states_per_unit || max_unit_frames < min_unit_frames)
    throw Error("synthetic spec: unit frame range must cover every state");
  if (!(topic_concentration > 0.0)) throw Error("synthetic spec: concentration must be positive");
  if (!(noise_std > 0.0)) throw Error("synthetic spec: noise std must be positive");
  if (!(emission_mean_scale > 0.0)) throw Error("synthetic spec: mean scale must be positive");
  if (terms_per_topic < 0 || term_occurrences_per_doc < 0 || term_units < 1)
    throw Error("synthetic spec: term counts must be non-negative");
  if (term_occurrences_per_doc > 0 && terms_per_topic < 1)
    throw Error("synthetic spec: planted occurrences need at least one term per topic");
  if (multi_label && (num_topics < 2 || max_labels_per_doc < 1))
    throw Error("synthetic spec: multi-label mode needs >= 2 labels");
  if (!(frame_period > 0.0)) throw Error("synthetic spec: frame period must be positive");
}

namespace {

constexpr int kTermGap = 3;

struct Segment {
  int unit;
  int frames;  // total duration, split across states
};

std::vector<double> sample_dirichlet(Rng& rng, int n, double concentration) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> p(n);
  double total = 0.0;
  for (auto& v : p) total += (v = gamma(rng));
  if (!(total > 0.0)) return std::vector<double>(n, 1.0 / n);
  for (auto& v : p) v /= total;
  return p;
}

std::vector<int> state_durations(int frames, int states) {
  std::vector<int> d(states, frames / states);
  for (int s = 0; s < frames % states; ++s) ++d[s];
  return d;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> duration(spec.min_unit_frames, spec.max_unit_frames);
  std::uniform_real_distribution<double> unit_interval(0.0, 1.0);

  const int num_states = spec.num_latent_units * spec.states_per_unit;
  SyntheticCorpus out{Corpus(spec.num_topics), {}};
  GroundTruth& truth = out.truth;
  truth.unit_means.resize(num_states, spec.dim);
  for (int r = 0; r < num_states; ++r)
    for (int c = 0; c < spec.dim; ++c) truth.unit_means(r, c) = spec.emission_mean_scale * normal(rng);

  std::vector<std::discrete_distribution<int>> topic_units;
  for (int t = 0; t < spec.num_topics; ++t) {
    auto p = sample_dirichlet(rng, spec.num_latent_units, spec.topic_concentration);
    topic_units.emplace_back(p.begin(), p.end());
  }

  // Term templates: a fixed unit sequence with fixed durations per topic term.
  std::vector<std::vector<Segment>> terms;
  for (int t = 0; t < spec.num_topics; ++t) {
    for (int k = 0; k < spec.terms_per_topic; ++k) {
      std::vector<Segment> term;
      int frames = 0;
      while (static_cast<int>(term.size()) < spec.term_units || frames < spec.min_term_frames) {
        Segment s{topic_units[t](rng), duration(rng)};
        frames += s.frames;
        term.push_back(s);
      }
      terms.push_back(std::move(term));
    }
  }

  auto render = [&](const Segment& seg, int unit_start, std::vector<Vector>& frames,
                    std::vector<UnitToken>& tokens) {
    const auto durations = state_durations(seg.frames, spec.states_per_unit);
    for (int s = 0; s < spec.states_per_unit; ++s) {
      const auto mean = truth.unit_means.row(seg.unit * spec.states_per_unit + s);
      for (int f = 0; f < durations[s]; ++f) {
        Vector x(spec.dim);
        for (int c = 0; c < spec.dim; ++c) x[c] = mean[c] + spec.noise_std * normal(rng);
        frames.push_back(std::move(x));
      }
    }
    tokens.push_back({seg.unit, unit_start, unit_start + seg.frames - 1});
  };

  const int in_domain = spec.multi_label ? spec.num_topics - 1 : spec.num_topics;
  int doc_counter = 0;
  for (int t = 0; t < spec.num_topics; ++t) {
    for (int d = 0; d < spec.docs_per_topic; ++d, ++doc_counter) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "doc%04d", doc_counter);
      SpokenDocument doc;
      doc.doc_id = buf;

      std::vector<int> labels;
      if (!spec.multi_label) {
        labels = {t};
        doc.labels = SingleLabel{t};
      } else {
        if (unit_interval(rng) < spec.out_of_domain_fraction) {
          labels = {spec.num_topics - 1};
        } else {
          std::uniform_int_distribution<int> pick(0, in_domain - 1);
          std::uniform_int_distribution<int> count(1, std::min(spec.max_labels_per_doc, in_domain));
          const int n = count(rng);
          while (static_cast<int>(labels.size()) < n) {
            const int l = pick(rng);
            if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
          }
          std::sort(labels.begin(), labels.end());
        }
        doc.labels = MultiLabel{labels};
      }
      truth.doc_labels.push_back(labels);

      // Token plan per utterance; negative entries mark planted term indices.
      std::vector<std::vector<int>> plan(spec.utterances_per_doc);
      std::uniform_int_distribution<int> label_pick(0, static_cast<int>(labels.size()) - 1);
      for (auto& utt : plan)
        for (int k = 0; k < spec.units_per_utterance; ++k) utt.push_back(topic_units[labels[label_pick(rng)]](rng));
      if (spec.terms_per_topic > 0) {
        std::uniform_int_distribution<int> utt_pick(0, spec.utterances_per_doc - 1);
        std::uniform_int_distribution<int> term_pick(0, spec.terms_per_topic - 1);
        for (int k = 0; k < spec.term_occurrences_per_doc; ++k) {
          auto& utt = plan[utt_pick(rng)];
          const int term = labels[label_pick(rng)] * spec.terms_per_topic + term_pick(rng);
          // Keep at least kTermGap regular units between planted terms.
          const int size = static_cast<int>(utt.size());
          std::vector<int> gaps;
          for (int p = 0; p <= size; ++p) {
            bool clear = true;
            for (int q = std::max(0, p - kTermGap); q < std::min(size, p + kTermGap); ++q) clear = clear && utt[q] >= 0;
            if (clear) gaps.push_back(p);
          }
          if (gaps.empty()) throw Error("synthetic spec: too many planted terms per utterance");
          std::uniform_int_distribution<std::size_t> pos(0, gaps.size() - 1);
          utt.insert(utt.begin() + gaps[pos(rng)], -1 - term);
        }
      }

      for (int u = 0; u < spec.utterances_per_doc; ++u) {
        FeatureMatrix fm;
        fm.utterance_id = doc.doc_id + "_u" + std::to_string(u);
        fm.frame_period = spec.frame_period;
        std::vector<Vector> frames;
        std::vector<UnitToken> tokens;
        for (int item : plan[u]) {
          if (item >= 0) {
            render({item, duration(rng)}, static_cast<int>(frames.size()), frames, tokens);
          } else {
            const int term = -1 - item;
            const int start = static_cast<int>(frames.size());
            for (const auto& seg : terms[term]) render(seg, static_cast<int>(frames.size()), frames, tokens);
            truth.planted.push_back({fm.utterance_id, term, start, static_cast<int>(frames.size()) - 1});
          }
        }
        fm.data.resize(static_cast<Eigen::Index>(frames.size()), spec.dim);
        for (std::size_t r = 0; r < frames.size(); ++r) fm.data.row(r) = frames[r].transpose();
        truth.units[fm.utterance_id] = std::move(tokens);
        doc.utterance_ids.push_back(fm.utterance_id);
        out.corpus.add_utterance(std::move(fm));
      }
      out.corpus.add_document(std::move(doc));
    }
  }
  out.corpus.validate();
  return out;
}

}  // namespace zrtopic
