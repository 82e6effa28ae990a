// zrtopic/pipeline.cc

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

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "zrtopic/pipeline.h"

namespace zrtopic {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Reads the keys of one config section, rejecting any it does not know.
class Section {
 public:
  Section(const json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) return;
    node_ = &root.at(name);
    if (!node_->is_object()) throw Error("config: section " + name + " must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& value) {
    known_.insert(key);
    if (node_ && node_->contains(key)) value = node_->at(key).get<T>();
  }

  void finish() const {
    if (!node_) return;
    for (const auto& item : node_->items())
      if (!known_.count(item.key())) throw Error("config: unknown key " + name_ + "." + item.key());
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> known_;
};

const std::set<std::string> kTopLevel = {"seed", "corpus", "rescorer", "synth", "utd", "aud",
                                         "bow",  "embed",  "cnn",      "svm",   "eval"};

json config_to_json(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  if (c.corpus) j["corpus"] = c.corpus->string();
  if (c.rescorer) j["rescorer"] = c.rescorer->string();
  const auto& s = c.synth;
  j["synth"] = {{"num_topics", s.num_topics},
                {"num_latent_units", s.num_latent_units},
                {"states_per_unit", s.states_per_unit},
                {"topic_concentration", s.topic_concentration},
                {"docs_per_topic", s.docs_per_topic},
                {"utterances_per_doc", s.utterances_per_doc},
                {"units_per_utterance", s.units_per_utterance},
                {"min_unit_frames", s.min_unit_frames},
                {"max_unit_frames", s.max_unit_frames},
                {"dim", s.dim},
                {"emission_mean_scale", s.emission_mean_scale},
                {"noise_std", s.noise_std},
                {"terms_per_topic", s.terms_per_topic},
                {"term_units", s.term_units},
                {"min_term_frames", s.min_term_frames},
                {"term_occurrences_per_doc", s.term_occurrences_per_doc},
                {"multi_label", s.multi_label},
                {"max_labels_per_doc", s.max_labels_per_doc},
                {"out_of_domain_fraction", s.out_of_domain_fraction},
                {"frame_period", s.frame_period}};
  const auto& u = c.utd;
  j["utd"] = {{"cosine_threshold", u.cosine_threshold},
              {"median_filter_duration", u.median_filter_duration},
              {"min_match_duration", u.min_match_duration},
              {"graph_edge_threshold", u.graph_edge_threshold},
              {"use_rescoring", u.use_rescoring},
              {"dtw_band_width", u.dtw_band_width},
              {"alignment_offset", u.alignment_offset},
              {"frame_period", u.frame_period}};
  const auto& a = c.aud;
  j["aud"] = {{"truncation", a.truncation},
              {"states_per_unit", a.states_per_unit},
              {"gaussians_per_state", a.gaussians_per_state},
              {"concentration", a.concentration},
              {"training_iterations", a.training_iterations}};
  j["bow"] = {{"order", c.bow.order}, {"use_idf", c.bow.use_idf}, {"l2_normalize", c.bow.l2_normalize}};
  const auto& e = c.embed;
  j["embed"] = {{"dim", e.dim},
                {"window", e.window},
                {"epochs", e.epochs},
                {"initial_learning_rate", e.initial_learning_rate},
                {"final_learning_rate", e.final_learning_rate},
                {"decay", e.decay}};
  const auto& n = c.cnn;
  j["cnn"] = {{"embed_dim", n.embed_dim},
              {"window", n.window},
              {"conv_units", n.conv_units},
              {"hidden_units", n.hidden_units},
              {"dropout", n.dropout},
              {"batch_size", n.batch_size},
              {"max_epochs", n.max_epochs},
              {"head", n.head == CnnHead::kSoftmax ? "softmax" : "sigmoid"},
              {"rho", n.rho},
              {"epsilon", n.epsilon},
              {"select_on_validation_ap", n.select_on_validation_ap}};
  j["svm"] = {{"penalty", c.svm.penalty == Penalty::kL1 ? "l1" : "l2"},
              {"alpha", c.svm.alpha},
              {"epochs", c.svm.epochs}};
  j["eval"] = {{"folds", c.eval.folds},
               {"repeats", c.eval.repeats},
               {"tokens", c.eval.tokens},
               {"classifier", c.eval.classifier},
               {"pretrained", c.eval.pretrained},
               {"configuration", c.eval.configuration}};
  return j;
}

}  // namespace

void PipelineConfig::validate() const {
  synth.validate();
  utd.validate();
  aud.validate();
  embed.validate();
  cnn.validate();
  svm.validate();
  if (bow.order < 1) throw Error("config: bow.order must be >= 1");
  if (eval.folds < 2) throw Error("config: eval.folds must be >= 2");
  if (eval.repeats < 1) throw Error("config: eval.repeats must be >= 1");
  if (eval.tokens != "aud" && eval.tokens != "utd") throw Error("config: eval.tokens must be aud or utd");
  if (eval.classifier != "svm" && eval.classifier != "cnn") throw Error("config: eval.classifier must be svm or cnn");
  if (eval.classifier == "cnn" && eval.tokens != "aud") throw Error("config: the cnn classifier needs aud tokens");
  if (eval.pretrained && embed.dim != cnn.embed_dim) throw Error("config: embed.dim must equal cnn.embed_dim");
  if (utd.use_rescoring && !rescorer) throw Error("config: utd.use_rescoring needs a rescorer path");
}

PipelineConfig parse_pipeline_config(const std::string& json_text) {
  PipelineConfig c;
  try {
    const json j = json::parse(json_text);
    if (!j.is_object()) throw Error("config: top level must be an object");
    for (const auto& item : j.items())
      if (!kTopLevel.count(item.key())) throw Error("config: unknown key " + item.key());
    if (!j.contains("seed")) throw Error("config: seed is mandatory");
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("corpus")) c.corpus = j.at("corpus").get<std::string>();
    if (j.contains("rescorer")) c.rescorer = j.at("rescorer").get<std::string>();

    Section s(j, "synth");
    s.get("num_topics", c.synth.num_topics);
    s.get("num_latent_units", c.synth.num_latent_units);
    s.get("states_per_unit", c.synth.states_per_unit);
    s.get("topic_concentration", c.synth.topic_concentration);
    s.get("docs_per_topic", c.synth.docs_per_topic);
    s.get("utterances_per_doc", c.synth.utterances_per_doc);
    s.get("units_per_utterance", c.synth.units_per_utterance);
    s.get("min_unit_frames", c.synth.min_unit_frames);
    s.get("max_unit_frames", c.synth.max_unit_frames);
    s.get("dim", c.synth.dim);
    s.get("emission_mean_scale", c.synth.emission_mean_scale);
    s.get("noise_std", c.synth.noise_std);
    s.get("terms_per_topic", c.synth.terms_per_topic);
    s.get("term_units", c.synth.term_units);
    s.get("min_term_frames", c.synth.min_term_frames);
    s.get("term_occurrences_per_doc", c.synth.term_occurrences_per_doc);
    s.get("multi_label", c.synth.multi_label);
    s.get("max_labels_per_doc", c.synth.max_labels_per_doc);
    s.get("out_of_domain_fraction", c.synth.out_of_domain_fraction);
    s.get("frame_period", c.synth.frame_period);
    s.finish();

    Section u(j, "utd");
    u.get("cosine_threshold", c.utd.cosine_threshold);
    u.get("median_filter_duration", c.utd.median_filter_duration);
    u.get("min_match_duration", c.utd.min_match_duration);
    u.get("graph_edge_threshold", c.utd.graph_edge_threshold);
    u.get("use_rescoring", c.utd.use_rescoring);
    u.get("dtw_band_width", c.utd.dtw_band_width);
    u.get("alignment_offset", c.utd.alignment_offset);
    u.get("frame_period", c.utd.frame_period);
    u.finish();

    Section a(j, "aud");
    a.get("truncation", c.aud.truncation);
    a.get("states_per_unit", c.aud.states_per_unit);
    a.get("gaussians_per_state", c.aud.gaussians_per_state);
    a.get("concentration", c.aud.concentration);
    a.get("training_iterations", c.aud.training_iterations);
    a.finish();

    Section b(j, "bow");
    b.get("order", c.bow.order);
    b.get("use_idf", c.bow.use_idf);
    b.get("l2_normalize", c.bow.l2_normalize);
    b.finish();

    Section e(j, "embed");
    e.get("dim", c.embed.dim);
    e.get("window", c.embed.window);
    e.get("epochs", c.embed.epochs);
    e.get("initial_learning_rate", c.embed.initial_learning_rate);
    e.get("final_learning_rate", c.embed.final_learning_rate);
    e.get("decay", c.embed.decay);
    e.finish();

    Section n(j, "cnn");
    std::string head = c.cnn.head == CnnHead::kSoftmax ? "softmax" : "sigmoid";
    n.get("embed_dim", c.cnn.embed_dim);
    n.get("window", c.cnn.window);
    n.get("conv_units", c.cnn.conv_units);
    n.get("hidden_units", c.cnn.hidden_units);
    n.get("dropout", c.cnn.dropout);
    n.get("batch_size", c.cnn.batch_size);
    n.get("max_epochs", c.cnn.max_epochs);
    n.get("head", head);
    n.get("rho", c.cnn.rho);
    n.get("epsilon", c.cnn.epsilon);
    n.get("select_on_validation_ap", c.cnn.select_on_validation_ap);
    n.finish();
    if (head != "softmax" && head != "sigmoid") throw Error("config: cnn.head must be softmax or sigmoid");
    c.cnn.head = head == "softmax" ? CnnHead::kSoftmax : CnnHead::kSigmoid;

    Section v(j, "svm");
    std::string penalty = c.svm.penalty == Penalty::kL1 ? "l1" : "l2";
    v.get("penalty", penalty);
    v.get("alpha", c.svm.alpha);
    v.get("epochs", c.svm.epochs);
    v.finish();
    if (penalty != "l1" && penalty != "l2") throw Error("config: svm.penalty must be l1 or l2");
    c.svm.penalty = penalty == "l1" ? Penalty::kL1 : Penalty::kL2;

    Section ev(j, "eval");
    ev.get("folds", c.eval.folds);
    ev.get("repeats", c.eval.repeats);
    ev.get("tokens", c.eval.tokens);
    ev.get("classifier", c.eval.classifier);
    ev.get("pretrained", c.eval.pretrained);
    ev.get("configuration", c.eval.configuration);
    ev.finish();
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  c.validate();
  derive_stage_seeds(c);
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("missing input: " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_pipeline_config(buf.str());
}

std::string canonical_config_json(const PipelineConfig& config) { return config_to_json(config).dump(); }

void derive_stage_seeds(PipelineConfig& c) {
  c.synth.rng_seed = derive_seed(c.seed, "synth");
  c.aud.rng_seed = derive_seed(c.seed, "aud");
  c.embed.rng_seed = derive_seed(c.seed, "embed");
  c.cnn.rng_seed = derive_seed(c.seed, "cnn");
  c.svm.rng_seed = derive_seed(c.seed, "svm");
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"synth",     "utd",   "aud-train", "aud-decode", "featurize",
                                                 "embed",     "train-svm", "train-cnn", "evaluate", "curve"};
  return names;
}

std::string file_sha256(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("missing input: " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return sha256_hex(buf.str());
}

namespace {

// Paths of one run directory.
struct Run {
  const PipelineConfig& config;
  fs::path out;
  int workers;

  fs::path at(const std::string& rel) const { return out / rel; }
  fs::path corpus_path() const { return config.corpus ? *config.corpus : at("corpus/corpus.json"); }

  // Manifest keys: run-relative paths for files inside the run directory.
  std::string key(const fs::path& p) const {
    const auto rel = p.lexically_relative(out);
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return p.generic_string();
  }
};

void require(const fs::path& p) {
  if (!fs::exists(p)) throw Error("missing input: " + p.string());
}

std::ofstream open_output(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

void write_manifest(const Run& run, const std::string& stage, const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs) {
  const json cfg = config_to_json(run.config);
  json m;
  m["stage"] = stage;
  m["config"] = cfg;
  m["config_sha256"] = sha256_hex(cfg.dump());
  m["inputs"] = json::object();
  for (const auto& p : inputs) m["inputs"][run.key(p)] = file_sha256(p);
  m["outputs"] = json::object();
  for (const auto& p : outputs) m["outputs"][run.key(p)] = file_sha256(p);
  auto os = open_output(run.at("manifests/" + stage + ".json"));
  os << m.dump(1) << "\n";
}

// Checks that `file` is byte-identical to what `stage` recorded producing.
void verify_artifact(const Run& run, const std::string& stage, const fs::path& file) {
  require(file);
  const fs::path manifest = run.at("manifests/" + stage + ".json");
  require(manifest);
  std::ifstream is(manifest);
  json m;
  try {
    is >> m;
  } catch (const json::exception&) {
    throw Error("artifact mismatch: unreadable manifest " + manifest.string());
  }
  const auto& outputs = m.at("outputs");
  const std::string key = run.key(file);
  if (!outputs.contains(key) || outputs.at(key).get<std::string>() != file_sha256(file))
    throw Error("artifact mismatch: " + key);
}

// Checks that `file` is what `stage` consumed when it ran.
void verify_consumed(const Run& run, const std::string& stage, const fs::path& file) {
  std::ifstream is(run.at("manifests/" + stage + ".json"));
  json m;
  is >> m;
  const std::string key = run.key(file);
  const auto& inputs = m.at("inputs");
  if (!inputs.contains(key) || inputs.at(key).get<std::string>() != file_sha256(file))
    throw Error("artifact mismatch: " + key + " changed since " + stage);
}

Corpus load_run_corpus(const Run& run) {
  require(run.corpus_path());
  Corpus corpus = load_corpus(run.corpus_path());
  corpus.validate();
  return corpus;
}

std::vector<UnitSequence> load_units(const Run& run) {
  const fs::path p = run.at("aud/units.jsonl");
  verify_artifact(run, "aud-decode", p);
  std::ifstream is(p);
  return read_unit_sequences(is);
}

void write_csv_rows(std::ostream& os, const std::string& header, const std::vector<double>& values) {
  os << header << "\n";
  for (std::size_t i = 0; i < values.size(); ++i) os << i + 1 << "," << format_double(values[i]) << "\n";
}

void stage_synth(const Run& run) {
  const auto sc = generate_synthetic_corpus(run.config.synth);
  const fs::path dir = run.at("corpus");
  fs::create_directories(dir);
  write_corpus(dir, sc.corpus);
  const fs::path truth = run.at("truth/planted.jsonl");
  {
    auto os = open_output(truth);
    for (const auto& p : sc.truth.planted)
      os << json{{"utterance_id", p.utterance_id}, {"term", p.term}, {"start", p.start}, {"end", p.end}}.dump()
         << "\n";
  }
  std::vector<fs::path> outputs = {dir / "corpus.json", truth};
  write_manifest(run, "synth", {}, outputs);
}

void stage_utd(const Run& run) {
  const Corpus corpus = load_run_corpus(run);
  const auto& cfg = run.config.utd;
  auto matches = find_matches(corpus, cfg, run.workers);
  std::vector<fs::path> inputs = {run.corpus_path()};
  if (cfg.use_rescoring) {
    require(*run.config.rescorer);
    std::ifstream is(*run.config.rescorer);
    apply_rescoring(matches, read_rescorer(is));
    inputs.push_back(*run.config.rescorer);
  }
  const auto clusters = cluster_terms(matches, cfg.graph_edge_threshold, cfg.use_rescoring);
  const auto counts = term_counts_to_ngrams(tokenize_documents_utd(clusters, corpus));
  const fs::path m = run.at("utd/matches.jsonl"), c = run.at("utd/clusters.jsonl"), t = run.at("utd/terms.jsonl");
  {
    auto os = open_output(m);
    write_matches(os, matches);
  }
  {
    auto os = open_output(c);
    write_clusters(os, clusters);
  }
  {
    auto os = open_output(t);
    write_ngram_counts(os, document_ids(corpus), counts);
  }
  write_manifest(run, "utd", inputs, {m, c, t});
}

void stage_aud_train(const Run& run) {
  const Corpus corpus = load_run_corpus(run);
  PhoneLoopModel model = init_model(run.config.aud, compute_corpus_stats(corpus));
  const VbTrace trace = vb_train(model, corpus, run.config.aud.training_iterations, run.workers);
  const fs::path mp = run.at("aud/model.bin"), ep = run.at("aud/elbo.csv");
  {
    auto os = open_output(mp);
    write_model(os, model);
  }
  {
    auto os = open_output(ep);
    write_csv_rows(os, "iteration,elbo", trace.elbo);
  }
  write_manifest(run, "aud-train", {run.corpus_path()}, {mp, ep});
}

void stage_aud_decode(const Run& run) {
  const Corpus corpus = load_run_corpus(run);
  const fs::path mp = run.at("aud/model.bin");
  verify_artifact(run, "aud-train", mp);
  std::ifstream is(mp, std::ios::binary);
  const PhoneLoopModel model = read_model(is);
  const auto units = tokenize_corpus_aud(model, corpus, run.workers);
  const fs::path up = run.at("aud/units.jsonl");
  {
    auto os = open_output(up);
    write_unit_sequences(os, units);
  }
  write_manifest(run, "aud-decode", {run.corpus_path(), mp}, {up});
}

BowConfig effective_bow(const PipelineConfig& config) {
  BowConfig b = config.bow;
  if (config.eval.tokens == "utd") b.order = 1;  // term categories are counted as unigrams
  return b;
}

fs::path token_source(const Run& run) {
  return run.config.eval.tokens == "aud" ? run.at("aud/units.jsonl") : run.at("utd/terms.jsonl");
}

void stage_featurize(const Run& run) {
  const Corpus corpus = load_run_corpus(run);
  const fs::path source = token_source(run);
  std::vector<NgramCounts> counts;
  if (run.config.eval.tokens == "aud") {
    if (!fs::exists(source)) run_stage("aud-decode", run.config, run.out, run.workers);
    counts = document_ngram_counts(corpus, load_units(run), run.config.bow.order);
  } else {
    verify_artifact(run, "utd", source);
    std::ifstream is(source);
    std::vector<std::string> ids;
    counts = read_ngram_counts(is, &ids);
    if (ids != document_ids(corpus)) throw Error("artifact mismatch: utd/terms.jsonl documents");
  }
  const auto featurizer = BowFeaturizer::fit(counts, effective_bow(run.config));
  const fs::path cp = run.at("features/counts.jsonl"), vp = run.at("features/vocab.json");
  {
    auto os = open_output(cp);
    write_ngram_counts(os, document_ids(corpus), counts);
  }
  {
    auto os = open_output(vp);
    write_featurizer(os, featurizer);
  }
  write_manifest(run, "featurize", {run.corpus_path(), source}, {cp, vp});
}

// Counts and vocabulary after checking both against the featurize manifest
// and the token file it consumed.
std::vector<NgramCounts> load_counts(const Run& run, const Corpus& corpus, std::vector<fs::path>* inputs) {
  const fs::path cp = run.at("features/counts.jsonl"), vp = run.at("features/vocab.json");
  if (!fs::exists(cp) || !fs::exists(vp)) run_stage("featurize", run.config, run.out, run.workers);
  verify_artifact(run, "featurize", vp);
  verify_artifact(run, "featurize", cp);
  verify_consumed(run, "featurize", token_source(run));
  std::ifstream is(cp);
  std::vector<std::string> ids;
  auto counts = read_ngram_counts(is, &ids);
  if (ids != document_ids(corpus)) throw Error("artifact mismatch: features/counts.jsonl documents");
  inputs->push_back(cp);
  inputs->push_back(vp);
  return counts;
}

void stage_embed(const Run& run) {
  const Corpus corpus = load_run_corpus(run);
  const auto docs = document_unit_sequences(corpus, load_units(run));
  const EmbeddingTable table = train_skipgram(docs, run.config.embed);
  const fs::path ep = run.at("embed/embeddings.txt"), lp = run.at("embed/loss.csv");
  {
    auto os = open_output(ep);
    write_embeddings(os, table);
  }
  {
    auto os = open_output(lp);
    write_csv_rows(os, "epoch,loss", table.epoch_loss);
  }
  write_manifest(run, "embed", {run.corpus_path(), run.at("aud/units.jsonl")}, {ep, lp});
}

void stage_train_svm(const Run& run) {
  const Corpus corpus = load_run_corpus(run);
  std::vector<fs::path> inputs = {run.corpus_path()};
  const auto counts = load_counts(run, corpus, &inputs);
  std::ifstream is(run.at("features/vocab.json"));
  const BowFeaturizer featurizer = read_featurizer(is);
  std::vector<SparseVector> X;
  for (const auto& c : counts) X.push_back(featurizer.transform(c).values);
  const LabelData labels = label_data(corpus);
  const auto models = labels.multi_label
                          ? train_binary_relevance(X, featurizer.dim(), labels.binary, run.config.svm, run.workers)
                          : train_multiclass_ovr(X, featurizer.dim(), labels.single, labels.num_labels,
                                                 run.config.svm, run.workers);
  const fs::path mp = run.at("svm/models.json");
  {
    auto os = open_output(mp);
    write_svm_models(os, models, run.config.svm);
  }
  write_manifest(run, "train-svm", inputs, {mp});
}

struct CnnInputs {
  UnitIndex index;
  std::vector<std::vector<int>> sequences;  // encoded, per document
  Matrix pretrained;
};

CnnInputs load_cnn_inputs(const Run& run, const Corpus& corpus, std::vector<fs::path>* inputs) {
  CnnInputs in;
  const auto docs = document_unit_sequences(corpus, load_units(run));
  inputs->push_back(run.at("aud/units.jsonl"));
  in.index = UnitIndex::build(docs);
  for (const auto& d : docs) in.sequences.push_back(in.index.encode(d));
  if (run.config.eval.pretrained) {
    const fs::path ep = run.at("embed/embeddings.txt");
    if (!fs::exists(ep)) run_stage("embed", run.config, run.out, run.workers);
    verify_artifact(run, "embed", ep);
    verify_consumed(run, "embed", run.at("aud/units.jsonl"));
    std::ifstream is(ep);
    in.pretrained = export_for_cnn(read_embeddings(is), in.index.units, run.config.cnn.embed_dim,
                                   derive_seed(run.config.seed, "embed-export"));
    inputs->push_back(ep);
  }
  return in;
}

void stage_train_cnn(const Run& run) {
  const Corpus corpus = load_run_corpus(run);
  std::vector<fs::path> inputs = {run.corpus_path()};
  const CnnInputs in = load_cnn_inputs(run, corpus, &inputs);
  const LabelData labels = label_data(corpus);
  CnnDataset data;
  data.sequences = in.sequences;
  data.targets = Matrix::Zero(static_cast<Eigen::Index>(in.sequences.size()), labels.num_labels);
  for (std::size_t d = 0; d < in.sequences.size(); ++d) {
    data.max_len = std::max(data.max_len, static_cast<int>(in.sequences[d].size()));
    for (int k = 0; k < labels.num_labels; ++k) data.targets(d, k) = labels.binary[d][k];
  }
  const CnnModel init = init_cnn(run.config.cnn, in.index.size(), labels.num_labels, in.pretrained);
  const CnnTrainResult result = train_cnn(init, data, nullptr, run.workers);
  const fs::path mp = run.at("cnn/model.bin"), lp = run.at("cnn/log.csv"), up = run.at("cnn/units.json");
  {
    auto os = open_output(mp);
    write_cnn(os, result.model);
  }
  {
    auto os = open_output(lp);
    write_training_log(os, result.log);
  }
  {
    auto os = open_output(up);
    os << json{{"units", in.index.units}}.dump() << "\n";
  }
  write_manifest(run, "train-cnn", inputs, {mp, lp, up});
}

FoldPlan run_fold_plan(const Run& run, const Corpus& corpus) {
  return make_folds(document_ids(corpus), stratification_keys(corpus), run.config.eval.folds,
                    derive_seed(run.config.seed, "folds"));
}

void stage_evaluate(const Run& run) {
  const Corpus corpus = load_run_corpus(run);
  const auto& cfg = run.config;
  const LabelData labels = label_data(corpus);
  const FoldPlan plan = run_fold_plan(run, corpus);
  std::vector<fs::path> inputs = {run.corpus_path()};
  std::vector<CvOutcome> outcomes;
  std::function<CvOutcome(std::uint64_t)> experiment;

  std::vector<NgramCounts> counts;
  CnnInputs cnn_in;
  if (cfg.eval.classifier == "svm") {
    counts = load_counts(run, corpus, &inputs);
    experiment = [&](std::uint64_t seed) {
      SvmExperiment exp{effective_bow(cfg), cfg.svm};
      exp.svm.rng_seed = seed;
      outcomes.push_back(run_cv_svm(counts, labels, plan, exp, run.workers));
      return outcomes.back();
    };
  } else {
    if (!fs::exists(run.at("aud/units.jsonl"))) run_stage("aud-decode", cfg, run.out, run.workers);
    cnn_in = load_cnn_inputs(run, corpus, &inputs);
    experiment = [&](std::uint64_t seed) {
      CnnExperiment exp{cfg.cnn, cnn_in.pretrained};
      exp.cnn.rng_seed = seed;
      outcomes.push_back(run_cv_cnn(cnn_in.sequences, cnn_in.index.size(), labels, plan, exp, run.workers));
      return outcomes.back();
    };
  }
  const RepeatedResult summary = repeat_experiment(experiment, cfg.eval.repeats, derive_seed(cfg.seed, "repeats"));

  const fs::path rp = run.at("results/results.csv"), sp = run.at("results/summary.json");
  {
    auto os = open_output(rp);
    write_cv_csv(os, cfg.eval.configuration, outcomes, summary);
  }
  json s;
  s["configuration"] = cfg.eval.configuration;
  s["classifier"] = cfg.eval.classifier;
  s["tokens"] = cfg.eval.tokens;
  s["metric"] = labels.multi_label ? "average_precision" : "accuracy";
  s["folds"] = plan.k;
  s["repeats"] = cfg.eval.repeats;
  s["plan_sha256"] = plan.hash();
  s["seeds"] = summary.seeds;
  s["values"] = summary.values;
  s["mean"] = summary.mean;
  s["std"] = summary.stddev;
  s["formatted"] = summary.format();
  if (labels.multi_label) {
    std::vector<double> in_domain;
    for (const auto& o : outcomes) in_domain.push_back(o.pooled_ap->in_domain);
    s["in_domain_ap"] = in_domain;
  }
  {
    auto os = open_output(sp);
    os << s.dump(1) << "\n";
  }
  write_manifest(run, "evaluate", inputs, {rp, sp});
}

void stage_curve(const Run& run) {
  const Corpus corpus = load_run_corpus(run);
  const LabelData labels = label_data(corpus);
  const FoldPlan plan = run_fold_plan(run, corpus);
  std::vector<fs::path> inputs = {run.corpus_path()};
  const auto counts = load_counts(run, corpus, &inputs);
  const SvmExperiment exp{effective_bow(run.config), run.config.svm};
  const auto curve = learning_curve(plan, labels, svm_scorer(counts, labels, exp, run.workers),
                                    default_in_domain(labels));
  const fs::path cp = run.at("results/curve.csv");
  {
    auto os = open_output(cp);
    write_curve_csv(os, curve);
  }
  write_manifest(run, "curve", inputs, {cp});
}

}  // namespace

void run_stage(const std::string& stage, const PipelineConfig& config, const fs::path& out, int workers) {
  static const std::map<std::string, std::function<void(const Run&)>> stages = {
      {"synth", stage_synth},         {"utd", stage_utd},
      {"aud-train", stage_aud_train}, {"aud-decode", stage_aud_decode},
      {"featurize", stage_featurize}, {"embed", stage_embed},
      {"train-svm", stage_train_svm}, {"train-cnn", stage_train_cnn},
      {"evaluate", stage_evaluate},   {"curve", stage_curve}};
  const auto it = stages.find(stage);
  if (it == stages.end()) throw Error("unknown stage: " + stage);
  if (workers < 1) throw Error("workers must be >= 1");
  config.validate();
  it->second(Run{config, out, workers});
}

}  // namespace zrtopic
