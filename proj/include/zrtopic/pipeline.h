// zrtopic/pipeline.h

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

// Run configuration and the pipeline stages behind the command-line tool.
// All stages of one run share an output directory:
//
//   corpus/corpus.json, corpus/*.zrf   synth
//   truth/planted.jsonl                synth
//   utd/{matches,clusters,terms}.jsonl utd
//   aud/model.bin, aud/elbo.csv        aud-train
//   aud/units.jsonl                    aud-decode
//   features/{counts.jsonl,vocab.json} featurize
//   embed/{embeddings.txt,loss.csv}    embed
//   svm/models.json                    train-svm
//   cnn/{model.bin,log.csv,units.json} train-cnn
//   results/{results.csv,summary.json} evaluate
//   results/curve.csv                  curve
//
// and each stage writes manifests/<stage>.json with the full configuration,
// its hash and the hashes of every input and output file.

#ifndef ZRTOPIC_PIPELINE_H_
#define ZRTOPIC_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "zrtopic/aud.h"
#include "zrtopic/bow.h"
#include "zrtopic/cnn.h"
#include "zrtopic/corpus.h"
#include "zrtopic/embed.h"
#include "zrtopic/eval.h"
#include "zrtopic/svm.h"
#include "zrtopic/utd.h"

namespace zrtopic {

struct EvalSettings {
  int folds = 10;
  int repeats = kDefaultRepeats;
  std::string tokens = "aud";      // "aud" or "utd"
  std::string classifier = "svm";  // "svm" or "cnn"
  bool pretrained = false;         // CNN embeddings from the embed stage
  std::string configuration = "default";
};

struct PipelineConfig {
  std::uint64_t seed = 0;  // root seed; every module seed derives from it
  std::optional<std::filesystem::path> corpus;    // defaults to <out>/corpus/corpus.json
  std::optional<std::filesystem::path> rescorer;  // required when utd.use_rescoring
  SyntheticSpec synth;
  UtdConfig utd;
  AudConfig aud;
  BowConfig bow;
  EmbedConfig embed;
  CnnConfig cnn;
  SvmConfig svm;
  EvalSettings eval;

  void validate() const;
};

/// Parses a JSON config. "seed" is mandatory; every other section is optional
/// and may set any subset of its fields. Unknown keys are errors. Module seeds
/// cannot be set directly.
PipelineConfig parse_pipeline_config(const std::string& json_text);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Full configuration with defaults filled in, as canonical JSON.
std::string canonical_config_json(const PipelineConfig& config);

/// Sets each module seed to derive_seed(root, <module name>).
void derive_stage_seeds(PipelineConfig& config);

const std::vector<std::string>& stage_names();

/// Runs one stage. Missing inputs raise Error("missing input: ..."); inputs
/// that no longer match the manifest of the stage that produced them raise
/// Error("artifact mismatch: ...").
void run_stage(const std::string& stage, const PipelineConfig& config, const std::filesystem::path& out,
               int workers = 1);

std::string file_sha256(const std::filesystem::path& path);

}  // namespace zrtopic

#endif  // ZRTOPIC_PIPELINE_H_
