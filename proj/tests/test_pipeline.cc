// zrtopic/tests/test_pipeline.cc

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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "zrtopic/pipeline.h"

using namespace zrtopic;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"({
  "seed": 12,
  "synth": {"num_topics": 2, "docs_per_topic": 6, "num_latent_units": 8, "units_per_utterance": 15, "dim": 6},
  "aud": {"truncation": 10, "training_iterations": 2},
  "svm": {"epochs": 5},
  "eval": {"folds": 3, "repeats": 2}
})";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("zrtopic_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "run.json";
  std::ofstream(p) << text;
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + ZRTOPIC_CLI + "\" " + args + " 2>/dev/null";
  return std::system(cmd.c_str());
}

int stage(const std::string& name, const fs::path& config, const fs::path& out, int workers = 1) {
  return cli(name + " --config " + config.string() + " --out " + out.string() + " --workers " +
             std::to_string(workers));
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_pipeline_config(kSmallConfig);
  CHECK(c.seed == 12);
  CHECK(c.synth.num_topics == 2);
  CHECK(c.aud.truncation == 10);
  CHECK(c.eval.folds == 3);
  CHECK(c.cnn.conv_units == 1024);
  CHECK(c.svm.rng_seed == derive_seed(12, "svm"));
  CHECK(c.aud.rng_seed != c.cnn.rng_seed);
  CHECK_THROWS_WITH_AS(parse_pipeline_config(R"({"aud": {}})"), "config: seed is mandatory", Error);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"seed": 1, "color": 3})"), Error);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"seed": 1, "aud": {"rng_seed": 3}})"), Error);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"seed": 1, "svm": {"penalty": "l3"}})"), Error);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"seed": 1, "eval": {"classifier": "cnn", "tokens": "utd"}})"), Error);
  CHECK_THROWS_AS(parse_pipeline_config("not json"), Error);
}

TEST_CASE("canonical config is a fixed point") {
  const auto c = parse_pipeline_config(kSmallConfig);
  const std::string j = canonical_config_json(c);
  CHECK(canonical_config_json(parse_pipeline_config(j)) == j);
}

TEST_CASE("command-line chain produces results and reruns byte-identically") {
  const fs::path dir = scratch("chain");
  const fs::path cfg = write_config(dir, kSmallConfig);
  const fs::path a = dir / "a", b = dir / "b";
  for (const fs::path& out : {a, b}) {
    REQUIRE(stage("synth", cfg, out) == 0);
    REQUIRE(stage("aud-train", cfg, out) == 0);
    REQUIRE(stage("evaluate", cfg, out, out == a ? 1 : 3) == 0);
  }
  for (const char* f : {"results/results.csv", "results/summary.json", "aud/model.bin", "aud/units.jsonl",
                        "features/counts.jsonl", "manifests/evaluate.json"}) {
    INFO(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const std::string csv = slurp(a / "results/results.csv");
  CHECK(csv.rfind("configuration,repeat,fold,metric\n", 0) == 0);
  CHECK(csv.find("default,mean,all,") != std::string::npos);
}

TEST_CASE("tampered artifacts are rejected") {
  const fs::path dir = scratch("tamper");
  const fs::path cfg = write_config(dir, kSmallConfig);
  const fs::path out = dir / "run";
  REQUIRE(stage("synth", cfg, out) == 0);
  REQUIRE(stage("aud-train", cfg, out) == 0);
  REQUIRE(stage("featurize", cfg, out) == 0);
  std::ofstream(out / "features/vocab.json", std::ios::app) << " ";
  CHECK(stage("evaluate", cfg, out) != 0);
  CHECK_THROWS_WITH_AS(run_stage("evaluate", parse_pipeline_config(kSmallConfig), out),
                       "artifact mismatch: features/vocab.json", Error);
}

TEST_CASE("bad invocations fail") {
  const fs::path dir = scratch("bad");
  const fs::path bad = write_config(dir, R"({"seed": 1, "nope": 2})");
  CHECK(stage("synth", bad, dir / "run") != 0);
  const fs::path good = write_config(dir, kSmallConfig);
  CHECK(stage("aud-train", good, dir / "empty") != 0);
  CHECK_THROWS_WITH_AS(run_stage("aud-train", parse_pipeline_config(kSmallConfig), dir / "empty"),
                       doctest::Contains("missing input"), Error);
  CHECK(cli("frobnicate --config " + good.string() + " --out " + dir.string()) != 0);
  CHECK(cli("synth --out " + (dir / "x").string()) != 0);
  CHECK_THROWS_AS(run_stage("synth", parse_pipeline_config(kSmallConfig), dir / "w", 0), Error);
}
