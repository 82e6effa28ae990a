// zrtopic/tools/zrtopic.cc

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

// zrtopic <stage> --config run.json --out run_dir [--workers N] [--seed S]
//
// Log level comes from ZRTOPIC_LOG (trace, debug, info, warn, error, off).

#include <cstdlib>
#include <exception>
#include <optional>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "zrtopic/pipeline.h"

namespace {

struct Options {
  std::string config;
  std::string out;
  int workers = 1;
  std::optional<std::uint64_t> seed;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("zrtopic");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* level = std::getenv("ZRTOPIC_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Topic identification from untranscribed speech"};
  app.require_subcommand(1);
  Options opts;
  for (const auto& stage : zrtopic::stage_names()) {
    auto* sub = app.add_subcommand(stage, "Run the " + stage + " stage");
    sub->add_option("--config", opts.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out, "Run directory")->required();
    sub->add_option("--workers", opts.workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", opts.seed, "Override the root seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    zrtopic::PipelineConfig config = zrtopic::load_pipeline_config(opts.config);
    if (opts.seed) {
      config.seed = *opts.seed;
      zrtopic::derive_stage_seeds(config);
    }
    spdlog::info("{}: out={} workers={} seed={}", stage, opts.out, opts.workers, config.seed);
    zrtopic::run_stage(stage, config, opts.out, opts.workers);
    spdlog::info("{}: done", stage);
  } catch (const std::exception& e) {
    spdlog::error("{}: {}", stage, e.what());
    return 1;
  }
  return 0;
}
