// Copyright 2026 The phrasebias Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "phrasebias/pipeline.hpp"

namespace pb = phrasebias;

int main(int argc, char** argv) {
  CLI::App app{"Mine stereotype phrases, search biased prompts, debias a masked LM and score it with SEAT."};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  bool force = false;
  bool verbose = false;
  std::string checkpoint;
  std::string label;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "run config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", overrides, "override a config key, e.g. search.beam_width=20");
    cmd->add_flag("-f,--force", force, "accept upstream artifacts whose provenance does not match");
    cmd->add_flag("-v,--verbose", verbose, "debug logging");
  };
  auto* filter = app.add_subcommand("filter", "extract anchor phrases and build S_weighted / S_unweighted");
  auto* search = app.add_subcommand("search", "beam-search biased prompts");
  auto* debias = app.add_subcommand("debias", "fine-tune the model on the searched prompts");
  auto* eval = app.add_subcommand("eval", "SEAT effect sizes (baseline, or a checkpoint)");
  auto* all = app.add_subcommand("all", "filter, search, baseline eval, debias, eval");
  for (auto* cmd : {filter, search, debias, eval, all}) common(cmd);
  eval->add_option("--checkpoint", checkpoint, "model directory to evaluate instead of the configured model");
  eval->add_option("--label", label, "report name for a checkpoint evaluation");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    const auto config = pb::RunConfig::load(config_path, overrides);
    pb::StageOptions options;
    options.force = force;
    if (!checkpoint.empty()) options.checkpoint = checkpoint;
    options.eval_label = label;

    pb::StageStatus status = pb::StageStatus::kOk;
    if (*filter) status = pb::cmd_filter(config, options);
    else if (*search) status = pb::cmd_search(config, options);
    else if (*debias) status = pb::cmd_debias(config, options);
    else if (*eval) status = pb::cmd_eval(config, options);
    else status = pb::cmd_all(config, options);

    if (status == pb::StageStatus::kEmptyOutput) {
      spdlog::warn("stage finished with empty output");
      return pb::kExitEmptyOutput;
    }
    return EXIT_SUCCESS;
  } catch (const pb::Error& e) {
    spdlog::error("{}", e.what());
    return pb::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
