// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end run: corpora, foundation pretraining, one finetuned expert per
// expert category, gate training, evaluation and ablation.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "moe3d/eval.hpp"
#include "moe3d/training.hpp"

namespace moe3d {

struct PipelineConfig {
  std::uint64_t seed = 7;
  CorpusConfig corpus = CorpusConfig::defaults();
  EncoderConfig encoder;
  TrainConfig pretrain;
  TrainConfig finetune;
  TrainConfig gate;
  SelectorConfig selector;

  /// Desk-scale defaults used by the CLI and the acceptance suite.
  static PipelineConfig defaults();
  std::string to_json() const;
  static PipelineConfig from_json(const std::string& text);
};

struct StageRecord {
  std::string name;
  LossCurve curve;
  std::vector<std::string> freeze_violations;
  double seconds = 0.0;
};

struct PipelineResult {
  Corpora corpora;
  Model foundation;  // after pretraining, empty bank
  Model model;       // experts and gate
  std::vector<StageRecord> stages;
  double pretrain_dice = 0.0;
};

using PipelineLog = std::function<void(const std::string&)>;

PipelineResult run_pipeline(const PipelineConfig& config, const PipelineLog& log = {});

}  // namespace moe3d
