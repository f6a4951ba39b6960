// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "moe3d/pipeline.hpp"

#include <chrono>

#include "json.hpp"
#include "moe3d/errors.hpp"

namespace moe3d {

using nlohmann::json;

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig c;
  c.pretrain.steps = 1500;
  c.pretrain.lr_pretrain = 1e-3;
  c.pretrain.batch_size = 4;
  c.finetune.mode = TrainMode::expert_finetune;
  c.finetune.steps = 2500;
  c.finetune.lr_expert = 1e-4;
  c.finetune.batch_size = 4;
  c.gate.mode = TrainMode::gate_only;
  c.gate.steps = 3000;
  c.gate.lr_gate = 1e-3;
  c.gate.batch_size = 8;
  c.gate.general_weight = 1.0;
  c.gate.pair_fraction = 0.25;
  return c;
}

namespace {

json train_to_json(const TrainConfig& t) {
  return {{"lr_pretrain", t.lr_pretrain},   {"lr_expert", t.lr_expert},   {"lr_gate", t.lr_gate},
          {"weight_decay", t.weight_decay}, {"batch_size", t.batch_size}, {"steps", t.steps},
          {"dice_smooth", t.dice_smooth},   {"mode", to_string(t.mode)},  {"general_weight", t.general_weight},
          {"pair_fraction", t.pair_fraction}};
}

TrainConfig train_from_json(const json& j, TrainConfig t) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "lr_pretrain") t.lr_pretrain = it->get<double>();
    else if (k == "lr_expert") t.lr_expert = it->get<double>();
    else if (k == "lr_gate") t.lr_gate = it->get<double>();
    else if (k == "weight_decay") t.weight_decay = it->get<double>();
    else if (k == "batch_size") t.batch_size = it->get<int>();
    else if (k == "steps") t.steps = it->get<int>();
    else if (k == "dice_smooth") t.dice_smooth = it->get<double>();
    else if (k == "mode") t.mode = parse_train_mode(it->get<std::string>());
    else if (k == "general_weight") t.general_weight = it->get<double>();
    else if (k == "pair_fraction") t.pair_fraction = it->get<double>();
    else throw ConfigError("pipeline config: unknown training key '" + k + "'");
  }
  t.validate();
  return t;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string PipelineConfig::to_json() const {
  json j = {{"seed", seed},
            {"corpus", json::parse(corpus.to_json())},
            {"encoder", encoder.to_string()},
            {"pretrain", train_to_json(pretrain)},
            {"finetune", train_to_json(finetune)},
            {"gate", train_to_json(gate)},
            {"tau", selector.tau},
            {"fusion", to_string(selector.fusion)}};
  return j.dump(2);
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  PipelineConfig c = defaults();
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("pipeline config: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      if (k == "seed") c.seed = it->get<std::uint64_t>();
      else if (k == "corpus") c.corpus = CorpusConfig::from_json(it->dump());
      else if (k == "encoder") c.encoder = EncoderConfig::parse(it->get<std::string>());
      else if (k == "pretrain") c.pretrain = train_from_json(*it, c.pretrain);
      else if (k == "finetune") c.finetune = train_from_json(*it, c.finetune);
      else if (k == "gate") c.gate = train_from_json(*it, c.gate);
      else if (k == "tau") c.selector.tau = it->get<double>();
      else if (k == "fusion") c.selector.fusion = parse_fusion(it->get<std::string>());
      else throw ConfigError("pipeline config: unknown key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  c.selector.validate();
  return c;
}

PipelineResult run_pipeline(const PipelineConfig& config, const PipelineLog& log) {
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  PipelineResult r;
  r.corpora = build_corpora(config.corpus, config.seed);
  say("corpora: " + std::to_string(r.corpora.sample_checksums().size()) + " samples");

  Model model = Model::init(config.encoder, derive_seed(config.seed, "model"));
  {
    const auto start = std::chrono::steady_clock::now();
    TrainConfig tc = config.pretrain;
    tc.seed = derive_seed(config.seed, "pretrain");
    StageRecord stage{"pretrain", pretrain(model, r.corpora, tc), {}, 0.0};
    stage.seconds = seconds_since(start);
    r.pretrain_dice = general_heldout_dice(model, r.corpora);
    say("pretrain: " + std::to_string(tc.steps) + " steps, general held-out dice " + format_real(r.pretrain_dice));
    r.stages.push_back(std::move(stage));
  }
  r.foundation = model.deep_copy();

  for (const auto& label : config.corpus.names(CategoryRole::expert)) {
    const auto start = std::chrono::steady_clock::now();
    model.bank.clone_expert(label);
    const auto before = group_checksums(model);
    TrainConfig tc = config.finetune;
    tc.seed = derive_seed(config.seed, "finetune." + label);
    std::vector<const Sample*> samples;
    for (const auto& s : r.corpora.train.at(label)) samples.push_back(&s);
    StageRecord stage{"finetune:" + label, finetune_expert(model, label, samples, tc), {}, 0.0};
    stage.freeze_violations =
        freeze_violations(before, group_checksums(model), FreezePolicy::for_mode(TrainMode::expert_finetune, model, label));
    stage.seconds = seconds_since(start);
    say("finetune " + label + ": final loss " + format_real(stage.curve.loss.empty() ? 0.0 : stage.curve.loss.back()));
    r.stages.push_back(std::move(stage));
  }

  if (!model.bank.empty()) {
    const auto start = std::chrono::steady_clock::now();
    const auto before = group_checksums(model);
    TrainConfig tc = config.gate;
    tc.seed = derive_seed(config.seed, "gate");
    const GateTrainingData data = GateTrainingData::from_corpora(r.corpora, model);
    StageRecord stage{"gate", train_gating(model, data, tc), {}, 0.0};
    stage.freeze_violations = freeze_violations(before, group_checksums(model), FreezePolicy::for_mode(tc.mode, model));
    stage.seconds = seconds_since(start);
    say("gate (" + to_string(tc.mode) + "): final loss " + format_real(stage.curve.loss.back()));
    r.stages.push_back(std::move(stage));
  }
  r.model = std::move(model);
  return r;
}

}  // namespace moe3d
