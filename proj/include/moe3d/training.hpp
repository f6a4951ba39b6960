// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Segmentation and routing losses, freeze contracts, and the training loops
// for the foundation model, the experts and the gate.

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "moe3d/model.hpp"
#include "moe3d/synthdata.hpp"

namespace moe3d {

/// 1 - (2 sum(p t) + eps) / (sum(p) + sum(t) + eps).
Tensor dice_loss(const Tensor& probs, std::span<const std::uint8_t> target, double eps = 1e-5);
/// Mean numerically stable binary cross-entropy from logits.
Tensor bce_loss(const Tensor& logits, std::span<const std::uint8_t> target);
/// dice_loss(sigmoid(logits)) + bce_loss(logits).
Tensor dicece_loss(const Tensor& logits, std::span<const std::uint8_t> target, double eps = 1e-5);
/// Mean binary cross-entropy on probabilities, clamped away from 0 and 1.
Tensor bce_prob_loss(const Tensor& probs, std::span<const std::uint8_t> target);

enum class TrainMode { expert_finetune, gate_only, gate_plus_top1 };
std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& name);

struct TrainConfig {
  double lr_pretrain = 1e-3;
  double lr_expert = 1e-4;
  double lr_gate = 1e-6;
  double weight_decay = 0.01;
  int batch_size = 4;
  int steps = 100;
  std::uint64_t seed = 0;
  double dice_smooth = 1e-5;
  TrainMode mode = TrainMode::gate_only;
  /// Gate training only: weight of general-category samples supervised
  /// toward uniform scores (0 disables them).
  double general_weight = 0.0;
  /// Gate training only: fraction of steps' samples drawn as two-object
  /// volumes where the prompt decides the target expert.
  double pair_fraction = 0.0;

  void validate() const;
  std::string to_string() const;
};

struct FreezePolicy {
  std::set<std::string> frozen_groups;

  /// Groups that must not change for a training mode; `label` names the
  /// expert being finetuned in expert_finetune mode.
  static FreezePolicy for_mode(TrainMode mode, const Model& model, const std::string& label = {});
  static FreezePolicy for_pretraining(const Model& model);
};

/// Names of frozen groups whose checksum changed (or vanished).
std::vector<std::string> freeze_violations(const std::map<std::string, std::uint32_t>& before,
                                           const std::map<std::string, std::uint32_t>& after,
                                           const FreezePolicy& policy);

struct LossCurve {
  std::vector<double> loss;
  std::vector<double> gate_ce;  // filled by gate training only

  std::string to_csv() const;
  /// Mean of loss entries [begin, end).
  double window_mean(std::size_t begin, std::size_t end) const;
};

/// Trains encoders, prompt encoder and general decoder on the general
/// categories. Throws ValidationError when the corpus has no general samples.
LossCurve pretrain(Model& model, const Corpora& corpora, const TrainConfig& config);

/// Finetunes `decoder.expert.<label>` only, on samples of that category.
LossCurve finetune_expert(Model& model, const std::string& label, const std::vector<const Sample*>& samples,
                          const TrainConfig& config);

struct GateTrainingData {
  /// Samples whose category names an expert of the bank.
  std::vector<const Sample*> expert_samples;
  /// Samples of categories without an expert (used when general_weight > 0).
  std::vector<const Sample*> general_samples;
  /// Category specs for two-object probes (used when pair_fraction > 0).
  std::vector<CategorySpec> expert_specs;
  int volume_side = 32;

  static GateTrainingData from_corpora(const Corpora& corpora, const Model& model);
};

/// Trains the gate (creating it when absent) with gate_ce_loss; in
/// gate_plus_top1 mode the Top-1 expert is also updated with DiceCE on the
/// weighted fusion of the general and expert masks.
LossCurve train_gating(Model& model, const GateTrainingData& data, const TrainConfig& config);

}  // namespace moe3d
