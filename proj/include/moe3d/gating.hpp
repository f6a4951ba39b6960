// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Attention gating network producing one confidence score per expert.

#pragma once

#include <string>
#include <vector>

#include "moe3d/encoders.hpp"

namespace moe3d {

struct GatingNetwork {
  AttentionParams self_attn;      // prompt attends to itself
  NormParams norm_self;
  AttentionParams prompt_to_image;  // prompt query, image keys/values
  NormParams norm_prompt_to_image;
  MlpParams prompt_mlp;             // C -> 4C -> C
  NormParams norm_mlp;
  AttentionParams image_to_prompt;  // image queries, prompt key/value
  NormParams norm_image_to_prompt;
  Tensor fc1_weight, fc1_bias;  // C×C, C
  Tensor fc2_weight, fc2_bias;  // C×m, m
  /// Expert labels the output columns are bound to, in bank order.
  std::vector<std::string> expert_labels;

  static GatingNetwork init(int channels, std::vector<std::string> labels, Rng& rng);
  std::size_t experts() const { return expert_labels.size(); }
  std::size_t channels() const { return fc1_weight.dim(0); }
  void collect(const std::string& prefix, NamedTensors& out) const;
  void set_trainable(bool flag);
  GatingNetwork clone() const;
  /// Rebinds the output layer to `labels`: columns of labels already known are
  /// carried over, new columns start at zero.
  void rebind(const std::vector<std::string>& labels);
};

struct GateScores {
  std::vector<double> scores;
  std::size_t top_index = 0;
  double s_top = 0.0;
};

/// Pre-softmax expert logits (1×m), differentiable w.r.t. gate parameters.
Tensor gate_logits(const GatingNetwork& gate, const ImageEmbedding& image, const PromptEmbedding& prompt);

/// Softmax of a logit row with argmax (lowest index wins ties).
GateScores scores_from_logits(std::span<const double> logits);

GateScores gate_forward(const GatingNetwork& gate, const ImageEmbedding& image, const PromptEmbedding& prompt);

/// -log softmax(logits)[target] via log-sum-exp.
Tensor gate_ce_loss(const Tensor& logits, std::size_t target);

/// Cross-entropy against an arbitrary target distribution over experts.
Tensor gate_soft_ce_loss(const Tensor& logits, std::span<const double> target_distribution);

std::string gate_prefix();

}  // namespace moe3d
