// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Threshold switch and fusion rules combining the general mask with the
// Top-1 expert mask, plus the end-to-end mixture-of-experts inference path.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "moe3d/decoder_bank.hpp"
#include "moe3d/gating.hpp"

namespace moe3d {

enum class Fusion { weighted, avg, aft_weight };

std::string to_string(Fusion fusion);
/// Throws ConfigError for unknown names.
Fusion parse_fusion(const std::string& name);

struct SelectorConfig {
  double tau = 0.5;
  Fusion fusion = Fusion::weighted;

  void validate() const;
};

/// Everything the selector needs from one decoder: probabilities for fusion
/// and the global average of the raw logits for aft_weight.
struct DecodedMask {
  Tensor probabilities;
  double logit_average = 0.0;

  static DecodedMask from_logits(const MaskLogits& logits);
};

/// True iff the expert path fires (strict inequality).
bool switch_fires(double s_top, double tau);

/// Softmax of the two logit averages: {w_general, w_top}.
std::pair<double, double> aft_weights(double general_average, double top_average);

/// Final probability mask. When the switch is off the general tensor is
/// returned as is; otherwise the chosen fusion is applied voxelwise. Fused
/// values are clamped into [min, max] of the two inputs, which only ever
/// removes rounding error.
Tensor select_mask(const DecodedMask& general, const DecodedMask& top, double s_top, const SelectorConfig& config);

/// Counts decoder evaluations performed by moe_infer.
struct DecodeProbe {
  std::size_t general_calls = 0;
  std::size_t expert_calls = 0;
};

struct RoutingReport {
  bool gated = false;  // false when the bank is empty and the gate is bypassed
  std::size_t top_index = 0;
  std::string top_label;
  double s_top = 0.0;
  std::vector<double> scores;
  bool fired = false;
};

struct MoeOutput {
  Tensor probabilities;
  RoutingReport report;
};

/// Gate once, decode the general mask, and decode the Top-1 expert only if
/// the switch fires.
MoeOutput moe_from_embeddings(const ExpertBank& bank, const GatingNetwork* gate, const ImageEmbedding& image,
                              const PromptEmbedding& prompt, const SelectorConfig& config,
                              DecodeProbe* probe = nullptr);

/// Binarize probabilities at 0.5 (strictly greater counts as foreground).
std::vector<std::uint8_t> binarize(const Tensor& probabilities);

}  // namespace moe3d
