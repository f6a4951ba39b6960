// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// The general mask decoder and the ordered registry of finetuned experts.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "moe3d/encoders.hpp"

namespace moe3d {

/// Mask decoder: the prompt queries the image tokens, the updated prompt is
/// broadcast onto every token, a per-token MLP mixes them, and a sub-voxel
/// head expands each token back to its patch_size^3 voxels.
struct MaskDecoder {
  int patch_size = 0;
  AttentionParams cross;
  NormParams norm_query;
  MlpParams mlp;
  NormParams norm_tokens;
  Tensor head_weight;  // C×P
  Tensor head_bias;    // P

  static MaskDecoder init(const EncoderConfig& config, Rng& rng);
  MaskDecoder clone() const;
  void collect(const std::string& prefix, NamedTensors& out) const;
  void set_trainable(bool flag);
  std::size_t channels() const { return head_weight.dim(0); }
};

/// Volume-shaped logits with a sigmoid probability view.
struct MaskLogits {
  Tensor logits;  // side×side×side

  Tensor probabilities() const { return sigmoid(logits); }
  /// Mean over all voxels of the raw logits.
  double global_average() const;
};

MaskLogits decode(const MaskDecoder& decoder, const ImageEmbedding& image, const PromptEmbedding& prompt);

struct Expert {
  std::string label;
  MaskDecoder decoder;
};

class ExpertBank {
 public:
  ExpertBank() = default;
  explicit ExpertBank(MaskDecoder general) : general_(std::move(general)) {}

  const MaskDecoder& general() const { return general_; }
  MaskDecoder& general() { return general_; }

  std::size_t size() const { return experts_.size(); }
  bool empty() const { return experts_.empty(); }

  /// Appends a deep copy of the general decoder under `label`.
  void clone_expert(const std::string& label);
  /// Appends an existing decoder (used when loading checkpoints).
  void add_expert(const std::string& label, MaskDecoder decoder);

  const Expert& expert_by_index(std::size_t k) const;
  Expert& expert_by_index(std::size_t k);
  std::optional<std::size_t> index_of(const std::string& label) const;
  const Expert& expert(const std::string& label) const;
  Expert& expert(const std::string& label);
  std::vector<std::string> labels() const;

  /// Independent copy of every decoder.
  ExpertBank deep_copy() const;
  void collect(NamedTensors& out) const;

 private:
  MaskDecoder general_;
  std::vector<Expert> experts_;
};

std::string general_decoder_prefix();
std::string expert_decoder_prefix(const std::string& label);

}  // namespace moe3d
