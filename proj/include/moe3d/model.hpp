// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// The full promptable segmentation model: shared encoders, the expert bank
// and an optional gate, with checkpoint round-tripping.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "moe3d/decoder_bank.hpp"
#include "moe3d/gating.hpp"
#include "moe3d/selector.hpp"

namespace moe3d {

struct Model {
  EncoderConfig config;
  ImageEncoder image_encoder;
  PromptEncoder prompt_encoder;
  ExpertBank bank;
  std::optional<GatingNetwork> gate;

  /// Fresh encoders and general decoder, empty bank, no gate.
  static Model init(const EncoderConfig& config, std::uint64_t seed);

  NamedTensors named_tensors() const;
  Model deep_copy() const;
  /// Disables gradients everywhere.
  void freeze_all();

  ImageEmbedding embed_image(const Volume& volume) const;
  PromptEmbedding embed_prompt(const PromptSpec& prompt) const;

  /// General decoder only, as probabilities.
  Tensor infer_general(const Volume& volume, const PromptSpec& prompt) const;
  MoeOutput infer(const Volume& volume, const PromptSpec& prompt, const SelectorConfig& config,
                  DecodeProbe* probe = nullptr) const;
};

std::string encoder_prefix();
std::string prompt_encoder_prefix();

/// CRC32 per parameter group: "encoder", "prompt_encoder", "decoder.general",
/// "decoder.expert.<label>" and "gate" when present.
std::map<std::string, std::uint32_t> group_checksums(const Model& model);

/// Writes the model with its config and expert manifests in the header.
void save_model(const Model& model, const std::filesystem::path& path,
                const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
CheckpointData model_checkpoint(const Model& model,
                                const std::vector<std::pair<std::string, std::string>>& extra_meta = {});

/// Validates the config, the expert manifest, the gate manifest and every
/// tensor shape before returning. Throws LoadError on any mismatch.
Model load_model(const std::filesystem::path& path);
Model model_from_checkpoint(const CheckpointData& ckpt);

std::string join_labels(const std::vector<std::string>& labels);
std::vector<std::string> split_labels(const std::string& text);

}  // namespace moe3d
