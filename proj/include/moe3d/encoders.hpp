// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared front end: a patch-transformer image encoder and a point/box prompt
// encoder built on frozen sinusoidal 3D positional encodings.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moe3d/checkpoint.hpp"
#include "moe3d/layers.hpp"
#include "moe3d/tensor.hpp"
#include "moe3d/volume.hpp"

namespace moe3d {

struct EncoderConfig {
  int volume_side = 32;
  int patch_size = 8;
  int channels = 48;
  int depth = 2;
  int heads = 1;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
  int grid_side() const { return volume_side / patch_size; }
  int tokens() const { return grid_side() * grid_side() * grid_side(); }
  int patch_voxels() const { return patch_size * patch_size * patch_size; }

  std::string to_string() const;
  static EncoderConfig parse(const std::string& text);
  bool operator==(const EncoderConfig&) const = default;
};

/// Frozen encoding of a 3D coordinate: per axis, C/6 (sin, cos) pairs at
/// frequencies 10000^(-k/(C/6)); blocks for x, y, z are concatenated.
std::vector<double> positional_encoding(const std::array<double, 3>& coord, int channels);

enum class PointLabel { foreground, background };

struct PromptPoint {
  Coord coord{};
  PointLabel label = PointLabel::foreground;
};

struct PromptSpec {
  enum class Kind { points, box };

  Kind kind = Kind::points;
  std::vector<PromptPoint> points;
  Coord box_min{};
  Coord box_max{};

  static PromptSpec from_points(std::vector<PromptPoint> points);
  static PromptSpec from_box(Coord min_corner, Coord max_corner);
  /// Throws ValidationError for empty point lists, inverted boxes, or
  /// coordinates outside [0, side).
  void validate(int volume_side) const;
};

struct ImageEmbedding {
  Tensor tokens;  // N×C
  int grid_side = 0;
};

struct PromptEmbedding {
  Tensor vector;  // 1×C
};

struct TransformerBlock {
  AttentionParams attn;
  NormParams norm1;
  MlpParams mlp;
  NormParams norm2;
};

struct ImageEncoder {
  EncoderConfig config;
  Tensor patch_weight;  // P×C
  Tensor patch_bias;    // C
  std::vector<TransformerBlock> blocks;
  Tensor position;  // N×C, constant

  static ImageEncoder init(const EncoderConfig& config, Rng& rng);
  void collect(const std::string& prefix, NamedTensors& out) const;
  void set_trainable(bool flag);
};

/// Flat index map from token-major layout (token, voxel-within-patch) to
/// volume voxels: entry [n*P + o] is the voxel index of sub-voxel o of token n.
std::vector<std::uint32_t> patch_layout(int volume_side, int patch_size);

/// N×P matrix of patch voxels for a cubic volume.
Tensor patchify(const Volume& volume, int patch_size);

/// Linear patch embedding stage only (flatten, project, add bias).
Tensor project_patches(const ImageEncoder& encoder, const Volume& volume);

ImageEmbedding encode_image(const ImageEncoder& encoder, const Volume& volume);

struct PromptEncoder {
  int channels = 0;
  Tensor foreground;  // 1×C learned type embeddings
  Tensor background;
  Tensor box_min;
  Tensor box_max;

  static PromptEncoder init(int channels, Rng& rng);
  void collect(const std::string& prefix, NamedTensors& out) const;
  void set_trainable(bool flag);
};

/// Mean over prompt tokens of (positional_encoding(coord) + type embedding).
PromptEmbedding encode_prompt(const PromptEncoder& encoder, const PromptSpec& prompt, int volume_side);

}  // namespace moe3d
