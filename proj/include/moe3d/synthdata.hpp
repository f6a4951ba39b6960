// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic 3D segmentation corpora and prompt simulation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "moe3d/encoders.hpp"
#include "moe3d/volume.hpp"

namespace moe3d {

enum class ShapeFamily { ball, box, ellipsoid, tube };
std::string to_string(ShapeFamily family);
ShapeFamily parse_shape_family(const std::string& name);

enum class CategoryRole { general, expert };
std::string to_string(CategoryRole role);
CategoryRole parse_category_role(const std::string& name);

struct IntensityProfile {
  double fg_mean = 1.0;
  double fg_std = 0.35;
  double bg_mean = 0.0;
  double bg_std = 0.35;
};

struct CategorySpec {
  std::string name;
  CategoryRole role = CategoryRole::general;
  ShapeFamily family = ShapeFamily::ball;
  /// Characteristic size in voxels: radius (ball, tube cross-section),
  /// half-extent (box) or long semi-axis (ellipsoid).
  double size_min = 4.0;
  double size_max = 7.0;
  IntensityProfile intensity;
  /// Minimum distance between the shape's bounding box and the volume faces.
  int margin = 1;

  void validate(int volume_side) const;
};

struct Sample {
  std::string sample_id;
  std::string category;
  std::uint64_t seed = 0;
  Volume volume;
  Mask mask;
};

/// Deterministic in (spec, side, seed). Throws GenerationError when the
/// shape cannot fit.
Sample generate(const CategorySpec& spec, int volume_side, std::uint64_t seed, std::string sample_id = {});

/// Two objects in one volume: category `a` occupies the low-x half and `b`
/// the high-x half, each half rendered with its own intensity profile.
struct PairSample {
  Volume volume;
  Mask mask_a;
  Mask mask_b;
};
PairSample generate_pair(const CategorySpec& a, const CategorySpec& b, int volume_side, std::uint64_t seed);

/// First point: foreground voxel nearest the mask centroid (lowest flat index
/// on ties). Remaining n-1 points: uniform foreground voxels without
/// replacement, or with replacement when the mask has fewer than n voxels.
PromptSpec sample_point_prompts(const Mask& mask, int n, std::uint64_t seed);

/// Tight foreground bounding box grown by `jitter` per face, clamped to the volume.
PromptSpec bbox_prompt(const Mask& mask, int jitter = 0);

enum class PromptKind { points6, bbox };
std::string to_string(PromptKind kind);
PromptKind parse_prompt_kind(const std::string& name);

/// The fixed evaluation prompt of a sample.
PromptSpec make_prompt(const Sample& sample, PromptKind kind);
/// A training prompt; points are redrawn per `stream`.
PromptSpec make_prompt(const Mask& mask, PromptKind kind, std::uint64_t stream);

struct CorpusConfig {
  int volume_side = 32;
  int train_per_category = 100;
  int held_out_per_category = 50;
  std::vector<CategorySpec> categories;

  /// 4 general + 4 expert categories on 32^3 volumes.
  static CorpusConfig defaults();
  void validate() const;
  const CategorySpec& category(const std::string& name) const;
  std::vector<std::string> names(CategoryRole role) const;

  std::string to_json() const;
  /// Keys missing from the JSON keep their default values; unknown keys are
  /// rejected with ConfigError.
  static CorpusConfig from_json(const std::string& text);
};

struct Corpora {
  CorpusConfig config;
  std::uint64_t seed = 0;
  std::map<std::string, std::vector<Sample>> train;     // per category
  std::map<std::string, std::vector<Sample>> held_out;  // per category

  /// Training samples of all general categories, in config order.
  std::vector<const Sample*> general_train() const;
  /// CRC32 per sample (volume then mask bytes).
  std::map<std::string, std::uint32_t> sample_checksums() const;
  /// CRC32 over the ordered per-sample checksums.
  std::uint32_t checksum() const;
};

std::uint32_t sample_checksum(const Sample& sample);

Corpora build_corpora(const CorpusConfig& config, std::uint64_t seed);

/// Writes one .vol (f32 LE), .mask (u8) and .json per sample plus manifest.json.
void write_corpora(const Corpora& corpora, const std::filesystem::path& dir);
/// Reads a corpus back and verifies every checksum (ValidationError on mismatch,
/// LoadError on missing or malformed files).
Corpora read_corpora(const std::filesystem::path& dir);
/// Loads one sample from its JSON sidecar path.
Sample read_sample(const std::filesystem::path& sidecar);

}  // namespace moe3d
