// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Named-tensor checkpoint container.
//
// Layout:
//   moe3d-checkpoint 1\n
//   @<key> <value>\n                        (zero or more metadata lines)
//   <name> <d0,d1,...> f64 <byte_offset>\n  (one line per tensor)
//   end <payload_bytes>\n
//   <payload: little-endian float64 values, tensors back to back>
//   <crc32 of payload, little-endian uint32>

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "moe3d/tensor.hpp"

namespace moe3d {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

struct CheckpointData {
  std::vector<std::pair<std::string, std::string>> meta;
  NamedTensors tensors;

  /// Value of a metadata key, or empty when absent.
  std::string meta_value(const std::string& key) const;
  const Tensor* find(const std::string& name) const;
};

std::uint32_t crc32_bytes(std::span<const unsigned char> bytes);
/// CRC32 over the little-endian encoding of the values.
std::uint32_t crc32_values(std::span<const double> values);
/// CRC32 over a group of tensors in list order (names excluded).
std::uint32_t tensors_checksum(const NamedTensors& tensors);

std::string encode_checkpoint(const CheckpointData& data);
CheckpointData decode_checkpoint(const std::string& bytes);

/// Writes through a temporary file and renames it into place.
void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

/// Atomic whole-file write used for manifests and CSVs.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace moe3d
