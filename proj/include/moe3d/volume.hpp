// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace moe3d {

using Coord = std::array<int, 3>;
using Dims = std::array<std::size_t, 3>;

/// Flat row-major index of (x, y, z) in a volume of the given dims.
inline std::size_t voxel_index(const Dims& dims, std::size_t x, std::size_t y, std::size_t z) {
  return (x * dims[1] + y) * dims[2] + z;
}

inline Coord voxel_coord(const Dims& dims, std::size_t index) {
  const std::size_t z = index % dims[2];
  const std::size_t y = (index / dims[2]) % dims[1];
  const std::size_t x = index / (dims[1] * dims[2]);
  return {static_cast<int>(x), static_cast<int>(y), static_cast<int>(z)};
}

/// Dense scalar image on an H×W×D grid.
struct Volume {
  Dims dims{};
  std::vector<double> data;

  static Volume cube(std::size_t side, double fill = 0.0) {
    return {{side, side, side}, std::vector<double>(side * side * side, fill)};
  }
  std::size_t size() const { return data.size(); }
  double& at(std::size_t x, std::size_t y, std::size_t z) { return data[voxel_index(dims, x, y, z)]; }
  double at(std::size_t x, std::size_t y, std::size_t z) const { return data[voxel_index(dims, x, y, z)]; }
};

/// Binary label volume (0 or 1 per voxel).
struct Mask {
  Dims dims{};
  std::vector<std::uint8_t> data;

  static Mask cube(std::size_t side) { return {{side, side, side}, std::vector<std::uint8_t>(side * side * side, 0)}; }
  std::size_t size() const { return data.size(); }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
  }
};

}  // namespace moe3d
