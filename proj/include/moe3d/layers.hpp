// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Parameter blocks shared by the encoder, decoders and gate.

#pragma once

#include <string>

#include "moe3d/checkpoint.hpp"
#include "moe3d/rng.hpp"
#include "moe3d/tensor.hpp"

namespace moe3d {

/// Gaussian-initialized rows×cols weight with std 1/sqrt(rows).
Tensor init_weight(std::size_t rows, std::size_t cols, Rng& rng);

/// Single-head scaled dot-product attention over width C (no biases).
struct AttentionParams {
  Tensor wq, wk, wv, wo;

  static AttentionParams init(std::size_t channels, Rng& rng);
  AttentionParams clone() const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

/// softmax((q·Wq)(ctx·Wk)^T / sqrt(C)) (ctx·Wv) Wo, for q[M×C], ctx[N×C].
Tensor attend(const AttentionParams& p, const Tensor& queries, const Tensor& context);

struct NormParams {
  Tensor gain, bias;

  static NormParams init(std::size_t channels);
  NormParams clone() const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

Tensor apply_norm(const NormParams& p, const Tensor& x);

/// Two-layer perceptron C -> hidden -> C with GELU.
struct MlpParams {
  Tensor w1, b1, w2, b2;

  static MlpParams init(std::size_t channels, std::size_t hidden, Rng& rng);
  MlpParams clone() const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

Tensor apply_mlp(const MlpParams& p, const Tensor& x);

/// Looks up `name` in a checkpoint and copies it into `dst`, checking shape.
void load_into(const CheckpointData& ckpt, const std::string& name, Tensor& dst);

}  // namespace moe3d
