// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "moe3d/tensor.hpp"

namespace moe3d {

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// First/second moment buffers for one parameter.
struct AdamWMoments {
  std::vector<double> m;
  std::vector<double> v;
};

/// One decoupled-weight-decay Adam update of `param` in place. `step` is the
/// 1-based step index used for bias correction.
void adamw_update(std::span<double> param, std::span<const double> grad, AdamWMoments& moments,
                  std::int64_t step, const AdamWOptions& options);

/// AdamW over a fixed list of parameter tensors. Parameters without a
/// populated gradient are skipped for that step.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWOptions options);

  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_; }
  const AdamWOptions& options() const { return options_; }
  const std::vector<AdamWMoments>& moments() const { return moments_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamWMoments> moments_;
  AdamWOptions options_;
  std::int64_t step_ = 0;
};

}  // namespace moe3d
