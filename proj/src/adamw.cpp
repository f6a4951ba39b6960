// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "moe3d/adamw.hpp"

#include <cmath>

#include "moe3d/errors.hpp"

namespace moe3d {

void adamw_update(std::span<double> param, std::span<const double> grad, AdamWMoments& moments,
                  std::int64_t step, const AdamWOptions& options) {
  if (param.size() != grad.size()) {
    throw DimensionError("adamw: parameter has " + std::to_string(param.size()) +
                         " values but gradient has " + std::to_string(grad.size()));
  }
  if (step < 1) throw ContractError("adamw: step index must be >= 1");
  if (moments.m.empty()) {
    moments.m.assign(param.size(), 0.0);
    moments.v.assign(param.size(), 0.0);
  }
  if (moments.m.size() != param.size() || moments.v.size() != param.size()) {
    throw DimensionError("adamw: moment buffers do not match parameter size");
  }
  const double t = static_cast<double>(step);
  const double bc1 = 1.0 - std::pow(options.beta1, t);
  const double bc2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    moments.m[i] = options.beta1 * moments.m[i] + (1.0 - options.beta1) * g;
    moments.v[i] = options.beta2 * moments.v[i] + (1.0 - options.beta2) * g * g;
    const double m_hat = moments.m[i] / bc1;
    const double v_hat = moments.v[i] / bc2;
    param[i] -= options.lr * options.weight_decay * param[i];
    param[i] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
  }
}

AdamW::AdamW(std::vector<Tensor> params, AdamWOptions options)
    : params_(std::move(params)), moments_(params_.size()), options_(options) {
  if (options_.lr <= 0.0) throw ConfigError("adamw: learning rate must be positive");
}

void AdamW::step() {
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    adamw_update(p.mutable_data(), p.grad(), moments_[i], step_, options_);
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace moe3d
