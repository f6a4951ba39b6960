// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "moe3d/layers.hpp"

#include <algorithm>
#include <cmath>

#include "moe3d/errors.hpp"

namespace moe3d {

Tensor init_weight(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> w(rows * cols);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(rows));
  for (auto& v : w) v = normal(rng, 0.0, stddev);
  return Tensor::from({rows, cols}, std::move(w), true);
}

AttentionParams AttentionParams::init(std::size_t channels, Rng& rng) {
  AttentionParams p;
  p.wq = init_weight(channels, channels, rng);
  p.wk = init_weight(channels, channels, rng);
  p.wv = init_weight(channels, channels, rng);
  p.wo = init_weight(channels, channels, rng);
  return p;
}

AttentionParams AttentionParams::clone() const { return {wq.clone(), wk.clone(), wv.clone(), wo.clone()}; }

void AttentionParams::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + "wq", wq);
  out.emplace_back(prefix + "wk", wk);
  out.emplace_back(prefix + "wv", wv);
  out.emplace_back(prefix + "wo", wo);
}

Tensor attend(const AttentionParams& p, const Tensor& queries, const Tensor& context) {
  if (queries.rank() != 2 || context.rank() != 2 || queries.dim(1) != context.dim(1)) {
    throw DimensionError("attend: queries " + shape_to_string(queries.shape()) + " and context " +
                         shape_to_string(context.shape()) + " disagree");
  }
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(queries.dim(1)));
  Tensor q = matmul(queries, p.wq);
  Tensor k = matmul(context, p.wk);
  Tensor v = matmul(context, p.wv);
  Tensor weights = softmax(scale(matmul(q, transpose(k)), inv_sqrt_c), -1);
  return matmul(matmul(weights, v), p.wo);
}

NormParams NormParams::init(std::size_t channels) {
  return {Tensor::full({channels}, 1.0, true), Tensor::zeros({channels}, true)};
}

NormParams NormParams::clone() const { return {gain.clone(), bias.clone()}; }

void NormParams::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + "gain", gain);
  out.emplace_back(prefix + "bias", bias);
}

Tensor apply_norm(const NormParams& p, const Tensor& x) { return layernorm(x, p.gain, p.bias); }

MlpParams MlpParams::init(std::size_t channels, std::size_t hidden, Rng& rng) {
  MlpParams p;
  p.w1 = init_weight(channels, hidden, rng);
  p.b1 = Tensor::zeros({hidden}, true);
  p.w2 = init_weight(hidden, channels, rng);
  p.b2 = Tensor::zeros({channels}, true);
  return p;
}

MlpParams MlpParams::clone() const { return {w1.clone(), b1.clone(), w2.clone(), b2.clone()}; }

void MlpParams::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + "w1", w1);
  out.emplace_back(prefix + "b1", b1);
  out.emplace_back(prefix + "w2", w2);
  out.emplace_back(prefix + "b2", b2);
}

Tensor apply_mlp(const MlpParams& p, const Tensor& x) {
  Tensor h = gelu(add_rowvec(matmul(x, p.w1), p.b1));
  return add_rowvec(matmul(h, p.w2), p.b2);
}

void load_into(const CheckpointData& ckpt, const std::string& name, Tensor& dst) {
  const Tensor* src = ckpt.find(name);
  if (!src) throw LoadError("checkpoint is missing tensor '" + name + "'");
  if (src->shape() != dst.shape()) {
    throw LoadError("checkpoint tensor '" + name + "' has shape " + shape_to_string(src->shape()) +
                    ", expected " + shape_to_string(dst.shape()));
  }
  auto out = dst.mutable_data();
  std::copy(src->data().begin(), src->data().end(), out.begin());
}

}  // namespace moe3d
