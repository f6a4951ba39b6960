// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "moe3d/gating.hpp"

#include <algorithm>
#include <cmath>

#include "moe3d/errors.hpp"

namespace moe3d {

GatingNetwork GatingNetwork::init(int channels, std::vector<std::string> labels, Rng& rng) {
  if (channels <= 0) throw ConfigError("gate: channels must be positive");
  if (labels.empty()) throw ConfigError("gate: needs at least one expert");
  const auto c = static_cast<std::size_t>(channels);
  GatingNetwork g;
  g.self_attn = AttentionParams::init(c, rng);
  g.norm_self = NormParams::init(c);
  g.prompt_to_image = AttentionParams::init(c, rng);
  g.norm_prompt_to_image = NormParams::init(c);
  g.prompt_mlp = MlpParams::init(c, 4 * c, rng);
  g.norm_mlp = NormParams::init(c);
  g.image_to_prompt = AttentionParams::init(c, rng);
  g.norm_image_to_prompt = NormParams::init(c);
  g.fc1_weight = init_weight(c, c, rng);
  g.fc1_bias = Tensor::zeros({c}, true);
  g.fc2_weight = init_weight(c, labels.size(), rng);
  g.fc2_bias = Tensor::zeros({labels.size()}, true);
  g.expert_labels = std::move(labels);
  return g;
}

void GatingNetwork::collect(const std::string& prefix, NamedTensors& out) const {
  self_attn.collect(prefix + "self_attn.", out);
  norm_self.collect(prefix + "norm_self.", out);
  prompt_to_image.collect(prefix + "prompt_to_image.", out);
  norm_prompt_to_image.collect(prefix + "norm_prompt_to_image.", out);
  prompt_mlp.collect(prefix + "prompt_mlp.", out);
  norm_mlp.collect(prefix + "norm_mlp.", out);
  image_to_prompt.collect(prefix + "image_to_prompt.", out);
  norm_image_to_prompt.collect(prefix + "norm_image_to_prompt.", out);
  out.emplace_back(prefix + "fc1.weight", fc1_weight);
  out.emplace_back(prefix + "fc1.bias", fc1_bias);
  out.emplace_back(prefix + "fc2.weight", fc2_weight);
  out.emplace_back(prefix + "fc2.bias", fc2_bias);
}

void GatingNetwork::set_trainable(bool flag) {
  NamedTensors params;
  collect("", params);
  for (auto& [name, t] : params) t.set_requires_grad(flag);
}

GatingNetwork GatingNetwork::clone() const {
  GatingNetwork g;
  g.self_attn = self_attn.clone();
  g.norm_self = norm_self.clone();
  g.prompt_to_image = prompt_to_image.clone();
  g.norm_prompt_to_image = norm_prompt_to_image.clone();
  g.prompt_mlp = prompt_mlp.clone();
  g.norm_mlp = norm_mlp.clone();
  g.image_to_prompt = image_to_prompt.clone();
  g.norm_image_to_prompt = norm_image_to_prompt.clone();
  g.fc1_weight = fc1_weight.clone();
  g.fc1_bias = fc1_bias.clone();
  g.fc2_weight = fc2_weight.clone();
  g.fc2_bias = fc2_bias.clone();
  g.expert_labels = expert_labels;
  return g;
}

void GatingNetwork::rebind(const std::vector<std::string>& labels) {
  if (labels.empty()) throw ConfigError("gate: needs at least one expert");
  const std::size_t c = channels();
  const std::size_t m_old = experts();
  const std::size_t m_new = labels.size();
  std::vector<double> w(c * m_new, 0.0), b(m_new, 0.0);
  auto old_w = fc2_weight.data();
  auto old_b = fc2_bias.data();
  for (std::size_t k = 0; k < m_new; ++k) {
    auto it = std::find(expert_labels.begin(), expert_labels.end(), labels[k]);
    if (it == expert_labels.end()) continue;
    const auto src = static_cast<std::size_t>(it - expert_labels.begin());
    for (std::size_t j = 0; j < c; ++j) w[j * m_new + k] = old_w[j * m_old + src];
    b[k] = old_b[src];
  }
  const bool trainable = fc2_weight.requires_grad();
  fc2_weight = Tensor::from({c, m_new}, std::move(w), trainable);
  fc2_bias = Tensor::from({m_new}, std::move(b), trainable);
  expert_labels = labels;
}

Tensor gate_logits(const GatingNetwork& gate, const ImageEmbedding& image, const PromptEmbedding& prompt) {
  if (gate.experts() == 0) throw ContractError("gate_forward: gate has no experts");
  const std::size_t c = gate.channels();
  if (image.tokens.rank() != 2 || image.tokens.dim(1) != c || prompt.vector.numel() != c) {
    throw DimensionError("gate_forward: embeddings " + shape_to_string(image.tokens.shape()) + " / " +
                         shape_to_string(prompt.vector.shape()) + " do not match gate width " +
                         std::to_string(c));
  }
  Tensor p = reshape(prompt.vector, {1, c});
  p = apply_norm(gate.norm_self, add(p, attend(gate.self_attn, p, p)));
  p = apply_norm(gate.norm_prompt_to_image, add(p, attend(gate.prompt_to_image, p, image.tokens)));
  p = apply_norm(gate.norm_mlp, add(p, apply_mlp(gate.prompt_mlp, p)));
  Tensor tokens = apply_norm(gate.norm_image_to_prompt,
                             add(image.tokens, attend(gate.image_to_prompt, image.tokens, p)));
  Tensor pooled = mean_rows(tokens);
  Tensor hidden = gelu(add_rowvec(matmul(pooled, gate.fc1_weight), gate.fc1_bias));
  return add_rowvec(matmul(hidden, gate.fc2_weight), gate.fc2_bias);
}

GateScores scores_from_logits(std::span<const double> logits) {
  if (logits.empty()) throw ContractError("gate scores: empty logit vector");
  GateScores out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  out.scores.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out.scores[k] = std::exp(logits[k] - mx);
    total += out.scores[k];
  }
  for (auto& s : out.scores) s /= total;
  out.top_index = 0;
  for (std::size_t k = 1; k < out.scores.size(); ++k) {
    if (out.scores[k] > out.scores[out.top_index]) out.top_index = k;
  }
  out.s_top = out.scores[out.top_index];
  return out;
}

GateScores gate_forward(const GatingNetwork& gate, const ImageEmbedding& image, const PromptEmbedding& prompt) {
  NoGradGuard no_grad;
  Tensor logits = gate_logits(gate, image, prompt);
  return scores_from_logits(logits.data());
}

Tensor gate_soft_ce_loss(const Tensor& logits, std::span<const double> target_distribution) {
  const std::size_t m = logits.numel();
  if (target_distribution.size() != m) {
    throw ContractError("gate_ce_loss: target distribution has " + std::to_string(target_distribution.size()) +
                        " entries for " + std::to_string(m) + " experts");
  }
  auto z = logits.data();
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - mx);
  const double lse = mx + std::log(total);
  double loss = 0.0;
  double mass = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    loss += target_distribution[k] * (lse - z[k]);
    mass += target_distribution[k];
  }
  std::vector<double> probs(m);
  for (std::size_t k = 0; k < m; ++k) probs[k] = std::exp(z[k] - lse);
  std::vector<double> target(target_distribution.begin(), target_distribution.end());
  return detail::make_result({1}, {loss}, {logits}, "gate_ce",
                             [probs = std::move(probs), target = std::move(target), mass](
                                 const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               auto g = detail::grad_buffer(in[0]);
                               for (std::size_t k = 0; k < g.size(); ++k) {
                                 g[k] += o.grad[0] * (mass * probs[k] - target[k]);
                               }
                             });
}

Tensor gate_ce_loss(const Tensor& logits, std::size_t target) {
  const std::size_t m = logits.numel();
  if (target >= m) {
    throw ContractError("gate_ce_loss: target " + std::to_string(target) + " out of range for " +
                        std::to_string(m) + " experts");
  }
  std::vector<double> onehot(m, 0.0);
  onehot[target] = 1.0;
  return gate_soft_ce_loss(logits, onehot);
}

std::string gate_prefix() { return "gate."; }

}  // namespace moe3d
