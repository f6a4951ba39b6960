// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "moe3d/decoder_bank.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <mutex>
#include <utility>

#include "moe3d/errors.hpp"

namespace moe3d {

namespace {

// Token-major (token, sub-voxel) -> volume gather indices, inverted from patch_layout.
const std::vector<std::uint32_t>& unpatch_index(int grid_side, int patch_size) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::vector<std::uint32_t>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& entry = cache[{grid_side, patch_size}];
  if (entry.empty()) {
    const auto layout = patch_layout(grid_side * patch_size, patch_size);
    entry.resize(layout.size());
    for (std::size_t i = 0; i < layout.size(); ++i) entry[layout[i]] = static_cast<std::uint32_t>(i);
  }
  return entry;
}

bool valid_label(const std::string& label) {
  if (label.empty()) return false;
  for (char c : label) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

}  // namespace

MaskDecoder MaskDecoder::init(const EncoderConfig& config, Rng& rng) {
  config.validate();
  const auto c = static_cast<std::size_t>(config.channels);
  const auto p3 = static_cast<std::size_t>(config.patch_voxels());
  MaskDecoder d;
  d.patch_size = config.patch_size;
  d.cross = AttentionParams::init(c, rng);
  d.norm_query = NormParams::init(c);
  d.mlp = MlpParams::init(c, 4 * c, rng);
  d.norm_tokens = NormParams::init(c);
  d.head_weight = init_weight(c, p3, rng);
  d.head_bias = Tensor::zeros({p3}, true);
  return d;
}

MaskDecoder MaskDecoder::clone() const {
  MaskDecoder d;
  d.patch_size = patch_size;
  d.cross = cross.clone();
  d.norm_query = norm_query.clone();
  d.mlp = mlp.clone();
  d.norm_tokens = norm_tokens.clone();
  d.head_weight = head_weight.clone();
  d.head_bias = head_bias.clone();
  return d;
}

void MaskDecoder::collect(const std::string& prefix, NamedTensors& out) const {
  cross.collect(prefix + "cross.", out);
  norm_query.collect(prefix + "norm_query.", out);
  mlp.collect(prefix + "mlp.", out);
  norm_tokens.collect(prefix + "norm_tokens.", out);
  out.emplace_back(prefix + "head.weight", head_weight);
  out.emplace_back(prefix + "head.bias", head_bias);
}

void MaskDecoder::set_trainable(bool flag) {
  NamedTensors params;
  collect("", params);
  for (auto& [name, t] : params) t.set_requires_grad(flag);
}

double MaskLogits::global_average() const {
  double total = 0.0;
  for (double v : logits.data()) total += v;
  return total / static_cast<double>(logits.numel());
}

MaskLogits decode(const MaskDecoder& decoder, const ImageEmbedding& image, const PromptEmbedding& prompt) {
  const std::size_t c = decoder.channels();
  if (image.tokens.rank() != 2 || image.tokens.dim(1) != c || prompt.vector.numel() != c) {
    throw ConfigError("decode: embeddings " + shape_to_string(image.tokens.shape()) + " / " +
                      shape_to_string(prompt.vector.shape()) + " do not match decoder width " +
                      std::to_string(c));
  }
  const auto g = static_cast<std::size_t>(image.grid_side);
  if (image.tokens.dim(0) != g * g * g) throw ConfigError("decode: token count does not match grid side");

  Tensor query = apply_norm(decoder.norm_query, add(prompt.vector, attend(decoder.cross, prompt.vector, image.tokens)));
  Tensor mixed = add_rowvec(image.tokens, query);
  Tensor tokens = apply_norm(decoder.norm_tokens, add(mixed, apply_mlp(decoder.mlp, mixed)));
  Tensor sub = add_rowvec(matmul(tokens, decoder.head_weight), decoder.head_bias);
  const auto side = g * static_cast<std::size_t>(decoder.patch_size);
  const auto& index = unpatch_index(image.grid_side, decoder.patch_size);
  return {gather(sub, index, {side, side, side})};
}

void ExpertBank::clone_expert(const std::string& label) { add_expert(label, general_.clone()); }

void ExpertBank::add_expert(const std::string& label, MaskDecoder decoder) {
  if (!valid_label(label)) throw RegistryError("expert label '" + label + "' is not a valid identifier");
  if (index_of(label)) throw RegistryError("expert '" + label + "' is already registered");
  experts_.push_back({label, std::move(decoder)});
}

const Expert& ExpertBank::expert_by_index(std::size_t k) const {
  if (k >= experts_.size()) {
    throw RegistryError("expert index " + std::to_string(k) + " out of range for bank of " +
                        std::to_string(experts_.size()));
  }
  return experts_[k];
}

Expert& ExpertBank::expert_by_index(std::size_t k) {
  return const_cast<Expert&>(std::as_const(*this).expert_by_index(k));
}

std::optional<std::size_t> ExpertBank::index_of(const std::string& label) const {
  for (std::size_t k = 0; k < experts_.size(); ++k) {
    if (experts_[k].label == label) return k;
  }
  return std::nullopt;
}

const Expert& ExpertBank::expert(const std::string& label) const {
  auto k = index_of(label);
  if (!k) throw RegistryError("no expert registered under '" + label + "'");
  return experts_[*k];
}

Expert& ExpertBank::expert(const std::string& label) {
  return const_cast<Expert&>(std::as_const(*this).expert(label));
}

std::vector<std::string> ExpertBank::labels() const {
  std::vector<std::string> out;
  for (const auto& e : experts_) out.push_back(e.label);
  return out;
}

ExpertBank ExpertBank::deep_copy() const {
  ExpertBank bank(general_.clone());
  for (const auto& e : experts_) bank.experts_.push_back({e.label, e.decoder.clone()});
  return bank;
}

void ExpertBank::collect(NamedTensors& out) const {
  general_.collect(general_decoder_prefix(), out);
  for (const auto& e : experts_) e.decoder.collect(expert_decoder_prefix(e.label), out);
}

std::string general_decoder_prefix() { return "decoder.general."; }
std::string expert_decoder_prefix(const std::string& label) { return "decoder.expert." + label + "."; }

}  // namespace moe3d
