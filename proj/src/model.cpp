// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "moe3d/model.hpp"

#include <set>
#include <sstream>

#include "moe3d/errors.hpp"

namespace moe3d {

namespace {

constexpr const char* kConfigKey = "config";
constexpr const char* kExpertsKey = "experts";
constexpr const char* kGateExpertsKey = "gate_experts";

}  // namespace

std::string encoder_prefix() { return "encoder."; }
std::string prompt_encoder_prefix() { return "prompt_encoder."; }

Model Model::init(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  Rng enc_rng(derive_seed(seed, "encoder"));
  m.image_encoder = ImageEncoder::init(config, enc_rng);
  Rng prompt_rng(derive_seed(seed, "prompt_encoder"));
  m.prompt_encoder = PromptEncoder::init(config.channels, prompt_rng);
  Rng dec_rng(derive_seed(seed, "decoder.general"));
  m.bank = ExpertBank(MaskDecoder::init(config, dec_rng));
  return m;
}

NamedTensors Model::named_tensors() const {
  NamedTensors out;
  image_encoder.collect(encoder_prefix(), out);
  prompt_encoder.collect(prompt_encoder_prefix(), out);
  bank.collect(out);
  if (gate) gate->collect(gate_prefix(), out);
  return out;
}

Model Model::deep_copy() const {
  Model m;
  m.config = config;
  m.image_encoder = image_encoder;
  m.prompt_encoder = prompt_encoder;
  // Encoder structs hold shared tensor handles; rebuild them with cloned data.
  m.image_encoder.patch_weight = image_encoder.patch_weight.clone();
  m.image_encoder.patch_bias = image_encoder.patch_bias.clone();
  for (auto& block : m.image_encoder.blocks) {
    block.attn = block.attn.clone();
    block.norm1 = block.norm1.clone();
    block.mlp = block.mlp.clone();
    block.norm2 = block.norm2.clone();
  }
  m.prompt_encoder.foreground = prompt_encoder.foreground.clone();
  m.prompt_encoder.background = prompt_encoder.background.clone();
  m.prompt_encoder.box_min = prompt_encoder.box_min.clone();
  m.prompt_encoder.box_max = prompt_encoder.box_max.clone();
  m.bank = bank.deep_copy();
  if (gate) m.gate = gate->clone();
  return m;
}

void Model::freeze_all() {
  image_encoder.set_trainable(false);
  prompt_encoder.set_trainable(false);
  bank.general().set_trainable(false);
  for (std::size_t k = 0; k < bank.size(); ++k) bank.expert_by_index(k).decoder.set_trainable(false);
  if (gate) gate->set_trainable(false);
}

ImageEmbedding Model::embed_image(const Volume& volume) const { return encode_image(image_encoder, volume); }

PromptEmbedding Model::embed_prompt(const PromptSpec& prompt) const {
  return encode_prompt(prompt_encoder, prompt, config.volume_side);
}

Tensor Model::infer_general(const Volume& volume, const PromptSpec& prompt) const {
  NoGradGuard no_grad;
  return decode(bank.general(), embed_image(volume), embed_prompt(prompt)).probabilities();
}

MoeOutput Model::infer(const Volume& volume, const PromptSpec& prompt, const SelectorConfig& selector,
                       DecodeProbe* probe) const {
  NoGradGuard no_grad;
  const ImageEmbedding image = embed_image(volume);
  const PromptEmbedding p = embed_prompt(prompt);
  return moe_from_embeddings(bank, gate ? &*gate : nullptr, image, p, selector, probe);
}

std::map<std::string, std::uint32_t> group_checksums(const Model& model) {
  std::map<std::string, std::uint32_t> out;
  NamedTensors group;
  model.image_encoder.collect("", group);
  out["encoder"] = tensors_checksum(group);
  group.clear();
  model.prompt_encoder.collect("", group);
  out["prompt_encoder"] = tensors_checksum(group);
  group.clear();
  model.bank.general().collect("", group);
  out["decoder.general"] = tensors_checksum(group);
  for (std::size_t k = 0; k < model.bank.size(); ++k) {
    const auto& e = model.bank.expert_by_index(k);
    group.clear();
    e.decoder.collect("", group);
    out["decoder.expert." + e.label] = tensors_checksum(group);
  }
  if (model.gate) {
    group.clear();
    model.gate->collect("", group);
    out["gate"] = tensors_checksum(group);
  }
  return out;
}

std::string join_labels(const std::vector<std::string>& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ',';
    out += labels[i];
  }
  return out.empty() ? "-" : out;
}

std::vector<std::string> split_labels(const std::string& text) {
  std::vector<std::string> out;
  if (text.empty() || text == "-") return out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(item);
  return out;
}

CheckpointData model_checkpoint(const Model& model, const std::vector<std::pair<std::string, std::string>>& extra_meta) {
  CheckpointData data;
  data.meta.emplace_back(kConfigKey, model.config.to_string());
  data.meta.emplace_back(kExpertsKey, join_labels(model.bank.labels()));
  if (model.gate) data.meta.emplace_back(kGateExpertsKey, join_labels(model.gate->expert_labels));
  for (const auto& kv : extra_meta) data.meta.push_back(kv);
  data.tensors = model.named_tensors();
  return data;
}

void save_model(const Model& model, const std::filesystem::path& path,
                const std::vector<std::pair<std::string, std::string>>& extra_meta) {
  write_checkpoint(path, model_checkpoint(model, extra_meta));
}

Model model_from_checkpoint(const CheckpointData& ckpt) {
  const std::string config_text = ckpt.meta_value(kConfigKey);
  if (config_text.empty()) throw LoadError("checkpoint has no encoder config");
  EncoderConfig config;
  try {
    config = EncoderConfig::parse(config_text);
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint config is invalid: ") + e.what());
  }
  const auto experts = split_labels(ckpt.meta_value(kExpertsKey));
  Model model = Model::init(config, 0);
  for (const auto& label : experts) {
    try {
      model.bank.clone_expert(label);
    } catch (const RegistryError& e) {
      throw LoadError(std::string("checkpoint expert manifest is invalid: ") + e.what());
    }
  }
  bool has_gate_tensors = false;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind(gate_prefix(), 0) == 0) has_gate_tensors = true;
  }
  bool has_gate_manifest = false;
  for (const auto& [key, value] : ckpt.meta) has_gate_manifest |= key == kGateExpertsKey;
  if (has_gate_tensors || has_gate_manifest) {
    const auto gate_experts = split_labels(ckpt.meta_value(kGateExpertsKey));
    if (gate_experts != experts) {
      throw LoadError("gate expert manifest [" + join_labels(gate_experts) + "] does not match bank manifest [" +
                      join_labels(experts) + "]");
    }
    if (experts.empty()) throw LoadError("checkpoint carries a gate but the bank is empty");
    Rng rng(0);
    model.gate = GatingNetwork::init(config.channels, experts, rng);
  }
  NamedTensors expected = model.named_tensors();
  std::set<std::string> names;
  for (auto& [name, t] : expected) {
    load_into(ckpt, name, t);
    names.insert(name);
  }
  for (const auto& [name, t] : ckpt.tensors) {
    if (!names.count(name)) throw LoadError("checkpoint has unexpected tensor '" + name + "'");
  }
  return model;
}

Model load_model(const std::filesystem::path& path) { return model_from_checkpoint(read_checkpoint(path)); }

}  // namespace moe3d
