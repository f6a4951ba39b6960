// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "moe3d/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "moe3d/adamw.hpp"
#include "moe3d/errors.hpp"

namespace moe3d {

namespace {

void check_target(const Tensor& x, std::span<const std::uint8_t> target, const char* op) {
  if (x.numel() != target.size()) {
    throw ContractError(std::string(op) + ": prediction has " + std::to_string(x.numel()) + " voxels, target has " +
                        std::to_string(target.size()));
  }
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor dice_loss(const Tensor& probs, std::span<const std::uint8_t> target, double eps) {
  check_target(probs, target, "dice_loss");
  auto p = probs.data();
  double inter = 0.0, sum_p = 0.0, sum_t = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    inter += p[i] * target[i];
    sum_p += p[i];
    sum_t += target[i];
  }
  const double num = 2.0 * inter + eps;
  const double den = sum_p + sum_t + eps;
  std::vector<std::uint8_t> t(target.begin(), target.end());
  return detail::make_result({1}, {1.0 - num / den}, {probs}, "dice_loss",
                             [t = std::move(t), num, den](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               auto g = detail::grad_buffer(in[0]);
                               const double scale = o.grad[0] / (den * den);
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 g[i] -= scale * (2.0 * t[i] * den - num);
                               }
                             });
}

Tensor bce_loss(const Tensor& logits, std::span<const std::uint8_t> target) {
  check_target(logits, target, "bce_loss");
  auto x = logits.data();
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += softplus(x[i]) - x[i] * target[i];
  const double n = static_cast<double>(x.size());
  std::vector<std::uint8_t> t(target.begin(), target.end());
  return detail::make_result({1}, {total / n}, {logits}, "bce_loss",
                             [t = std::move(t), n](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               auto g = detail::grad_buffer(in[0]);
                               auto xv = in[0].data();
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 g[i] += o.grad[0] * (stable_sigmoid(xv[i]) - t[i]) / n;
                               }
                             });
}

Tensor dicece_loss(const Tensor& logits, std::span<const std::uint8_t> target, double eps) {
  return add(dice_loss(sigmoid(logits), target, eps), bce_loss(logits, target));
}

Tensor bce_prob_loss(const Tensor& probs, std::span<const std::uint8_t> target) {
  check_target(probs, target, "bce_prob_loss");
  constexpr double kClamp = 1e-12;
  auto p = probs.data();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kClamp, 1.0 - kClamp);
    total -= target[i] ? std::log(q) : std::log1p(-q);
  }
  const double n = static_cast<double>(p.size());
  std::vector<std::uint8_t> t(target.begin(), target.end());
  return detail::make_result({1}, {total / n}, {probs}, "bce_prob_loss",
                             [t = std::move(t), n](const detail::TensorImpl& o, std::vector<Tensor>& in) {
                               auto g = detail::grad_buffer(in[0]);
                               auto pv = in[0].data();
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 if (pv[i] < kClamp || pv[i] > 1.0 - kClamp) continue;
                                 g[i] += o.grad[0] * (t[i] ? -1.0 / pv[i] : 1.0 / (1.0 - pv[i])) / n;
                               }
                             });
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::expert_finetune: return "expert_finetune";
    case TrainMode::gate_only: return "gate_only";
    case TrainMode::gate_plus_top1: return "gate_plus_top1";
  }
  return "gate_only";
}

TrainMode parse_train_mode(const std::string& name) {
  if (name == "expert_finetune") return TrainMode::expert_finetune;
  if (name == "gate_only") return TrainMode::gate_only;
  if (name == "gate_plus_top1") return TrainMode::gate_plus_top1;
  throw ConfigError("unknown training mode '" + name + "' (expected expert_finetune, gate_only or gate_plus_top1)");
}

void TrainConfig::validate() const {
  if (!(lr_pretrain > 0.0 && lr_expert > 0.0 && lr_gate > 0.0)) throw ConfigError("train config: lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("train config: weight_decay must be non-negative");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be at least 1");
  if (steps < 0) throw ConfigError("train config: steps must be non-negative");
  if (!(dice_smooth > 0.0)) throw ConfigError("train config: dice_smooth must be positive");
  if (general_weight < 0.0) throw ConfigError("train config: general_weight must be non-negative");
  if (!(pair_fraction >= 0.0 && pair_fraction <= 1.0)) throw ConfigError("train config: pair_fraction outside [0, 1]");
}

std::string TrainConfig::to_string() const {
  std::ostringstream out;
  out << std::setprecision(17) << "lr_pretrain=" << lr_pretrain << " lr_expert=" << lr_expert << " lr_gate=" << lr_gate
      << " weight_decay=" << weight_decay << " batch_size=" << batch_size << " steps=" << steps << " seed=" << seed
      << " dice_smooth=" << dice_smooth << " mode=" << moe3d::to_string(mode) << " general_weight=" << general_weight
      << " pair_fraction=" << pair_fraction;
  return out.str();
}

FreezePolicy FreezePolicy::for_mode(TrainMode mode, const Model& model, const std::string& label) {
  FreezePolicy p;
  for (const auto& [group, crc] : group_checksums(model)) p.frozen_groups.insert(group);
  switch (mode) {
    case TrainMode::expert_finetune:
      p.frozen_groups.erase("decoder.expert." + label);
      break;
    case TrainMode::gate_only:
      p.frozen_groups.erase("gate");
      break;
    case TrainMode::gate_plus_top1:
      p.frozen_groups.erase("gate");
      for (const auto& l : model.bank.labels()) p.frozen_groups.erase("decoder.expert." + l);
      break;
  }
  return p;
}

FreezePolicy FreezePolicy::for_pretraining(const Model& model) {
  FreezePolicy p;
  for (const auto& [group, crc] : group_checksums(model)) p.frozen_groups.insert(group);
  for (const char* g : {"encoder", "prompt_encoder", "decoder.general"}) p.frozen_groups.erase(g);
  return p;
}

std::vector<std::string> freeze_violations(const std::map<std::string, std::uint32_t>& before,
                                           const std::map<std::string, std::uint32_t>& after,
                                           const FreezePolicy& policy) {
  std::vector<std::string> out;
  for (const auto& group : policy.frozen_groups) {
    auto b = before.find(group);
    auto a = after.find(group);
    if (b == before.end() || a == after.end() || b->second != a->second) out.push_back(group);
  }
  return out;
}

std::string LossCurve::to_csv() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << (gate_ce.empty() ? "step,loss\n" : "step,loss,gate_ce\n");
  for (std::size_t i = 0; i < loss.size(); ++i) {
    out << (i + 1) << ',' << loss[i];
    if (!gate_ce.empty()) out << ',' << gate_ce[i];
    out << '\n';
  }
  return out.str();
}

double LossCurve::window_mean(std::size_t begin, std::size_t end) const {
  end = std::min(end, loss.size());
  if (begin >= end) throw ContractError("loss curve: empty window");
  double total = 0.0;
  for (std::size_t i = begin; i < end; ++i) total += loss[i];
  return total / static_cast<double>(end - begin);
}

namespace {

std::vector<Tensor> params_of(const NamedTensors& named) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

AdamWOptions adamw_options(double lr, const TrainConfig& config) {
  AdamWOptions o;
  o.lr = lr;
  o.weight_decay = config.weight_decay;
  return o;
}

PromptKind draw_kind(Rng& rng) { return std::uniform_int_distribution<int>(0, 1)(rng) ? PromptKind::bbox : PromptKind::points6; }

std::size_t draw_index(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

std::vector<ImageEmbedding> cache_embeddings(const Model& model, const std::vector<const Volume*>& volumes) {
  NoGradGuard no_grad;
  std::vector<ImageEmbedding> out;
  out.reserve(volumes.size());
  for (const auto* v : volumes) out.push_back(model.embed_image(*v));
  return out;
}

PromptEmbedding frozen_prompt(const Model& model, const PromptSpec& prompt) {
  NoGradGuard no_grad;
  return model.embed_prompt(prompt);
}

}  // namespace

LossCurve pretrain(Model& model, const Corpora& corpora, const TrainConfig& config) {
  config.validate();
  const auto samples = corpora.general_train();
  if (samples.empty()) throw ValidationError("pretrain: corpus has no general training samples");
  model.freeze_all();
  model.image_encoder.set_trainable(true);
  model.prompt_encoder.set_trainable(true);
  model.bank.general().set_trainable(true);
  NamedTensors named;
  model.image_encoder.collect("", named);
  model.prompt_encoder.collect("p.", named);
  model.bank.general().collect("d.", named);
  AdamW opt(params_of(named), adamw_options(config.lr_pretrain, config));
  Rng rng(derive_seed(config.seed, "pretrain"));
  const double inv_batch = 1.0 / config.batch_size;
  LossCurve curve;
  for (int step = 0; step < config.steps; ++step) {
    opt.zero_grad();
    double total = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      const Sample& s = *samples[draw_index(rng, samples.size())];
      const PromptKind kind = draw_kind(rng);
      const PromptSpec prompt = make_prompt(s.mask, kind, rng());
      const MaskLogits out = decode(model.bank.general(), model.embed_image(s.volume), model.embed_prompt(prompt));
      Tensor loss = scale(dicece_loss(out.logits, s.mask.data, config.dice_smooth), inv_batch);
      loss.backward();
      total += loss.item();
    }
    opt.step();
    curve.loss.push_back(total);
  }
  model.freeze_all();
  return curve;
}

LossCurve finetune_expert(Model& model, const std::string& label, const std::vector<const Sample*>& samples,
                          const TrainConfig& config) {
  config.validate();
  MaskDecoder& decoder = model.bank.expert(label).decoder;
  for (const auto* s : samples) {
    if (s->category != label) {
      throw ValidationError("finetune_expert: sample " + s->sample_id + " has category '" + s->category +
                            "', expected '" + label + "'");
    }
  }
  LossCurve curve;
  if (config.steps == 0) return curve;
  if (samples.empty()) throw ValidationError("finetune_expert: no samples for '" + label + "'");
  model.freeze_all();
  decoder.set_trainable(true);
  NamedTensors named;
  decoder.collect("", named);
  AdamW opt(params_of(named), adamw_options(config.lr_expert, config));
  std::vector<const Volume*> volumes;
  for (const auto* s : samples) volumes.push_back(&s->volume);
  const auto embeddings = cache_embeddings(model, volumes);
  Rng rng(derive_seed(config.seed, "finetune." + label));
  const double inv_batch = 1.0 / config.batch_size;
  for (int step = 0; step < config.steps; ++step) {
    opt.zero_grad();
    double total = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      const std::size_t i = draw_index(rng, samples.size());
      const PromptKind kind = draw_kind(rng);
      const PromptSpec prompt = make_prompt(samples[i]->mask, kind, rng());
      const MaskLogits out = decode(decoder, embeddings[i], frozen_prompt(model, prompt));
      Tensor loss = scale(dicece_loss(out.logits, samples[i]->mask.data, config.dice_smooth), inv_batch);
      loss.backward();
      total += loss.item();
    }
    opt.step();
    curve.loss.push_back(total);
  }
  model.freeze_all();
  return curve;
}

GateTrainingData GateTrainingData::from_corpora(const Corpora& corpora, const Model& model) {
  GateTrainingData d;
  d.volume_side = corpora.config.volume_side;
  const auto labels = model.bank.labels();
  for (const auto& spec : corpora.config.categories) {
    auto it = corpora.train.find(spec.name);
    if (it == corpora.train.end()) continue;
    const bool expert = std::find(labels.begin(), labels.end(), spec.name) != labels.end();
    for (const auto& s : it->second) (expert ? d.expert_samples : d.general_samples).push_back(&s);
    if (expert) d.expert_specs.push_back(spec);
  }
  return d;
}

namespace {

struct GateItem {
  std::size_t embedding = 0;
  const Mask* mask = nullptr;
  int target = -1;  // -1: uniform target
};

}  // namespace

LossCurve train_gating(Model& model, const GateTrainingData& data, const TrainConfig& config) {
  config.validate();
  if (config.mode == TrainMode::expert_finetune) {
    throw ConfigError("train_gating: mode must be gate_only or gate_plus_top1");
  }
  if (model.bank.empty()) throw ValidationError("train_gating: the expert bank is empty");
  const auto labels = model.bank.labels();
  auto label_index = [&](const std::string& category) -> int {
    auto k = model.bank.index_of(category);
    if (!k) throw ValidationError("train_gating: category '" + category + "' has no expert in the bank");
    return static_cast<int>(*k);
  };
  std::vector<const Volume*> volumes;
  std::vector<GateItem> singles, pairs;
  for (const auto* s : data.expert_samples) {
    singles.push_back({volumes.size(), &s->mask, label_index(s->category)});
    volumes.push_back(&s->volume);
  }
  if (singles.empty()) throw ValidationError("train_gating: no expert-category samples");
  if (config.general_weight > 0.0) {
    for (const auto* s : data.general_samples) {
      singles.push_back({volumes.size(), &s->mask, -1});
      volumes.push_back(&s->volume);
    }
  }
  std::vector<PairSample> pair_pool;
  if (config.pair_fraction > 0.0 && data.expert_specs.size() >= 2) {
    constexpr int kPairs = 200;
    Rng pair_rng(derive_seed(config.seed, "gate.pairs"));
    pair_pool.reserve(kPairs);
    for (int i = 0; i < kPairs; ++i) {
      const std::size_t a = draw_index(pair_rng, data.expert_specs.size());
      std::size_t b = draw_index(pair_rng, data.expert_specs.size() - 1);
      if (b >= a) ++b;
      pair_pool.push_back(generate_pair(data.expert_specs[a], data.expert_specs[b], data.volume_side, pair_rng()));
      const PairSample& p = pair_pool.back();
      pairs.push_back({volumes.size(), &p.mask_a, label_index(data.expert_specs[a].name)});
      pairs.push_back({volumes.size(), &p.mask_b, label_index(data.expert_specs[b].name)});
      volumes.push_back(&p.volume);
    }
  }
  const auto embeddings = cache_embeddings(model, volumes);

  if (!model.gate) {
    Rng init_rng(derive_seed(config.seed, "gate.init"));
    model.gate = GatingNetwork::init(model.config.channels, labels, init_rng);
  } else if (model.gate->expert_labels != labels) {
    model.gate->rebind(labels);
  }
  model.freeze_all();
  model.gate->set_trainable(true);
  NamedTensors gate_named;
  model.gate->collect("", gate_named);
  AdamW gate_opt(params_of(gate_named), adamw_options(config.lr_gate, config));
  const bool joint = config.mode == TrainMode::gate_plus_top1;
  NamedTensors expert_named;
  if (joint) {
    for (std::size_t k = 0; k < model.bank.size(); ++k) {
      model.bank.expert_by_index(k).decoder.set_trainable(true);
      model.bank.expert_by_index(k).decoder.collect(std::to_string(k) + ".", expert_named);
    }
  }
  AdamW expert_opt(params_of(expert_named), adamw_options(config.lr_expert, config));

  const std::vector<double> uniform_target(labels.size(), 1.0 / static_cast<double>(labels.size()));
  Rng rng(derive_seed(config.seed, "gate.train"));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double inv_batch = 1.0 / config.batch_size;
  LossCurve curve;
  for (int step = 0; step < config.steps; ++step) {
    gate_opt.zero_grad();
    expert_opt.zero_grad();
    double total = 0.0, total_ce = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      const bool use_pair = !pairs.empty() && coin(rng) < config.pair_fraction;
      const GateItem& item = use_pair ? pairs[draw_index(rng, pairs.size())] : singles[draw_index(rng, singles.size())];
      const PromptKind kind = draw_kind(rng);
      const PromptSpec prompt = make_prompt(*item.mask, kind, rng());
      const PromptEmbedding p = frozen_prompt(model, prompt);
      const ImageEmbedding& image = embeddings[item.embedding];
      Tensor logits = gate_logits(*model.gate, image, p);
      Tensor ce = item.target >= 0 ? gate_ce_loss(logits, static_cast<std::size_t>(item.target))
                                   : scale(gate_soft_ce_loss(logits, uniform_target), config.general_weight);
      Tensor loss = scale(ce, inv_batch);
      total_ce += loss.item();
      if (joint && item.target >= 0) {
        const GateScores scores = scores_from_logits(logits.data());
        Tensor general_probs;
        {
          NoGradGuard no_grad;
          general_probs = decode(model.bank.general(), image, p).probabilities();
        }
        const MaskDecoder& top = model.bank.expert_by_index(scores.top_index).decoder;
        Tensor top_probs = decode(top, image, p).probabilities();
        Tensor fused = add(scale(general_probs, 1.0 - scores.s_top), scale(top_probs, scores.s_top));
        Tensor seg = add(dice_loss(fused, item.mask->data, config.dice_smooth), bce_prob_loss(fused, item.mask->data));
        loss = add(loss, scale(seg, inv_batch));
      }
      loss.backward();
      total += loss.item();
    }
    gate_opt.step();
    if (joint) expert_opt.step();
    curve.loss.push_back(total);
    curve.gate_ce.push_back(total_ce);
  }
  model.freeze_all();
  return curve;
}

}  // namespace moe3d
