// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "moe3d/selector.hpp"

#include <algorithm>
#include <cmath>

#include "moe3d/errors.hpp"

namespace moe3d {

std::string to_string(Fusion fusion) {
  switch (fusion) {
    case Fusion::weighted: return "weighted";
    case Fusion::avg: return "avg";
    case Fusion::aft_weight: return "aft_weight";
  }
  return "weighted";
}

Fusion parse_fusion(const std::string& name) {
  if (name == "weighted") return Fusion::weighted;
  if (name == "avg") return Fusion::avg;
  if (name == "aft_weight") return Fusion::aft_weight;
  throw ConfigError("unknown fusion rule '" + name + "' (expected weighted, avg or aft_weight)");
}

void SelectorConfig::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("selector: tau " + std::to_string(tau) + " outside [0, 1]");
}

DecodedMask DecodedMask::from_logits(const MaskLogits& logits) {
  return {logits.probabilities(), logits.global_average()};
}

bool switch_fires(double s_top, double tau) { return s_top > tau; }

std::pair<double, double> aft_weights(double general_average, double top_average) {
  const double mx = std::max(general_average, top_average);
  const double eg = std::exp(general_average - mx);
  const double et = std::exp(top_average - mx);
  return {eg / (eg + et), et / (eg + et)};
}

Tensor select_mask(const DecodedMask& general, const DecodedMask& top, double s_top, const SelectorConfig& config) {
  if (!(s_top >= 0.0 && s_top <= 1.0)) {
    throw ContractError("select_mask: s_top " + std::to_string(s_top) + " outside [0, 1]");
  }
  if (!switch_fires(s_top, config.tau)) return general.probabilities;
  if (general.probabilities.shape() != top.probabilities.shape()) {
    throw ContractError("select_mask: mask shapes " + shape_to_string(general.probabilities.shape()) + " and " +
                        shape_to_string(top.probabilities.shape()) + " differ");
  }
  auto g = general.probabilities.data();
  auto t = top.probabilities.data();
  std::vector<double> out(g.size());
  double wg = 0.5, wt = 0.5;
  if (config.fusion == Fusion::weighted) {
    wg = 1.0 - s_top;
    wt = s_top;
  } else if (config.fusion == Fusion::aft_weight) {
    std::tie(wg, wt) = aft_weights(general.logit_average, top.logit_average);
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = config.fusion == Fusion::avg ? (g[i] + t[i]) / 2.0 : wg * g[i] + wt * t[i];
    out[i] = std::clamp(v, std::min(g[i], t[i]), std::max(g[i], t[i]));
  }
  return Tensor::from(general.probabilities.shape(), std::move(out));
}

MoeOutput moe_from_embeddings(const ExpertBank& bank, const GatingNetwork* gate, const ImageEmbedding& image,
                              const PromptEmbedding& prompt, const SelectorConfig& config, DecodeProbe* probe) {
  config.validate();
  NoGradGuard no_grad;
  MoeOutput out;
  if (probe) ++probe->general_calls;
  const DecodedMask general = DecodedMask::from_logits(decode(bank.general(), image, prompt));
  if (bank.empty()) {
    out.probabilities = general.probabilities;
    return out;
  }
  if (gate == nullptr) throw ContractError("moe_infer: bank has experts but no gating network");
  if (gate->expert_labels != bank.labels()) {
    throw ContractError("moe_infer: gate is bound to a different expert manifest than the bank");
  }
  const GateScores scores = gate_forward(*gate, image, prompt);
  out.report.gated = true;
  out.report.top_index = scores.top_index;
  out.report.top_label = bank.expert_by_index(scores.top_index).label;
  out.report.s_top = scores.s_top;
  out.report.scores = scores.scores;
  out.report.fired = switch_fires(scores.s_top, config.tau);
  if (!out.report.fired) {
    out.probabilities = general.probabilities;
    return out;
  }
  if (probe) ++probe->expert_calls;
  const DecodedMask top =
      DecodedMask::from_logits(decode(bank.expert_by_index(scores.top_index).decoder, image, prompt));
  out.probabilities = select_mask(general, top, scores.s_top, config);
  return out;
}

std::vector<std::uint8_t> binarize(const Tensor& probabilities) {
  auto p = probabilities.data();
  std::vector<std::uint8_t> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > 0.5 ? 1 : 0;
  return out;
}

}  // namespace moe3d
