// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "moe3d/eval.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <sstream>
#include <tuple>

#include "moe3d/errors.hpp"

namespace moe3d {

double dice_score(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) {
    throw ContractError("dice_score: masks have " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                        " voxels");
  }
  std::size_t inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += x && y;
    na += x;
    nb += y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

std::string baseline_variant() { return "baseline"; }
std::string moe_variant() { return "moe"; }
std::string ft_expert_variant(const std::string& label) { return "ft_expert:" + label; }
std::string group_category(CategoryRole role) { return "group:" + to_string(role); }

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

struct Accumulator {
  double sum = 0.0;
  std::size_t n = 0;
  std::size_t fired = 0;

  void add(double v, bool f = false) {
    sum += v;
    ++n;
    fired += f;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
};

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

std::optional<double> EvalReport::mean_dice(const std::string& variant, const std::string& category,
                                            const std::string& prompt_kind) const {
  for (const auto& r : rows) {
    if (r.variant == variant && r.category == category && r.prompt_kind == prompt_kind) return r.mean_dice;
  }
  return std::nullopt;
}

double EvalReport::routing_accuracy(const std::vector<std::string>& expert_categories,
                                    const std::string& prompt_kind) const {
  std::size_t hit = 0, total = 0;
  for (const auto& r : routing) {
    if (!contains(expert_categories, r.category)) continue;
    if (!prompt_kind.empty() && r.prompt_kind != prompt_kind) continue;
    ++total;
    hit += r.top_label == r.category;
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

double EvalReport::mean_correct_s_top(const std::vector<std::string>& expert_categories,
                                      const std::string& prompt_kind) const {
  Accumulator acc;
  for (const auto& r : routing) {
    if (!contains(expert_categories, r.category) || r.top_label != r.category) continue;
    if (!prompt_kind.empty() && r.prompt_kind != prompt_kind) continue;
    acc.add(r.s_top);
  }
  return acc.mean();
}

double EvalReport::fired_rate(const std::vector<std::string>& categories) const {
  Accumulator acc;
  for (const auto& r : routing) {
    if (contains(categories, r.category)) acc.add(r.fired ? 1.0 : 0.0);
  }
  return acc.mean();
}

EvalReport run_matrix(const Model& model, const Corpora& corpora, const EvalOptions& options) {
  options.selector.validate();
  const auto labels = model.bank.labels();
  const bool with_moe = model.bank.empty() || model.gate.has_value();
  std::vector<std::string> variants{baseline_variant()};
  if (options.include_ft_experts) {
    for (const auto& l : labels) variants.push_back(ft_expert_variant(l));
  }
  if (with_moe) variants.push_back(moe_variant());

  std::map<std::tuple<std::string, std::string, std::string>, Accumulator> acc;
  EvalReport report;
  NoGradGuard no_grad;
  for (const auto& spec : corpora.config.categories) {
    auto it = corpora.held_out.find(spec.name);
    if (it == corpora.held_out.end()) continue;
    const std::string group = group_category(spec.role);
    for (const auto& sample : it->second) {
      const ImageEmbedding image = model.embed_image(sample.volume);
      for (PromptKind kind : options.prompts) {
        const std::string k = to_string(kind);
        const PromptEmbedding prompt = model.embed_prompt(make_prompt(sample, kind));
        auto record = [&](const std::string& variant, double d) {
          acc[{variant, spec.name, k}].add(d);
          acc[{variant, group, k}].add(d);
        };
        record(baseline_variant(),
               dice_score(binarize(decode(model.bank.general(), image, prompt).probabilities()), sample.mask.data));
        if (options.include_ft_experts) {
          for (std::size_t e = 0; e < model.bank.size(); ++e) {
            const auto& expert = model.bank.expert_by_index(e);
            record(ft_expert_variant(expert.label),
                   dice_score(binarize(decode(expert.decoder, image, prompt).probabilities()), sample.mask.data));
          }
        }
        if (!with_moe) continue;
        const MoeOutput out =
            moe_from_embeddings(model.bank, model.gate ? &*model.gate : nullptr, image, prompt, options.selector);
        const double d = dice_score(binarize(out.probabilities), sample.mask.data);
        record(moe_variant(), d);
        RoutingRow row;
        row.sample_id = sample.sample_id;
        row.category = sample.category;
        row.top_label = out.report.gated ? out.report.top_label : "none";
        row.s_top = out.report.s_top;
        row.fired = out.report.fired;
        row.dice = d;
        row.prompt_kind = k;
        ++report.confusion[row.category][row.top_label];
        report.routing.push_back(std::move(row));
      }
    }
  }
  std::vector<std::string> categories;
  for (const auto& spec : corpora.config.categories) {
    if (corpora.held_out.count(spec.name)) categories.push_back(spec.name);
  }
  categories.push_back(group_category(CategoryRole::general));
  categories.push_back(group_category(CategoryRole::expert));
  for (const auto& variant : variants) {
    for (const auto& category : categories) {
      for (PromptKind kind : options.prompts) {
        auto found = acc.find({variant, category, to_string(kind)});
        if (found == acc.end()) continue;
        report.rows.push_back({variant, category, to_string(kind), found->second.mean(), found->second.n});
      }
    }
  }
  return report;
}

double general_heldout_dice(const Model& model, const Corpora& corpora) {
  EvalOptions options;
  options.include_ft_experts = false;
  Accumulator acc;
  NoGradGuard no_grad;
  for (const auto& name : corpora.config.names(CategoryRole::general)) {
    auto it = corpora.held_out.find(name);
    if (it == corpora.held_out.end()) continue;
    for (const auto& sample : it->second) {
      const ImageEmbedding image = model.embed_image(sample.volume);
      for (PromptKind kind : options.prompts) {
        const PromptEmbedding prompt = model.embed_prompt(make_prompt(sample, kind));
        acc.add(dice_score(binarize(decode(model.bank.general(), image, prompt).probabilities()), sample.mask.data));
      }
    }
  }
  return acc.mean();
}

const AblationCell* AblationReport::find(double tau, Fusion fusion, const std::string& group,
                                         const std::string& prompt_kind) const {
  for (const auto& c : cells) {
    if (c.tau == tau && c.fusion == fusion && c.category_group == group && c.prompt_kind == prompt_kind) return &c;
  }
  return nullptr;
}

AblationReport run_ablation(const Model& model, const Corpora& corpora, const AblationGrid& grid,
                            const std::vector<PromptKind>& prompts) {
  for (double tau : grid.taus) SelectorConfig{tau, Fusion::weighted}.validate();
  if (!model.bank.empty() && !model.gate) throw ContractError("run_ablation: bank has experts but no gate");
  const std::size_t n_cells = grid.taus.size() * grid.fusions.size();
  // [cell][group][prompt index, last = pooled]
  std::vector<std::array<std::vector<Accumulator>, 2>> acc(n_cells);
  for (auto& cell : acc) {
    for (auto& g : cell) g.assign(prompts.size() + 1, {});
  }
  NoGradGuard no_grad;
  for (const auto& spec : corpora.config.categories) {
    auto it = corpora.held_out.find(spec.name);
    if (it == corpora.held_out.end()) continue;
    const int g = spec.role == CategoryRole::general ? 0 : 1;
    for (const auto& sample : it->second) {
      const ImageEmbedding image = model.embed_image(sample.volume);
      for (std::size_t pk = 0; pk < prompts.size(); ++pk) {
        const PromptEmbedding prompt = model.embed_prompt(make_prompt(sample, prompts[pk]));
        const DecodedMask general = DecodedMask::from_logits(decode(model.bank.general(), image, prompt));
        std::optional<GateScores> scores;
        DecodedMask top;
        if (!model.bank.empty()) {
          scores = gate_forward(*model.gate, image, prompt);
          top = DecodedMask::from_logits(decode(model.bank.expert_by_index(scores->top_index).decoder, image, prompt));
        }
        std::size_t cell = 0;
        for (double tau : grid.taus) {
          for (Fusion fusion : grid.fusions) {
            const SelectorConfig cfg{tau, fusion};
            const bool fired = scores && switch_fires(scores->s_top, tau);
            const Tensor probs = scores ? select_mask(general, top, scores->s_top, cfg) : general.probabilities;
            const double d = dice_score(binarize(probs), sample.mask.data);
            acc[cell][g][pk].add(d, fired);
            acc[cell][g][prompts.size()].add(d, fired);
            ++cell;
          }
        }
      }
    }
  }
  AblationReport report;
  std::size_t cell = 0;
  for (double tau : grid.taus) {
    for (Fusion fusion : grid.fusions) {
      for (int g = 0; g < 2; ++g) {
        for (std::size_t pk = 0; pk <= prompts.size(); ++pk) {
          const Accumulator& a = acc[cell][g][pk];
          if (a.n == 0) continue;
          report.cells.push_back({tau, fusion, g == 0 ? "general" : "expert",
                                  pk == prompts.size() ? "all" : to_string(prompts[pk]), a.mean(), a.n,
                                  static_cast<double>(a.fired) / static_cast<double>(a.n)});
        }
      }
      ++cell;
    }
  }
  return report;
}

std::string matrix_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "variant,category,prompt_kind,mean_dice,n\n";
  for (const auto& r : report.rows) {
    out << r.variant << ',' << r.category << ',' << r.prompt_kind << ',' << format_real(r.mean_dice) << ',' << r.n
        << '\n';
  }
  return out.str();
}

std::string routing_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "sample_id,category,top_label,s_top,fired,dice,prompt_kind\n";
  for (const auto& r : report.routing) {
    out << r.sample_id << ',' << r.category << ',' << r.top_label << ',' << format_real(r.s_top) << ','
        << (r.fired ? "true" : "false") << ',' << format_real(r.dice) << ',' << r.prompt_kind << '\n';
  }
  return out.str();
}

std::string confusion_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "category,top_label,count\n";
  for (const auto& [category, row] : report.confusion) {
    for (const auto& [label, count] : row) out << category << ',' << label << ',' << count << '\n';
  }
  return out.str();
}

std::string ablation_csv(const AblationReport& report) {
  std::ostringstream out;
  out << "tau,fusion,category_group,mean_dice\n";
  for (const auto& c : report.cells) {
    if (c.category_group != "expert" || c.prompt_kind != "all") continue;
    out << format_real(c.tau) << ',' << to_string(c.fusion) << ',' << c.category_group << ','
        << format_real(c.mean_dice) << '\n';
  }
  return out.str();
}

std::string ablation_detail_csv(const AblationReport& report) {
  std::ostringstream out;
  out << "tau,fusion,category_group,prompt_kind,mean_dice,n,fired_rate\n";
  for (const auto& c : report.cells) {
    out << format_real(c.tau) << ',' << to_string(c.fusion) << ',' << c.category_group << ',' << c.prompt_kind << ','
        << format_real(c.mean_dice) << ',' << c.n << ',' << format_real(c.fired_rate) << '\n';
  }
  return out.str();
}

}  // namespace moe3d
