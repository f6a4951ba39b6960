// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dice scoring, the variant x category x prompt matrix, routing statistics
// and the selector ablation grid, with their CSV encodings.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moe3d/model.hpp"
#include "moe3d/synthdata.hpp"

namespace moe3d {

/// 2|A∩B| / (|A| + |B|), and 1 when both are empty.
double dice_score(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

std::string baseline_variant();
std::string moe_variant();
std::string ft_expert_variant(const std::string& label);
std::string group_category(CategoryRole role);  // aggregate row name, e.g. "group:general"

struct MatrixRow {
  std::string variant;
  std::string category;
  std::string prompt_kind;
  double mean_dice = 0.0;
  std::size_t n = 0;
};

struct RoutingRow {
  std::string sample_id;
  std::string category;
  std::string top_label;  // "none" when the gate is bypassed
  double s_top = 0.0;
  bool fired = false;
  double dice = 0.0;
  std::string prompt_kind;
};

struct EvalReport {
  std::vector<MatrixRow> rows;
  std::vector<RoutingRow> routing;
  /// category -> top label -> count, over every routed case.
  std::map<std::string, std::map<std::string, std::size_t>> confusion;

  std::optional<double> mean_dice(const std::string& variant, const std::string& category,
                                  const std::string& prompt_kind) const;
  /// Fraction of routed expert-category cases whose top label is their category.
  double routing_accuracy(const std::vector<std::string>& expert_categories,
                          const std::string& prompt_kind = {}) const;
  /// Mean s_top over correctly routed expert-category cases.
  double mean_correct_s_top(const std::vector<std::string>& expert_categories,
                            const std::string& prompt_kind = {}) const;
  double fired_rate(const std::vector<std::string>& categories) const;
};

struct EvalOptions {
  std::vector<PromptKind> prompts{PromptKind::points6, PromptKind::bbox};
  SelectorConfig selector;
  bool include_ft_experts = true;
};

/// Evaluates baseline, every ft_expert and (when experts exist) the moe
/// variant on every held-out sample and prompt kind. Rows are ordered by
/// variant, category (config order, then group aggregates) and prompt kind.
EvalReport run_matrix(const Model& model, const Corpora& corpora, const EvalOptions& options = {});

/// Mean held-out Dice of the general decoder over general categories and both prompt kinds.
double general_heldout_dice(const Model& model, const Corpora& corpora);

struct AblationCell {
  double tau = 0.0;
  Fusion fusion = Fusion::weighted;
  std::string category_group;  // "general" or "expert"
  std::string prompt_kind;     // "all" pools both kinds
  double mean_dice = 0.0;
  std::size_t n = 0;
  double fired_rate = 0.0;
};

struct AblationGrid {
  std::vector<double> taus{0.3, 0.5, 0.7, 1.0};
  std::vector<Fusion> fusions{Fusion::weighted, Fusion::avg, Fusion::aft_weight};
};

struct AblationReport {
  std::vector<AblationCell> cells;

  const AblationCell* find(double tau, Fusion fusion, const std::string& group, const std::string& prompt_kind) const;
};

/// Every grid cell, for both category groups, per prompt kind and pooled.
AblationReport run_ablation(const Model& model, const Corpora& corpora, const AblationGrid& grid = {},
                            const std::vector<PromptKind>& prompts = {PromptKind::points6, PromptKind::bbox});

/// variant,category,prompt_kind,mean_dice,n
std::string matrix_csv(const EvalReport& report);
/// sample_id,category,top_label,s_top,fired,dice,prompt_kind
std::string routing_csv(const EvalReport& report);
/// category,top_label,count
std::string confusion_csv(const EvalReport& report);
/// tau,fusion,category_group,mean_dice: expert group, prompts pooled (one row per grid cell).
std::string ablation_csv(const AblationReport& report);
/// tau,fusion,category_group,prompt_kind,mean_dice,n,fired_rate: every cell.
std::string ablation_detail_csv(const AblationReport& report);

/// Shortest round-trip decimal for CSV output.
std::string format_real(double v);

}  // namespace moe3d
