// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// moe3d: corpus generation, training, inference, evaluation and ablation.
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "moe3d/checkpoint.hpp"
#include "moe3d/errors.hpp"
#include "moe3d/eval.hpp"
#include "moe3d/pipeline.hpp"
#include "moe3d/training.hpp"

#ifndef MOE3D_VERSION
#define MOE3D_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace moe3d;

namespace {

// Raised for bad flags, missing config files and invalid configuration.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 0;
  std::string config_path;
};

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  std::uint64_t seed = 0;
  json inputs = json::object();
  json outputs = json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const fs::path& path) const {
    json j = {{"command", command},
              {"argv", argv},
              {"config", config},
              {"seed", seed},
              {"inputs", inputs},
              {"outputs", outputs},
              {"version", MOE3D_VERSION},
              {"duration_seconds",
               std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
    write_file_atomic(path, j.dump(2) + "\n");
  }
};

fs::path manifest_beside(const fs::path& file) { return fs::path(file.string() + ".manifest.json"); }

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  if (!fs::exists(path)) throw UsageError("config file not found: " + path);
  try {
    json j = json::parse(read_file(path));
    if (!j.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + " is not valid JSON: " + e.what());
  }
}

// Flag values override file values; file values override defaults.
template <typename T>
void resolve(CLI::App* cmd, const json& file, const std::string& key, T& value) {
  const std::string flag = "--" + [&] {
    std::string f = key;
    for (auto& c : f) c = c == '_' ? '-' : c;
    return f;
  }();
  CLI::Option* opt = cmd->get_option_no_throw(flag);
  if (opt && opt->count() > 0) return;
  if (!file.contains(key)) return;
  try {
    value = file.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError("config key '" + key + "': " + e.what());
  }
}

void check_config_keys(const json& file, const std::vector<std::string>& allowed) {
  for (auto it = file.begin(); it != file.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw UsageError("unknown config key '" + it.key() + "'");
    }
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

json checksums_json(const Model& model) {
  json j = json::object();
  for (const auto& [group, crc] : group_checksums(model)) j[group] = hex32(crc);
  return j;
}

Corpora load_corpus(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / "manifest.json")) throw Error("no corpus manifest in " + dir);
  return read_corpora(dir);
}

struct TrainFlags {
  int steps = -1;
  double lr = -1.0;
  int batch_size = 4;
  double general_weight = 1.0;
  double pair_fraction = 0.25;
  std::string mode = "gate_only";
  std::string loss_csv;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moe3d: promptable 3D segmentation with finetuned expert decoders and a gated mask selector"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MOE3D_VERSION);
  Common common;
  app.add_option("--seed", common.seed, "Master seed")->capture_default_str();
  app.add_option("--config", common.config_path, "JSON config file; flags override its values");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpora");
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", common.seed, "Master seed");
  gen->add_option("--config", common.config_path, "Corpus config JSON");

  // pretrain
  auto* pre = app.add_subcommand(
      "pretrain",
      "Train encoders and the general decoder on the general categories (the foundation model a real deployment "
      "would inherit; included so the pipeline is self-contained)");
  std::string pre_data, pre_out, pre_init, pre_encoder = EncoderConfig{}.to_string();
  TrainFlags pre_flags;
  pre_flags.steps = 1500;
  pre_flags.lr = 1e-3;
  pre->add_option("--data", pre_data, "Corpus directory")->required();
  pre->add_option("--out", pre_out, "Output checkpoint")->required();
  pre->add_option("--steps", pre_flags.steps, "Optimizer steps")->capture_default_str();
  pre->add_option("--lr", pre_flags.lr, "Learning rate")->capture_default_str();
  pre->add_option("--batch-size", pre_flags.batch_size)->capture_default_str();
  pre->add_option("--encoder", pre_encoder, "Encoder config, e.g. \"channels=48 depth=2\"")->capture_default_str();
  pre->add_option("--init", pre_init, "Continue from this checkpoint instead of a fresh model");
  pre->add_option("--loss-csv", pre_flags.loss_csv, "Loss curve CSV");
  pre->add_option("--seed", common.seed, "Master seed");
  pre->add_option("--config", common.config_path, "JSON config file");

  // finetune-expert
  auto* ft = app.add_subcommand("finetune-expert", "Clone the general decoder into an expert and finetune it");
  std::string ft_ckpt, ft_out, ft_data, ft_category;
  TrainFlags ft_flags;
  ft_flags.steps = 2500;
  ft_flags.lr = 1e-4;
  ft->add_option("--ckpt", ft_ckpt, "Input checkpoint")->required();
  ft->add_option("--data", ft_data, "Corpus directory")->required();
  ft->add_option("--category", ft_category, "Expert category")->required();
  ft->add_option("--out", ft_out, "Output checkpoint")->required();
  ft->add_option("--steps", ft_flags.steps)->capture_default_str();
  ft->add_option("--lr", ft_flags.lr)->capture_default_str();
  ft->add_option("--batch-size", ft_flags.batch_size)->capture_default_str();
  ft->add_option("--loss-csv", ft_flags.loss_csv, "Loss curve CSV");
  ft->add_option("--seed", common.seed, "Master seed");
  ft->add_option("--config", common.config_path, "JSON config file");

  // train-gate
  auto* tg = app.add_subcommand("train-gate", "Train the gating network over the expert bank");
  std::string tg_ckpt, tg_out, tg_data;
  TrainFlags tg_flags;
  tg_flags.steps = 3000;
  tg_flags.batch_size = 8;
  tg_flags.lr = 1e-3;
  double tg_lr_expert = 1e-4;
  tg->add_option("--ckpt", tg_ckpt, "Input checkpoint")->required();
  tg->add_option("--data", tg_data, "Corpus directory")->required();
  tg->add_option("--out", tg_out, "Output checkpoint")->required();
  tg->add_option("--mode", tg_flags.mode, "gate_only or gate_plus_top1")->capture_default_str();
  tg->add_option("--steps", tg_flags.steps)->capture_default_str();
  tg->add_option("--lr", tg_flags.lr, "Gate learning rate")->capture_default_str();
  tg->add_option("--lr-expert", tg_lr_expert, "Expert learning rate (gate_plus_top1)")->capture_default_str();
  tg->add_option("--batch-size", tg_flags.batch_size)->capture_default_str();
  tg->add_option("--general-weight", tg_flags.general_weight,
                 "Weight of general-category samples pulled toward uniform scores (0 disables)")
      ->capture_default_str();
  tg->add_option("--pair-fraction", tg_flags.pair_fraction, "Share of two-object prompt-disambiguation samples")
      ->capture_default_str();
  tg->add_option("--loss-csv", tg_flags.loss_csv, "Loss curve CSV");
  tg->add_option("--seed", common.seed, "Master seed");
  tg->add_option("--config", common.config_path, "JSON config file");

  // infer
  auto* inf = app.add_subcommand("infer", "Segment one sample with the full mixture-of-experts pipeline");
  std::string inf_ckpt, inf_sample, inf_prompt = "points6", inf_out, inf_fusion = "weighted";
  double inf_tau = 0.5;
  inf->add_option("--ckpt", inf_ckpt)->required();
  inf->add_option("--sample", inf_sample, "Sample JSON sidecar")->required();
  inf->add_option("--prompt", inf_prompt, "points6 or bbox")->capture_default_str();
  inf->add_option("--tau", inf_tau)->capture_default_str();
  inf->add_option("--fusion", inf_fusion, "weighted, avg or aft_weight")->capture_default_str();
  inf->add_option("--out", inf_out, "Output prefix: writes <out>.mask and <out>.json")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate baseline, ft_expert and moe variants on the held-out sets");
  std::string ev_ckpt, ev_data, ev_out, ev_fusion = "weighted", ev_verify, ev_freeze_mode = "gate_only", ev_category;
  double ev_tau = 0.5;
  ev->add_option("--ckpt", ev_ckpt)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--out", ev_out, "Output directory")->required();
  ev->add_option("--tau", ev_tau)->capture_default_str();
  ev->add_option("--fusion", ev_fusion)->capture_default_str();
  ev->add_option("--verify-freeze", ev_verify,
                 "Reference checkpoint: fail unless every group frozen by --freeze-mode is unchanged");
  ev->add_option("--freeze-mode", ev_freeze_mode, "expert_finetune, gate_only or gate_plus_top1")
      ->capture_default_str();
  ev->add_option("--category", ev_category, "Finetuned expert for --freeze-mode expert_finetune");

  // ablate
  auto* ab = app.add_subcommand("ablate", "Selector ablation over tau x fusion");
  std::string ab_ckpt, ab_data, ab_out;
  std::vector<double> ab_taus{0.3, 0.5, 0.7, 1.0};
  ab->add_option("--ckpt", ab_ckpt)->required();
  ab->add_option("--data", ab_data)->required();
  ab->add_option("--out", ab_out, "Output directory")->required();
  ab->add_option("--tau", ab_taus, "Threshold grid")->capture_default_str();

  // pipeline
  auto* pl = app.add_subcommand("pipeline", "Run every stage end to end into one directory");
  std::string pl_out;
  pl->add_option("--out", pl_out, "Output directory")->required();
  pl->add_option("--seed", common.seed, "Master seed");
  pl->add_option("--config", common.config_path, "Pipeline config JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  RunManifest manifest;
  manifest.seed = common.seed;
  for (int i = 0; i < argc; ++i) manifest.argv.emplace_back(argv[i]);

  try {
    const json file = load_config(common.config_path);

    if (*gen) {
      manifest.command = "gen-data";
      CorpusConfig cfg = CorpusConfig::defaults();
      if (!common.config_path.empty()) cfg = CorpusConfig::from_json(file.dump());
      cfg.validate();
      const Corpora corpora = build_corpora(cfg, common.seed);
      write_corpora(corpora, gen_out);
      manifest.config = json::parse(cfg.to_json());
      manifest.outputs = {{"dir", gen_out}, {"corpus_checksum", hex32(corpora.checksum())},
                          {"samples", corpora.sample_checksums().size()}};
      manifest.write(fs::path(gen_out) / "run_manifest.json");
      std::cout << "wrote " << corpora.sample_checksums().size() << " samples to " << gen_out << " (checksum "
                << hex32(corpora.checksum()) << ")\n";
      return 0;
    }

    if (*pre) {
      manifest.command = "pretrain";
      check_config_keys(file, {"steps", "lr", "batch_size", "encoder", "seed"});
      resolve(pre, file, "steps", pre_flags.steps);
      resolve(pre, file, "lr", pre_flags.lr);
      resolve(pre, file, "batch_size", pre_flags.batch_size);
      resolve(pre, file, "encoder", pre_encoder);
      resolve(pre, file, "seed", common.seed);
      TrainConfig tc;
      tc.steps = pre_flags.steps;
      tc.lr_pretrain = pre_flags.lr;
      tc.batch_size = pre_flags.batch_size;
      tc.seed = derive_seed(common.seed, "pretrain");
      tc.validate();
      const EncoderConfig enc = EncoderConfig::parse(pre_encoder);
      const Corpora corpora = load_corpus(pre_data);
      if (enc.volume_side != corpora.config.volume_side) {
        throw UsageError("encoder volume_side " + std::to_string(enc.volume_side) + " does not match corpus side " +
                         std::to_string(corpora.config.volume_side));
      }
      Model model = pre_init.empty() ? Model::init(enc, derive_seed(common.seed, "model")) : load_model(pre_init);
      const LossCurve curve = pretrain(model, corpora, tc);
      const double dice = general_heldout_dice(model, corpora);
      save_model(model, pre_out, {{"stage", "pretrain"}});
      if (!pre_flags.loss_csv.empty()) write_text(pre_flags.loss_csv, curve.to_csv());
      manifest.config = {{"train", tc.to_string()}, {"encoder", enc.to_string()}};
      manifest.inputs = {{"data", pre_data}, {"init", pre_init}};
      manifest.outputs = {{"ckpt", pre_out}, {"general_heldout_dice", dice}, {"checksums", checksums_json(model)}};
      manifest.write(manifest_beside(pre_out));
      std::cout << "general held-out dice " << format_real(dice) << "\n";
      return 0;
    }

    if (*ft) {
      manifest.command = "finetune-expert";
      check_config_keys(file, {"steps", "lr", "batch_size", "seed"});
      resolve(ft, file, "steps", ft_flags.steps);
      resolve(ft, file, "lr", ft_flags.lr);
      resolve(ft, file, "batch_size", ft_flags.batch_size);
      resolve(ft, file, "seed", common.seed);
      TrainConfig tc;
      tc.mode = TrainMode::expert_finetune;
      tc.steps = ft_flags.steps;
      tc.lr_expert = ft_flags.lr;
      tc.batch_size = ft_flags.batch_size;
      tc.seed = derive_seed(common.seed, "finetune." + ft_category);
      tc.validate();
      const Corpora corpora = load_corpus(ft_data);
      const auto it = corpora.train.find(ft_category);
      if (it == corpora.train.end()) throw UsageError("corpus has no category '" + ft_category + "'");
      if (corpora.config.category(ft_category).role != CategoryRole::expert) {
        throw UsageError("'" + ft_category + "' is a general category, not an expert category");
      }
      Model model = load_model(ft_ckpt);
      if (!model.bank.index_of(ft_category)) {
        model.bank.clone_expert(ft_category);
        // The gate no longer matches the bank; it must be retrained.
        model.gate.reset();
      }
      const auto before = group_checksums(model);
      std::vector<const Sample*> samples;
      for (const auto& s : it->second) samples.push_back(&s);
      const LossCurve curve = finetune_expert(model, ft_category, samples, tc);
      const auto violations = freeze_violations(
          before, group_checksums(model), FreezePolicy::for_mode(TrainMode::expert_finetune, model, ft_category));
      if (!violations.empty()) throw ContractError("freeze contract violated for " + violations.front());
      save_model(model, ft_out, {{"stage", "finetune-expert"}});
      if (!ft_flags.loss_csv.empty()) write_text(ft_flags.loss_csv, curve.to_csv());
      manifest.config = {{"train", tc.to_string()}, {"category", ft_category}};
      manifest.inputs = {{"ckpt", ft_ckpt}, {"data", ft_data}};
      manifest.outputs = {{"ckpt", ft_out}, {"checksums", checksums_json(model)}};
      manifest.write(manifest_beside(ft_out));
      std::cout << "finetuned expert '" << ft_category << "' for " << tc.steps << " steps\n";
      return 0;
    }

    if (*tg) {
      manifest.command = "train-gate";
      check_config_keys(file,
                        {"steps", "lr", "lr_expert", "batch_size", "mode", "general_weight", "pair_fraction", "seed"});
      resolve(tg, file, "steps", tg_flags.steps);
      resolve(tg, file, "lr", tg_flags.lr);
      resolve(tg, file, "lr_expert", tg_lr_expert);
      resolve(tg, file, "batch_size", tg_flags.batch_size);
      resolve(tg, file, "mode", tg_flags.mode);
      resolve(tg, file, "general_weight", tg_flags.general_weight);
      resolve(tg, file, "pair_fraction", tg_flags.pair_fraction);
      resolve(tg, file, "seed", common.seed);
      TrainConfig tc;
      tc.mode = parse_train_mode(tg_flags.mode);
      if (tc.mode == TrainMode::expert_finetune) throw UsageError("--mode must be gate_only or gate_plus_top1");
      tc.steps = tg_flags.steps;
      tc.lr_gate = tg_flags.lr;
      tc.lr_expert = tg_lr_expert;
      tc.batch_size = tg_flags.batch_size;
      tc.general_weight = tg_flags.general_weight;
      tc.pair_fraction = tg_flags.pair_fraction;
      tc.seed = derive_seed(common.seed, "gate");
      tc.validate();
      const Corpora corpora = load_corpus(tg_data);
      Model model = load_model(tg_ckpt);
      const auto before = group_checksums(model);
      const LossCurve curve = train_gating(model, GateTrainingData::from_corpora(corpora, model), tc);
      const auto violations =
          freeze_violations(before, group_checksums(model), FreezePolicy::for_mode(tc.mode, model));
      if (!violations.empty()) throw ContractError("freeze contract violated for " + violations.front());
      save_model(model, tg_out, {{"stage", "train-gate"}});
      if (!tg_flags.loss_csv.empty()) write_text(tg_flags.loss_csv, curve.to_csv());
      manifest.config = {{"train", tc.to_string()}};
      manifest.inputs = {{"ckpt", tg_ckpt}, {"data", tg_data}};
      manifest.outputs = {{"ckpt", tg_out}, {"checksums", checksums_json(model)}};
      manifest.write(manifest_beside(tg_out));
      std::cout << "trained gate (" << to_string(tc.mode) << ") for " << tc.steps << " steps\n";
      return 0;
    }

    if (*inf) {
      manifest.command = "infer";
      SelectorConfig sel{inf_tau, parse_fusion(inf_fusion)};
      sel.validate();
      const PromptKind kind = parse_prompt_kind(inf_prompt);
      const Model model = load_model(inf_ckpt);
      const Sample sample = read_sample(inf_sample);
      const MoeOutput out = model.infer(sample.volume, make_prompt(sample, kind), sel);
      const auto mask = binarize(out.probabilities);
      write_text(inf_out + ".mask", std::string(mask.begin(), mask.end()));
      json report = {{"sample_id", sample.sample_id},
                     {"category", sample.category},
                     {"prompt_kind", inf_prompt},
                     {"tau", sel.tau},
                     {"fusion", to_string(sel.fusion)},
                     {"top_label", out.report.gated ? out.report.top_label : "none"},
                     {"s_top", out.report.s_top},
                     {"scores", out.report.scores},
                     {"fired", out.report.fired},
                     {"dice", dice_score(mask, sample.mask.data)}};
      write_text(inf_out + ".json", report.dump(2) + "\n");
      manifest.config = {{"tau", sel.tau}, {"fusion", to_string(sel.fusion)}, {"prompt", inf_prompt}};
      manifest.inputs = {{"ckpt", inf_ckpt}, {"sample", inf_sample}};
      manifest.outputs = {{"mask", inf_out + ".mask"}, {"report", inf_out + ".json"}};
      manifest.write(inf_out + ".manifest.json");
      std::cout << report.dump() << "\n";
      return 0;
    }

    if (*ev) {
      manifest.command = "eval";
      EvalOptions options;
      options.selector = {ev_tau, parse_fusion(ev_fusion)};
      options.selector.validate();
      const Model model = load_model(ev_ckpt);
      manifest.inputs = {{"ckpt", ev_ckpt}, {"data", ev_data}};
      if (!ev_verify.empty()) {
        const TrainMode mode = parse_train_mode(ev_freeze_mode);
        const Model reference = load_model(ev_verify);
        FreezePolicy policy = FreezePolicy::for_mode(mode, model, ev_category);
        // Groups absent from the reference (a freshly created gate or expert) are not frozen.
        const auto ref = group_checksums(reference);
        for (auto it = policy.frozen_groups.begin(); it != policy.frozen_groups.end();) {
          it = ref.count(*it) ? std::next(it) : policy.frozen_groups.erase(it);
        }
        const auto violations = freeze_violations(ref, group_checksums(model), policy);
        manifest.inputs["verify_freeze"] = ev_verify;
        manifest.outputs["freeze_violations"] = violations;
        for (const auto& group : policy.frozen_groups) {
          const bool ok = std::find(violations.begin(), violations.end(), group) == violations.end();
          std::cout << (ok ? "frozen ok   " : "CHANGED     ") << group << "\n";
        }
        if (!violations.empty()) {
          fs::create_directories(ev_out);
          manifest.write(fs::path(ev_out) / "run_manifest.json");
          std::cerr << "error: freeze contract violated for " << violations.size() << " group(s)\n";
          return 1;
        }
      }
      const Corpora corpora = load_corpus(ev_data);
      const EvalReport report = run_matrix(model, corpora, options);
      fs::create_directories(ev_out);
      write_text(fs::path(ev_out) / "matrix.csv", matrix_csv(report));
      write_text(fs::path(ev_out) / "routing.csv", routing_csv(report));
      write_text(fs::path(ev_out) / "confusion.csv", confusion_csv(report));
      const auto experts = corpora.config.names(CategoryRole::expert);
      manifest.config = {{"tau", options.selector.tau}, {"fusion", to_string(options.selector.fusion)}};
      manifest.outputs["dir"] = ev_out;
      manifest.outputs["routing_accuracy"] = report.routing_accuracy(experts);
      manifest.write(fs::path(ev_out) / "run_manifest.json");
      std::cout << matrix_csv(report);
      return 0;
    }

    if (*ab) {
      manifest.command = "ablate";
      AblationGrid grid;
      grid.taus = ab_taus;
      const Model model = load_model(ab_ckpt);
      const Corpora corpora = load_corpus(ab_data);
      const AblationReport report = run_ablation(model, corpora, grid);
      fs::create_directories(ab_out);
      write_text(fs::path(ab_out) / "ablation.csv", ablation_csv(report));
      write_text(fs::path(ab_out) / "ablation_detail.csv", ablation_detail_csv(report));
      manifest.config = {{"taus", ab_taus}};
      manifest.inputs = {{"ckpt", ab_ckpt}, {"data", ab_data}};
      manifest.outputs = {{"dir", ab_out}};
      manifest.write(fs::path(ab_out) / "run_manifest.json");
      std::cout << ablation_csv(report);
      return 0;
    }

    if (*pl) {
      manifest.command = "pipeline";
      PipelineConfig cfg = PipelineConfig::defaults();
      if (!common.config_path.empty()) cfg = PipelineConfig::from_json(file.dump());
      if (pl->get_option("--seed")->count() > 0 || app.get_option("--seed")->count() > 0) cfg.seed = common.seed;
      const fs::path out(pl_out);
      fs::create_directories(out);
      const PipelineResult r = run_pipeline(cfg, [](const std::string& m) { std::cout << m << std::endl; });
      write_corpora(r.corpora, out / "data");
      save_model(r.foundation, out / "foundation.ckpt", {{"stage", "pretrain"}});
      save_model(r.model, out / "model.ckpt", {{"stage", "pipeline"}});
      for (const auto& stage : r.stages) {
        std::string name = stage.name;
        for (auto& c : name) c = c == ':' ? '_' : c;
        write_text(out / "curves" / (name + ".csv"), stage.curve.to_csv());
        if (!stage.freeze_violations.empty()) throw ContractError("freeze contract violated in " + stage.name);
      }
      EvalOptions options;
      options.selector = cfg.selector;
      const EvalReport report = run_matrix(r.model, r.corpora, options);
      write_text(out / "matrix.csv", matrix_csv(report));
      write_text(out / "routing.csv", routing_csv(report));
      write_text(out / "confusion.csv", confusion_csv(report));
      const AblationReport ablation = run_ablation(r.model, r.corpora);
      write_text(out / "ablation.csv", ablation_csv(ablation));
      write_text(out / "ablation_detail.csv", ablation_detail_csv(ablation));
      manifest.seed = cfg.seed;
      manifest.config = json::parse(cfg.to_json());
      manifest.outputs = {{"dir", pl_out},
                          {"pretrain_general_dice", r.pretrain_dice},
                          {"corpus_checksum", hex32(r.corpora.checksum())},
                          {"checksums", checksums_json(r.model)}};
      manifest.write(out / "run_manifest.json");
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
