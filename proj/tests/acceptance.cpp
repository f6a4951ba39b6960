// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner: one PASS/FAIL line per criterion, detail lines indented beneath.
// Criteria 4, 5, 6 and 7 share the two full pipeline runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "moe3d/checkpoint.hpp"
#include "moe3d/eval.hpp"
#include "moe3d/pipeline.hpp"
#include "moe3d/selector.hpp"
#include "moe3d/training.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace moe3d;
using moe3d::testing::gradients_match;
using moe3d::testing::random_binary;
using moe3d::testing::random_tensor;
using moe3d::testing::weighted_sum;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    details.push_back(std::string(ok ? "ok    " : "FAIL  ") + what);
    pass = pass && ok;
  }
  void note(const std::string& what) { details.push_back("      " + what); }
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o, double secs) {
  std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << " (" << fmt(secs, 1) << " s)\n";
  for (const auto& d : o.details) std::cout << "      " << d << "\n";
  std::cout.flush();
  failures += o.pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// 1. gradient suite

using Inputs = std::vector<Tensor>;

struct GradCase {
  std::string name;
  std::function<Tensor(const Inputs&)> op;  // reduced to a scalar with random weights
  std::function<Inputs()> inputs;
};

Outcome gradient_suite() {
  constexpr int kFixtures = 20;
  Rng rng(4242);
  auto t = [&](const Shape& shape, double lo = -1.0, double hi = 1.0) { return random_tensor(shape, rng, lo, hi); };
  std::vector<std::uint32_t> index(10);
  for (auto& i : index) i = static_cast<std::uint32_t>(rng() % 6);
  const auto target = random_binary(12, rng);
  const std::vector<double> soft{0.1, 0.2, 0.3, 0.4};

  const std::vector<GradCase> cases = {
      {"matmul", [](const Inputs& in) { return matmul(in[0], in[1]); }, [&] { return Inputs{t({3, 4}), t({4, 2})}; }},
      {"transpose", [](const Inputs& in) { return transpose(in[0]); }, [&] { return Inputs{t({3, 5})}; }},
      {"add", [](const Inputs& in) { return mul(add(in[0], in[1]), in[1]); }, [&] { return Inputs{t({2, 3}), t({2, 3})}; }},
      {"sub", [](const Inputs& in) { return mul(sub(in[0], in[1]), in[0]); }, [&] { return Inputs{t({2, 3}), t({2, 3})}; }},
      {"mul", [](const Inputs& in) { return mul(in[0], in[1]); }, [&] { return Inputs{t({2, 3}), t({2, 3})}; }},
      {"scale", [](const Inputs& in) { return scale(in[0], -1.7); }, [&] { return Inputs{t({5})}; }},
      {"add_scalar", [](const Inputs& in) { return mul(add_scalar(in[0], 0.3), in[0]); }, [&] { return Inputs{t({5})}; }},
      {"add_rowvec", [](const Inputs& in) { return add_rowvec(in[0], in[1]); }, [&] { return Inputs{t({3, 4}), t({4})}; }},
      {"softmax rows", [](const Inputs& in) { return softmax(in[0], 1); }, [&] { return Inputs{t({3, 4}, -3, 3)}; }},
      {"softmax cols", [](const Inputs& in) { return softmax(in[0], 0); }, [&] { return Inputs{t({3, 4}, -3, 3)}; }},
      {"layernorm", [](const Inputs& in) { return layernorm(in[0], in[1], in[2]); },
       [&] { return Inputs{t({4, 8}, -2, 2), t({8}, 0.5, 1.5), t({8})}; }},
      {"gelu", [](const Inputs& in) { return gelu(in[0]); }, [&] { return Inputs{t({2, 5}, -3, 3)}; }},
      {"sigmoid", [](const Inputs& in) { return sigmoid(in[0]); }, [&] { return Inputs{t({2, 5}, -6, 6)}; }},
      {"sum", [](const Inputs& in) { return sum(mul(in[0], in[0])); }, [&] { return Inputs{t({3, 4})}; }},
      {"mean", [](const Inputs& in) { return mean(mul(in[0], in[0])); }, [&] { return Inputs{t({3, 4})}; }},
      {"mean_rows", [](const Inputs& in) { return mean_rows(mul(in[0], in[0])); }, [&] { return Inputs{t({3, 4})}; }},
      {"reshape", [](const Inputs& in) { return mul(reshape(in[0], {2, 6}), reshape(in[0], {2, 6})); },
       [&] { return Inputs{t({3, 4})}; }},
      {"gather", [&](const Inputs& in) { return gather(in[0], index, {2, 5}); }, [&] { return Inputs{t({6})}; }},
      {"dice_loss", [&](const Inputs& in) { return dice_loss(in[0], target); }, [&] { return Inputs{t({12}, 0.05, 0.95)}; }},
      {"bce_loss", [&](const Inputs& in) { return bce_loss(in[0], target); }, [&] { return Inputs{t({12}, -4, 4)}; }},
      {"dicece_loss", [&](const Inputs& in) { return dicece_loss(in[0], target); }, [&] { return Inputs{t({12}, -4, 4)}; }},
      {"gate_ce_loss", [](const Inputs& in) { return gate_ce_loss(in[0], 2); }, [&] { return Inputs{t({1, 4}, -3, 3)}; }},
      {"gate_soft_ce_loss", [&](const Inputs& in) { return gate_soft_ce_loss(in[0], soft); },
       [&] { return Inputs{t({1, 4}, -3, 3)}; }},
  };
  Outcome o;
  for (const auto& c : cases) {
    int ok = 0;
    std::string first_failure;
    for (int f = 0; f < kFixtures; ++f) {
      const std::uint64_t seed = 9000 + static_cast<std::uint64_t>(f);
      const auto r = gradients_match([&](const Inputs& in) { return weighted_sum(c.op(in), seed); }, c.inputs());
      if (r) {
        ++ok;
      } else if (first_failure.empty()) {
        first_failure = r.message();
      }
    }
    o.check(ok == kFixtures, c.name + ": " + std::to_string(ok) + "/" + std::to_string(kFixtures) + " fixtures" +
                                 (first_failure.empty() ? "" : " (" + first_failure + ")"));
  }
  return o;
}

// ---------------------------------------------------------------------------
// shared pipeline artifacts

struct RunArtifacts {
  PipelineResult result;
  EvalReport matrix;
  AblationReport ablation;
  std::map<std::string, std::string> files;  // name -> bytes
  double pipeline_seconds = 0.0;
  double eval_seconds = 0.0;
  double ablation_seconds = 0.0;
};

RunArtifacts full_run(const PipelineConfig& cfg, const fs::path& dir) {
  RunArtifacts a;
  auto t0 = Clock::now();
  a.result = run_pipeline(cfg, [](const std::string& m) { std::cout << "      . " << m << std::endl; });
  a.pipeline_seconds = seconds_since(t0);
  t0 = Clock::now();
  EvalOptions options;
  options.selector = cfg.selector;
  a.matrix = run_matrix(a.result.model, a.result.corpora, options);
  a.eval_seconds = seconds_since(t0);
  t0 = Clock::now();
  a.ablation = run_ablation(a.result.model, a.result.corpora);
  a.ablation_seconds = seconds_since(t0);

  a.files["foundation.ckpt"] = encode_checkpoint(model_checkpoint(a.result.foundation));
  a.files["model.ckpt"] = encode_checkpoint(model_checkpoint(a.result.model));
  a.files["matrix.csv"] = matrix_csv(a.matrix);
  a.files["routing.csv"] = routing_csv(a.matrix);
  a.files["confusion.csv"] = confusion_csv(a.matrix);
  a.files["ablation.csv"] = ablation_csv(a.ablation);
  a.files["ablation_detail.csv"] = ablation_detail_csv(a.ablation);
  for (const auto& s : a.result.stages) {
    std::string name = s.name;
    std::replace(name.begin(), name.end(), ':', '_');
    a.files["curve_" + name + ".csv"] = s.curve.to_csv();
  }
  fs::create_directories(dir);
  for (const auto& [name, bytes] : a.files) write_file_atomic(dir / name, bytes);
  return a;
}

const std::vector<std::string> kPromptKinds{"points6", "bbox"};

// ---------------------------------------------------------------------------
// 2. selector exactness

Outcome selector_exactness(const RunArtifacts& run, double& formula_seconds) {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(77);
  int exact = 0, switch_identical = 0, switched = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = 64;
    const DecodedMask g = DecodedMask::from_logits({random_tensor({n}, rng, -6, 6, false)});
    const DecodedMask t = DecodedMask::from_logits({random_tensor({n}, rng, -6, 6, false)});
    const double s = uniform(rng, 0.0, 1.0), tau = uniform(rng, 0.0, 1.0);
    const Tensor out = select_mask(g, t, s, {tau, Fusion::weighted});
    bool ok = true;
    if (s > tau) {
      for (std::size_t v = 0; v < n; ++v) {
        const double a = g.probabilities.at(v), b = t.probabilities.at(v);
        ok = ok && out.at(v) == std::clamp((1.0 - s) * a + s * b, std::min(a, b), std::max(a, b));
      }
    } else {
      ++switched;
      bool same = true;
      for (std::size_t v = 0; v < n; ++v) same = same && out.at(v) == g.probabilities.at(v);
      switch_identical += same;
      ok = same;
    }
    exact += ok;
  }
  formula_seconds = seconds_since(t0);
  o.check(exact == 1000, "weighted formula voxel-exact on " + std::to_string(exact) + "/1000 random cases");
  o.check(switch_identical == switched,
          "switch-off bit-identical to M_g in " + std::to_string(switch_identical) + "/" + std::to_string(switched));
  o.check(formula_seconds < 60.0, "formula cases in " + fmt(formula_seconds, 2) + " s (< 60)");

  // End to end at tau = 1 on every held-out sample and prompt kind.
  const Model& m = run.result.model;
  std::size_t compared = 0, identical = 0;
  NoGradGuard no_grad;
  for (const auto& [category, samples] : run.result.corpora.held_out) {
    for (const auto& s : samples) {
      const ImageEmbedding image = m.embed_image(s.volume);
      for (PromptKind k : {PromptKind::points6, PromptKind::bbox}) {
        const PromptEmbedding prompt = m.embed_prompt(make_prompt(s, k));
        const Tensor general = decode(m.bank.general(), image, prompt).probabilities();
        const MoeOutput out = moe_from_embeddings(m.bank, &*m.gate, image, prompt, {1.0, Fusion::weighted});
        bool same = !out.report.fired && out.probabilities.numel() == general.numel();
        for (std::size_t v = 0; same && v < general.numel(); ++v) same = out.probabilities.at(v) == general.at(v);
        ++compared;
        identical += same;
      }
    }
  }
  o.check(identical == compared, "tau=1 end to end bit-identical to baseline on " + std::to_string(identical) + "/" +
                                     std::to_string(compared) + " held-out (sample, prompt) pairs");
  return o;
}

// ---------------------------------------------------------------------------
// 3. routing accuracy at the published learning rate

Outcome routing_accuracy(const RunArtifacts& run, double& secs) {
  Outcome o;
  const auto t0 = Clock::now();
  Model m = run.result.model.deep_copy();
  Rng rng(derive_seed(run.result.corpora.seed, "acceptance.gate"));
  m.gate = GatingNetwork::init(m.config.channels, m.bank.labels(), rng);
  TrainConfig tc = PipelineConfig::defaults().gate;
  tc.mode = TrainMode::gate_only;
  tc.steps = 500;
  tc.lr_gate = 1e-6;
  tc.seed = derive_seed(run.result.corpora.seed, "acceptance.gate.train");
  const auto before = group_checksums(m);
  const LossCurve curve = train_gating(m, GateTrainingData::from_corpora(run.result.corpora, m), tc);
  EvalOptions options;
  options.include_ft_experts = false;
  const EvalReport r = run_matrix(m, run.result.corpora, options);
  secs = seconds_since(t0);
  const auto experts = run.result.corpora.config.names(CategoryRole::expert);
  std::size_t held_out = 0;
  for (const auto& e : experts) held_out += run.result.corpora.held_out.at(e).size();
  o.note("4 expert categories, " + std::to_string(held_out) + " held-out samples, 500 steps, lr 1e-6, batch " +
         std::to_string(tc.batch_size));
  o.note("gate CE first-50 mean " + fmt(curve.window_mean(0, 50)) + ", last-50 mean " + fmt(curve.window_mean(450, 500)));
  o.check(held_out == 200, "held-out expert samples = " + std::to_string(held_out));
  for (const auto& k : kPromptKinds) {
    const double acc = r.routing_accuracy(experts, k);
    const double s_top = r.mean_correct_s_top(experts, k);
    o.check(acc >= 0.95, k + ": top-1 routing accuracy " + fmt(acc) + " (>= 0.95)");
    o.check(s_top > 0.5, k + ": mean s_top on correct routes " + fmt(s_top) + " (> 0.5)");
  }
  o.check(freeze_violations(before, group_checksums(m), FreezePolicy::for_mode(TrainMode::gate_only, m)).empty(),
          "gate_only freeze contract held");
  o.check(secs < 1200.0, "runtime " + fmt(secs, 1) + " s (< 1200)");
  return o;
}

// ---------------------------------------------------------------------------
// 4. forgetting reproduction

Outcome forgetting(const RunArtifacts& run) {
  Outcome o;
  const EvalReport& r = run.matrix;
  const auto experts = run.result.corpora.config.names(CategoryRole::expert);
  auto get = [&](const std::string& v, const std::string& c, const std::string& k) {
    const auto d = r.mean_dice(v, c, k);
    return d ? *d : std::nan("");
  };
  for (const auto& k : kPromptKinds) {
    double bound = 0.0;
    for (const auto& c : experts) {
      const double ft = get(ft_expert_variant(c), c, k), base = get(baseline_variant(), c, k);
      bound += ft / double(experts.size());
      o.check(ft - base >= 0.15, "(a) " + k + " " + c + ": FT-expert " + fmt(ft) + " vs baseline " + fmt(base) +
                                     " (gain >= 0.15)");
    }
    const double base_general = get(baseline_variant(), group_category(CategoryRole::general), k);
    for (const auto& e : experts) {
      const double ft_general = get(ft_expert_variant(e), group_category(CategoryRole::general), k);
      o.check(base_general - ft_general >= 0.10, "(b) " + k + " FT-expert:" + e + " on general " + fmt(ft_general) +
                                                     " vs baseline " + fmt(base_general) + " (drop >= 0.10)");
    }
    const double moe_expert = get(moe_variant(), group_category(CategoryRole::expert), k);
    o.check(std::abs(moe_expert - bound) <= 0.05,
            "(c) " + k + " MoE on expert categories " + fmt(moe_expert) + " vs FT upper bound " + fmt(bound) +
                " (within 0.05)");
    const double moe_general = get(moe_variant(), group_category(CategoryRole::general), k);
    o.check(std::abs(moe_general - base_general) <= 0.03, "(d) " + k + " MoE on general categories " +
                                                              fmt(moe_general) + " vs baseline " + fmt(base_general) +
                                                              " (within 0.03)");
  }
  const double total = run.pipeline_seconds + run.eval_seconds;
  o.check(total < 3600.0, "pipeline " + fmt(run.pipeline_seconds, 1) + " s + evaluation " + fmt(run.eval_seconds, 1) +
                              " s (< 3600)");
  return o;
}

// ---------------------------------------------------------------------------
// 5. ablation ordering

Outcome ablation_ordering(const RunArtifacts& run) {
  Outcome o;
  const AblationReport& ab = run.ablation;
  std::vector<std::string> kinds = kPromptKinds;
  kinds.push_back("all");
  for (const auto& k : kinds) {
    auto cell = [&](double tau, Fusion f) {
      const AblationCell* c = ab.find(tau, f, "expert", k);
      return c ? c->mean_dice : std::nan("");
    };
    const double w5 = cell(0.5, Fusion::weighted), w7 = cell(0.7, Fusion::weighted), avg5 = cell(0.5, Fusion::avg),
                 aft5 = cell(0.5, Fusion::aft_weight);
    o.check(w5 >= w7, k + ": weighted@0.5 " + fmt(w5) + " >= weighted@0.7 " + fmt(w7));
    o.check(aft5 < std::min({w5, w7, avg5}), k + ": aft_weight@0.5 " + fmt(aft5) + " < min(weighted@0.5, weighted@0.7, avg@0.5) " +
                                                  fmt(std::min({w5, w7, avg5})));
  }
  bool tau_one = true;
  std::size_t compared = 0;
  for (Fusion f : {Fusion::weighted, Fusion::avg, Fusion::aft_weight}) {
    for (const auto& k : kPromptKinds) {
      for (CategoryRole role : {CategoryRole::general, CategoryRole::expert}) {
        const AblationCell* c = ab.find(1.0, f, role == CategoryRole::general ? "general" : "expert", k);
        const auto base = run.matrix.mean_dice(baseline_variant(), group_category(role), k);
        tau_one = tau_one && c && base && c->mean_dice == *base && c->fired_rate == 0.0;
        ++compared;
      }
    }
  }
  o.check(tau_one, "tau=1.0 cells equal the baseline rows exactly (" + std::to_string(compared) + " cells)");
  o.check(run.ablation_seconds < 900.0, "ablation runtime " + fmt(run.ablation_seconds, 1) + " s (< 900)");
  return o;
}

// ---------------------------------------------------------------------------
// 6. freeze contracts

Outcome freeze_contracts(const RunArtifacts& run) {
  Outcome o;
  for (const auto& s : run.result.stages) {
    o.check(s.freeze_violations.empty(), s.name + ": " + std::to_string(s.freeze_violations.size()) + " violations");
  }
  // gate_plus_top1 is not part of the default pipeline; exercise it on a copy of the trained model.
  Model m = run.result.model.deep_copy();
  TrainConfig tc = PipelineConfig::defaults().gate;
  tc.mode = TrainMode::gate_plus_top1;
  tc.steps = 20;
  tc.seed = 5;
  const auto before = group_checksums(m);
  train_gating(m, GateTrainingData::from_corpora(run.result.corpora, m), tc);
  const auto after = group_checksums(m);
  const auto policy = FreezePolicy::for_mode(TrainMode::gate_plus_top1, m);
  o.check(freeze_violations(before, after, policy).empty(),
          "gate_plus_top1 (20 steps): frozen groups " + std::to_string(policy.frozen_groups.size()) + " unchanged");
  for (const char* g : {"encoder", "prompt_encoder"}) {
    o.check(policy.frozen_groups.count(g) == 1, std::string(g) + " frozen in gate_plus_top1");
  }
  const auto gate_only = FreezePolicy::for_mode(TrainMode::gate_only, m);
  o.check(gate_only.frozen_groups.size() == before.size() - 1 && !gate_only.frozen_groups.count("gate"),
          "gate_only freezes every group but the gate");
  return o;
}

// ---------------------------------------------------------------------------
// 7. determinism

Outcome determinism(const RunArtifacts& a, const RunArtifacts& b) {
  Outcome o;
  for (const auto& [name, bytes] : a.files) {
    auto it = b.files.find(name);
    o.check(it != b.files.end() && it->second == bytes,
            name + " bit-identical (" + std::to_string(bytes.size()) + " bytes, crc " +
                std::to_string(crc32_bytes({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()})) + ")");
  }
  o.check(a.files.size() == b.files.size(), "same artifact set");
  o.check(a.result.corpora.checksum() == b.result.corpora.checksum(), "corpus checksums identical");
  return o;
}

// ---------------------------------------------------------------------------
// 8. degenerate bank

Outcome degenerate_bank() {
  Outcome o;
  const Model m = Model::init(EncoderConfig{}, 31);
  Rng rng(8);
  const int side = m.config.volume_side;
  int identical = 0;
  for (int i = 0; i < 100; ++i) {
    Volume v = Volume::cube(static_cast<std::size_t>(side));
    for (auto& x : v.data) x = normal(rng, 0.3, 0.6);
    std::vector<PromptPoint> pts;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int p = 0; p < n; ++p) {
      pts.push_back({{int(rng() % side), int(rng() % side), int(rng() % side)},
                     rng() % 4 == 0 ? PointLabel::background : PointLabel::foreground});
    }
    const PromptSpec prompt = i % 3 == 0 ? PromptSpec::from_box({2, 3, 4}, {20, 21, 22}) : PromptSpec::from_points(pts);
    const Fusion f = std::array{Fusion::weighted, Fusion::avg, Fusion::aft_weight}[i % 3];
    const double tau = uniform(rng, 0.0, 1.0);
    const MoeOutput out = m.infer(v, prompt, {tau, f});
    const Tensor general = m.infer_general(v, prompt);
    bool same = !out.report.fired && !out.report.gated;
    for (std::size_t k = 0; same && k < general.numel(); ++k) same = out.probabilities.at(k) == general.at(k);
    identical += same;
  }
  o.check(identical == 100, "m=0 MoE bit-identical to the general model on " + std::to_string(identical) + "/100 inputs");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moe3d acceptance runner"};
  std::string work = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--work", work, "Directory for run artifacts")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria (1-8)");
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  const auto start = Clock::now();

  if (wanted(1)) {
    const auto t0 = Clock::now();
    Outcome o = gradient_suite();
    const double secs = seconds_since(t0);
    o.check(secs < 120.0, "runtime " + fmt(secs, 1) + " s (< 120)");
    report(1, "gradient suite", o, secs);
  }

  const bool needs_run = wanted(2) || wanted(3) || wanted(4) || wanted(5) || wanted(6) || wanted(7);
  std::optional<RunArtifacts> first;
  if (needs_run) {
    const auto cfg = PipelineConfig::defaults();
    std::cout << "      full pipeline run 1 (seed " << cfg.seed << ")\n";
    first = full_run(cfg, fs::path(work) / "run1");
  }
  if (wanted(2)) {
    const auto t0 = Clock::now();
    double formula_seconds = 0.0;
    Outcome o = selector_exactness(*first, formula_seconds);
    report(2, "selector exactness", o, seconds_since(t0));
  }
  if (wanted(3)) {
    double secs = 0.0;
    Outcome o = routing_accuracy(*first, secs);
    report(3, "routing accuracy, gate_only 500 steps at lr 1e-6", o, secs);
  }
  if (wanted(4)) report(4, "forgetting reproduction", forgetting(*first), first->pipeline_seconds + first->eval_seconds);
  if (wanted(5)) report(5, "ablation ordering", ablation_ordering(*first), first->ablation_seconds);
  if (wanted(6)) {
    const auto t0 = Clock::now();
    Outcome o = freeze_contracts(*first);
    report(6, "freeze contracts", o, seconds_since(t0));
  }
  if (wanted(7)) {
    std::cout << "      full pipeline run 2 (same seed)\n";
    const auto t0 = Clock::now();
    const RunArtifacts second = full_run(PipelineConfig::defaults(), fs::path(work) / "run2");
    report(7, "determinism across two full runs", determinism(*first, second), seconds_since(t0));
  }
  if (wanted(8)) {
    const auto t0 = Clock::now();
    Outcome o = degenerate_bank();
    report(8, "degenerate-bank equivalence", o, seconds_since(t0));
  }
  std::cout << (failures == 0 ? "all selected criteria passed" : std::to_string(failures) + " criteria failed") << " in "
            << fmt(seconds_since(start), 1) << " s\n";
  return failures == 0 ? 0 : 1;
}
