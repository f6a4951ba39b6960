// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "moe3d/checkpoint.hpp"
#include "moe3d/decoder_bank.hpp"
#include "moe3d/errors.hpp"
#include "moe3d/gating.hpp"
#include "moe3d/layers.hpp"
#include "moe3d/model.hpp"
#include "oracle_values.hpp"
#include "test_support.hpp"

namespace moe3d {
namespace {

using testing::gradients_match;
using testing::random_tensor;
using testing::tiny_config;
using testing::weighted_sum;

// Golden snapshots: CRC32 over the f64 values, recorded at the first
// verified run and byte-stable on this toolchain thereafter.
constexpr std::uint32_t kZeroVolumeTokensCrc = 0x8a058cdcu;
constexpr std::uint32_t kFixtureLogitsCrc = 0x64556b80u;

Volume random_volume(int side, Rng& rng) {
  Volume v = Volume::cube(static_cast<std::size_t>(side));
  for (auto& x : v.data) x = normal(rng, 0.0, 1.0);
  return v;
}

PromptSpec point_prompt(Coord c, PointLabel label = PointLabel::foreground) {
  return PromptSpec::from_points({{c, label}});
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// ---------------------------------------------------------------------------
// positional encoding and prompts

TEST(PositionalEncoding, OriginIsSinZeroCosOne) {
  const auto pe = positional_encoding({0, 0, 0}, 48);
  for (std::size_t i = 0; i < pe.size(); ++i) EXPECT_EQ(pe[i], i % 2 == 0 ? 0.0 : 1.0);
}

TEST(PositionalEncoding, MatchesHighPrecisionOracle) {
  const auto pe = positional_encoding({5, 7, 9}, 48);
  ASSERT_EQ(pe.size(), 48u);
  for (std::size_t i = 0; i < 48; ++i) EXPECT_NEAR(pe[i], oracle::kPositional579[i], 1e-13) << i;
}

TEST(PositionalEncoding, DistinctCoordinatesDiffer) {
  for (int a = 0; a < 32; a += 3) {
    for (int b = a + 1; b < 32; b += 5) {
      EXPECT_NE(positional_encoding({double(a), 4, 4}, 48), positional_encoding({double(b), 4, 4}, 48));
    }
  }
}

TEST(PositionalEncoding, ChannelsNotDivisibleBySixRaise) {
  EXPECT_THROW(positional_encoding({0, 0, 0}, 50), ConfigError);
}

TEST(EncoderConfig, Validation) {
  EncoderConfig c;
  EXPECT_NO_THROW(c.validate());
  c.patch_size = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.channels = 50;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(EncoderConfig::parse(EncoderConfig{}.to_string()), EncoderConfig{});
}

class PromptEncoding : public ::testing::Test {
 protected:
  Rng rng{9};
  PromptEncoder enc = PromptEncoder::init(48, rng);
};

TEST_F(PromptEncoding, SinglePointIsEncodingPlusType) {
  const auto x = encode_prompt(enc, point_prompt({5, 7, 9}), 32);
  for (std::size_t i = 0; i < 48; ++i) {
    EXPECT_NEAR(x.vector.at(i), oracle::kPositional579[i] + enc.foreground.at(i), 1e-13);
  }
}

TEST_F(PromptEncoding, DuplicatePointEqualsSinglePoint) {
  const auto one = encode_prompt(enc, point_prompt({3, 4, 5}), 32);
  const auto two = encode_prompt(enc, PromptSpec::from_points({{{3, 4, 5}}, {{3, 4, 5}}}), 32);
  for (std::size_t i = 0; i < 48; ++i) EXPECT_NEAR(one.vector.at(i), two.vector.at(i), 1e-15);
}

TEST_F(PromptEncoding, FullBoxIsMeanOfCornerTokens) {
  const auto x = encode_prompt(enc, PromptSpec::from_box({0, 0, 0}, {31, 31, 31}), 32);
  for (std::size_t i = 0; i < 48; ++i) {
    const double expect = 0.5 * (oracle::kPositional000[i] + enc.box_min.at(i)) +
                          0.5 * (oracle::kPositional313131[i] + enc.box_max.at(i));
    EXPECT_NEAR(x.vector.at(i), expect, 1e-13);
  }
}

TEST_F(PromptEncoding, ForegroundAndBackgroundDiffer) {
  const auto fg = encode_prompt(enc, point_prompt({8, 8, 8}), 32);
  const auto bg = encode_prompt(enc, point_prompt({8, 8, 8}, PointLabel::background), 32);
  double d = 0;
  for (std::size_t i = 0; i < 48; ++i) d += std::abs(fg.vector.at(i) - bg.vector.at(i));
  EXPECT_GT(d, 0.0);
}

TEST_F(PromptEncoding, InvalidPromptsRaise) {
  EXPECT_THROW(encode_prompt(enc, point_prompt({32, 0, 0}), 32), ValidationError);
  EXPECT_THROW(encode_prompt(enc, point_prompt({-1, 0, 0}), 32), ValidationError);
  EXPECT_THROW(encode_prompt(enc, PromptSpec::from_points({}), 32), ValidationError);
  EXPECT_THROW(encode_prompt(enc, PromptSpec::from_box({5, 5, 5}, {4, 9, 9}), 32), ValidationError);
}

// ---------------------------------------------------------------------------
// image encoder

TEST(ImageEncoder, ZeroVolumeGoldenSnapshot) {
  Rng rng(21);
  ImageEncoder enc = ImageEncoder::init(EncoderConfig{}, rng);
  std::fill(enc.patch_weight.mutable_data().begin(), enc.patch_weight.mutable_data().end(), 0.0);
  std::fill(enc.patch_bias.mutable_data().begin(), enc.patch_bias.mutable_data().end(), 0.0);
  const auto out = encode_image(enc, Volume::cube(32));
  ASSERT_EQ(out.tokens.shape(), (Shape{64, 48}));
  EXPECT_EQ(out.grid_side, 4);
  EXPECT_EQ(crc32_values(out.tokens.data()), kZeroVolumeTokensCrc);
}

TEST(ImageEncoder, PositionIsFrozenConstant) {
  Rng rng(2);
  ImageEncoder enc = ImageEncoder::init(tiny_config(), rng);
  EXPECT_FALSE(enc.position.requires_grad());
  Rng vr(3);
  sum(encode_image(enc, random_volume(8, vr)).tokens).backward();
  EXPECT_FALSE(enc.position.has_grad());
  NamedTensors params;
  enc.collect("", params);
  for (const auto& [name, t] : params) EXPECT_EQ(name.find("position"), std::string::npos) << name;
}

TEST(ImageEncoder, PerSampleProcessingAndDeterminism) {
  Rng rng(4);
  ImageEncoder enc = ImageEncoder::init(tiny_config(), rng);
  Rng vr(5);
  const Volume a = random_volume(8, vr), b = random_volume(8, vr);
  const auto ea1 = values(encode_image(enc, a).tokens);
  const auto eb = values(encode_image(enc, b).tokens);
  const auto ea2 = values(encode_image(enc, a).tokens);
  EXPECT_EQ(ea1, ea2);
  EXPECT_NE(ea1, eb);
}

TEST(ImageEncoder, PatchProjectionIsLinear) {
  Rng rng(6);
  ImageEncoder enc = ImageEncoder::init(tiny_config(), rng);
  std::fill(enc.patch_bias.mutable_data().begin(), enc.patch_bias.mutable_data().end(), 0.0);
  Rng vr(7);
  Volume v = random_volume(8, vr);
  Volume v2 = v;
  for (auto& x : v2.data) x *= 2.0;
  const auto p1 = values(project_patches(enc, v));
  const auto p2 = values(project_patches(enc, v2));
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_NEAR(p2[i], 2.0 * p1[i], 1e-12);
}

TEST(ImageEncoder, WrongVolumeShapeRaises) {
  Rng rng(8);
  ImageEncoder enc = ImageEncoder::init(tiny_config(), rng);
  EXPECT_THROW(encode_image(enc, Volume::cube(16)), ConfigError);
}

TEST(ImageEncoder, PatchLayoutIsAPermutation) {
  auto layout = patch_layout(8, 4);
  std::sort(layout.begin(), layout.end());
  for (std::uint32_t i = 0; i < layout.size(); ++i) EXPECT_EQ(layout[i], i);
}

// ---------------------------------------------------------------------------
// layer gradients

TEST(LayerGradients, AttentionMlpNorm) {
  Rng rng(31);
  for (int f = 0; f < 20; ++f) {
    AttentionParams att = AttentionParams::init(6, rng);
    MlpParams mlp = MlpParams::init(6, 12, rng);
    NormParams norm = NormParams::init(6);
    Tensor q = random_tensor({2, 6}, rng), ctx = random_tensor({3, 6}, rng);
    std::vector<Tensor> in{q, ctx, att.wq, att.wk, att.wv, att.wo, mlp.w1, mlp.b1, mlp.w2, mlp.b2,
                           norm.gain, norm.bias};
    EXPECT_TRUE(gradients_match(
        [&](const std::vector<Tensor>& x) {
          AttentionParams a{x[2], x[3], x[4], x[5]};
          MlpParams m{x[6], x[7], x[8], x[9]};
          NormParams n{x[10], x[11]};
          Tensor h = apply_norm(n, add(x[0], attend(a, x[0], x[1])));
          return weighted_sum(apply_mlp(m, h), 500 + f);
        },
        in));
  }
}

TEST(LayerGradients, ImageEncoderParameters) {
  Rng rng(41);
  ImageEncoder enc = ImageEncoder::init(tiny_config(), rng);
  const Volume v = random_volume(8, rng);
  NamedTensors params;
  enc.collect("", params);
  std::vector<Tensor> in;
  for (auto& [name, t] : params) in.push_back(t);
  EXPECT_TRUE(gradients_match([&](const auto&) { return weighted_sum(encode_image(enc, v).tokens, 77); }, in));
}

TEST(LayerGradients, PromptTypeEmbeddings) {
  Rng rng(42);
  PromptEncoder enc = PromptEncoder::init(12, rng);
  const auto prompt = PromptSpec::from_points({{{1, 2, 3}}, {{4, 5, 6}, PointLabel::background}, {{7, 0, 2}}});
  const auto box = PromptSpec::from_box({1, 1, 1}, {6, 7, 5});
  EXPECT_TRUE(gradients_match(
      [&](const auto&) {
        return add(weighted_sum(encode_prompt(enc, prompt, 8).vector, 1),
                   weighted_sum(encode_prompt(enc, box, 8).vector, 2));
      },
      {enc.foreground, enc.background, enc.box_min, enc.box_max}));
}

// ---------------------------------------------------------------------------
// decoder and bank

struct DecoderFixture {
  EncoderConfig config;
  Model model;
  ImageEmbedding image;
  PromptEmbedding prompt;

  explicit DecoderFixture(EncoderConfig c, std::uint64_t seed = 1)
      : config(c), model(Model::init(c, seed)) {
    Rng rng(seed + 100);
    image = model.embed_image(random_volume(c.volume_side, rng));
    prompt = model.embed_prompt(point_prompt({1, 2, 3}));
  }
};

TEST(Decoder, OutputShapeEqualsVolumeShapeForEveryConfig) {
  for (auto [side, patch] : {std::pair{8, 4}, {8, 2}, {12, 4}, {16, 8}, {16, 4}}) {
    EncoderConfig c = tiny_config();
    c.volume_side = side;
    c.patch_size = patch;
    DecoderFixture fx(c);
    const auto s = static_cast<std::size_t>(side);
    EXPECT_EQ(decode(fx.model.bank.general(), fx.image, fx.prompt).logits.shape(), (Shape{s, s, s}));
  }
}

TEST(Decoder, ZeroHeadGivesHalfProbabilities) {
  DecoderFixture fx(tiny_config());
  MaskDecoder& d = fx.model.bank.general();
  std::fill(d.head_weight.mutable_data().begin(), d.head_weight.mutable_data().end(), 0.0);
  std::fill(d.head_bias.mutable_data().begin(), d.head_bias.mutable_data().end(), 0.0);
  const auto out = decode(d, fx.image, fx.prompt);
  const Tensor probs = out.probabilities();
  for (double v : out.logits.data()) EXPECT_EQ(v, 0.0);
  for (double p : probs.data()) EXPECT_EQ(p, 0.5);
}

TEST(Decoder, FixtureGoldenSnapshot) {
  DecoderFixture fx(EncoderConfig{}, 12);
  const auto out = decode(fx.model.bank.general(), fx.image, fx.prompt);
  EXPECT_EQ(crc32_values(out.logits.data()), kFixtureLogitsCrc);
}

TEST(Decoder, DimensionMismatchRaises) {
  DecoderFixture a(tiny_config());
  EncoderConfig wide = tiny_config();
  wide.channels = 18;
  DecoderFixture b(wide);
  EXPECT_THROW(decode(a.model.bank.general(), b.image, b.prompt), ConfigError);
}

TEST(Decoder, GradientsOfEveryParameter) {
  DecoderFixture fx(tiny_config(), 3);
  NamedTensors params;
  fx.model.bank.general().collect("", params);
  std::vector<Tensor> in;
  for (auto& [name, t] : params) in.push_back(t);
  EXPECT_TRUE(gradients_match(
      [&](const auto&) { return weighted_sum(decode(fx.model.bank.general(), fx.image, fx.prompt).logits, 5); }, in));
}

TEST(Bank, CloneDecodesIdenticallyAndLeavesGeneralUntouched) {
  DecoderFixture fx(tiny_config());
  const auto before = group_checksums(fx.model).at("decoder.general");
  EXPECT_EQ(fx.model.bank.size(), 0u);
  fx.model.bank.clone_expert("alpha");
  EXPECT_EQ(fx.model.bank.size(), 1u);
  EXPECT_EQ(group_checksums(fx.model).at("decoder.general"), before);
  EXPECT_EQ(values(decode(fx.model.bank.general(), fx.image, fx.prompt).logits),
            values(decode(fx.model.bank.expert("alpha").decoder, fx.image, fx.prompt).logits));
}

TEST(Bank, CloneIsDeep) {
  DecoderFixture fx(tiny_config());
  fx.model.bank.clone_expert("alpha");
  fx.model.bank.expert("alpha").decoder.head_bias.mutable_data()[0] += 1.0;
  EXPECT_NE(fx.model.bank.general().head_bias.at(0), fx.model.bank.expert("alpha").decoder.head_bias.at(0));
}

TEST(Bank, RegistryErrors) {
  ExpertBank bank(MaskDecoder{});
  Rng rng(1);
  bank = ExpertBank(MaskDecoder::init(tiny_config(), rng));
  bank.clone_expert("a");
  EXPECT_THROW(bank.clone_expert("a"), RegistryError);
  EXPECT_THROW(bank.expert_by_index(1), RegistryError);
  EXPECT_THROW(bank.expert("zzz"), RegistryError);
  EXPECT_THROW(bank.clone_expert("bad label"), RegistryError);
}

TEST(Bank, IndexRoundTripAndOrderSurvivesCheckpoint) {
  Model m = Model::init(tiny_config(), 4);
  for (const char* l : {"delta", "alpha", "charlie", "bravo"}) m.bank.clone_expert(l);
  ASSERT_EQ(m.bank.expert_by_index(0).label, "delta");
  for (std::size_t k = 0; k < m.bank.size(); ++k) EXPECT_EQ(*m.bank.index_of(m.bank.expert_by_index(k).label), k);
  const Model back = model_from_checkpoint(decode_checkpoint(encode_checkpoint(model_checkpoint(m))));
  EXPECT_EQ(back.bank.labels(), m.bank.labels());
  EXPECT_EQ(group_checksums(back), group_checksums(m));
}

// ---------------------------------------------------------------------------
// gate

struct GateFixture {
  Model model;
  ImageEmbedding image;
  PromptEmbedding prompt;
  GatingNetwork gate;

  explicit GateFixture(std::size_t m, std::uint64_t seed = 1) : model(Model::init(tiny_config(), seed)) {
    Rng rng(seed + 7);
    image = model.embed_image(random_volume(8, rng));
    prompt = model.embed_prompt(point_prompt({2, 3, 4}));
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < m; ++k) labels.push_back("e" + std::to_string(k));
    gate = GatingNetwork::init(12, labels, rng);
  }
};

void zero(Tensor& t) { std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0); }

TEST(Gate, ZeroFc2GivesUniformScoresAndLowestIndex) {
  GateFixture fx(4);
  zero(fx.gate.fc2_weight);
  zero(fx.gate.fc2_bias);
  const auto s = gate_forward(fx.gate, fx.image, fx.prompt);
  for (double v : s.scores) EXPECT_NEAR(v, 0.25, 1e-15);
  EXPECT_EQ(s.top_index, 0u);
  EXPECT_NEAR(s.s_top, 0.25, 1e-15);
}

TEST(Gate, PermutingFc2ColumnsPermutesScores) {
  GateFixture fx(4, 3);
  const auto base = gate_forward(fx.gate, fx.image, fx.prompt);
  const std::vector<std::size_t> perm{2, 0, 3, 1};  // new column j takes old column perm[j]
  GatingNetwork g = fx.gate.clone();
  const std::size_t c = 12, m = 4;
  for (std::size_t r = 0; r < c; ++r) {
    for (std::size_t j = 0; j < m; ++j) g.fc2_weight.mutable_data()[r * m + j] = fx.gate.fc2_weight.at(r * m + perm[j]);
  }
  for (std::size_t j = 0; j < m; ++j) g.fc2_bias.mutable_data()[j] = fx.gate.fc2_bias.at(perm[j]);
  const auto s = gate_forward(g, fx.image, fx.prompt);
  for (std::size_t j = 0; j < m; ++j) EXPECT_NEAR(s.scores[j], base.scores[perm[j]], 1e-15);
  EXPECT_EQ(perm[s.top_index], base.top_index);
}

TEST(Gate, ScoresAreValidDistributionsAndDeterministic) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    GateFixture fx(1 + seed % 5, seed);
    const auto a = gate_forward(fx.gate, fx.image, fx.prompt);
    const auto b = gate_forward(fx.gate, fx.image, fx.prompt);
    EXPECT_EQ(a.scores, b.scores);
    double total = 0;
    for (double v : a.scores) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_LE(std::abs(total - 1.0), 1e-9);
    EXPECT_EQ(a.s_top, *std::max_element(a.scores.begin(), a.scores.end()));
    EXPECT_EQ(a.s_top, a.scores[a.top_index]);
  }
}

TEST(Gate, TieBreaksToLowestIndex) {
  const std::vector<double> logits{0.1, 0.7, 0.7, -2};
  EXPECT_EQ(scores_from_logits(logits).top_index, 1u);
}

TEST(Gate, ZeroExpertsAreRejected) {
  Rng rng(1);
  EXPECT_THROW(GatingNetwork::init(12, {}, rng), ConfigError);
  GateFixture fx(1);
  fx.gate.expert_labels.clear();
  EXPECT_THROW(gate_forward(fx.gate, fx.image, fx.prompt), ContractError);
}

TEST(Gate, CrossEntropyExamples) {
  EXPECT_NEAR(gate_ce_loss(Tensor::from({1, 3}, {0, 0, 0}), 2).item(), oracle::kLn3, 1e-15);
  EXPECT_LT(gate_ce_loss(Tensor::from({1, 3}, {10, -10, -10}), 0).item(), 1e-4);
  const Tensor logits = Tensor::from({1, 4}, {oracle::kCeLogits[0], oracle::kCeLogits[1], oracle::kCeLogits[2],
                                              oracle::kCeLogits[3]});
  EXPECT_NEAR(gate_ce_loss(logits, oracle::kCeTarget).item(), oracle::kCe, 1e-14);
  EXPECT_THROW(gate_ce_loss(logits, 4), ContractError);
}

TEST(Gate, SoftCrossEntropyWithOneHotEqualsHardCe) {
  Rng rng(5);
  for (int f = 0; f < 20; ++f) {
    Tensor logits = random_tensor({1, 5}, rng, -4, 4, false);
    const std::size_t t = rng() % 5;
    std::vector<double> target(5, 0.0);
    target[t] = 1.0;
    EXPECT_NEAR(gate_soft_ce_loss(logits, target).item(), gate_ce_loss(logits, t).item(), 1e-13);
  }
}

TEST(Gate, LossGradientsMatchFiniteDifferencesForEveryParameter) {
  GateFixture fx(4, 9);
  NamedTensors params;
  fx.gate.collect("", params);
  std::vector<Tensor> in;
  std::size_t count = 0;
  for (auto& [name, t] : params) {
    in.push_back(t);
    count += t.numel();
  }
  EXPECT_LE(count, 5000u);
  EXPECT_TRUE(gradients_match([&](const auto&) { return gate_ce_loss(gate_logits(fx.gate, fx.image, fx.prompt), 2); },
                              in));
}

TEST(Gate, SoftLossGradients) {
  Rng rng(10);
  for (int f = 0; f < 20; ++f) {
    std::vector<double> target(4);
    double total = 0;
    for (auto& v : target) total += (v = uniform(rng, 0, 1));
    for (auto& v : target) v /= total;
    EXPECT_TRUE(gradients_match([&](const auto& in) { return scale(gate_soft_ce_loss(in[0], target), 1.3); },
                                {random_tensor({1, 4}, rng, -3, 3)}));
  }
}

TEST(Gate, RebindCarriesKnownColumnsAndZeroesNewOnes) {
  GateFixture fx(2, 4);
  GatingNetwork g = fx.gate.clone();
  g.rebind({"e1", "new", "e0"});
  ASSERT_EQ(g.experts(), 3u);
  for (std::size_t r = 0; r < 12; ++r) {
    EXPECT_EQ(g.fc2_weight.at(r * 3 + 0), fx.gate.fc2_weight.at(r * 2 + 1));
    EXPECT_EQ(g.fc2_weight.at(r * 3 + 1), 0.0);
    EXPECT_EQ(g.fc2_weight.at(r * 3 + 2), fx.gate.fc2_weight.at(r * 2 + 0));
  }
  EXPECT_EQ(g.fc2_bias.at(1), 0.0);
}

TEST(Gate, CheckpointManifestMismatchIsALoadError) {
  Model m = Model::init(tiny_config(), 2);
  m.bank.clone_expert("a");
  m.bank.clone_expert("b");
  Rng rng(1);
  m.gate = GatingNetwork::init(12, {"a", "b"}, rng);
  CheckpointData ckpt = model_checkpoint(m);
  EXPECT_NO_THROW(model_from_checkpoint(ckpt));
  for (auto& [k, v] : ckpt.meta) {
    if (k == "gate_experts") v = "b,a";
  }
  EXPECT_THROW(model_from_checkpoint(ckpt), LoadError);
}

}  // namespace
}  // namespace moe3d
