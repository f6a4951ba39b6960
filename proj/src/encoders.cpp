// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "moe3d/encoders.hpp"

#include <cmath>
#include <sstream>

#include "moe3d/errors.hpp"

namespace moe3d {

void EncoderConfig::validate() const {
  if (volume_side <= 0 || patch_size <= 0 || channels <= 0 || depth < 0) {
    throw ConfigError("encoder config: sizes must be positive (" + to_string() + ")");
  }
  if (volume_side % patch_size != 0) {
    throw ConfigError("encoder config: volume_side " + std::to_string(volume_side) +
                      " is not divisible by patch_size " + std::to_string(patch_size));
  }
  if (channels % 6 != 0) {
    throw ConfigError("encoder config: channels " + std::to_string(channels) + " is not divisible by 6");
  }
  if (heads != 1) throw ConfigError("encoder config: only single-head attention is supported");
}

std::string EncoderConfig::to_string() const {
  std::ostringstream out;
  out << "volume_side=" << volume_side << " patch_size=" << patch_size << " channels=" << channels
      << " depth=" << depth << " heads=" << heads;
  return out.str();
}

EncoderConfig EncoderConfig::parse(const std::string& text) {
  EncoderConfig cfg;
  std::istringstream in(text);
  std::string field;
  while (in >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ConfigError("encoder config: bad field '" + field + "'");
    const std::string key = field.substr(0, eq);
    int value = 0;
    try {
      value = std::stoi(field.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("encoder config: bad value in '" + field + "'");
    }
    if (key == "volume_side") cfg.volume_side = value;
    else if (key == "patch_size") cfg.patch_size = value;
    else if (key == "channels") cfg.channels = value;
    else if (key == "depth") cfg.depth = value;
    else if (key == "heads") cfg.heads = value;
    else throw ConfigError("encoder config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

std::vector<double> positional_encoding(const std::array<double, 3>& coord, int channels) {
  if (channels <= 0 || channels % 6 != 0) {
    throw ConfigError("positional_encoding: channels " + std::to_string(channels) + " is not divisible by 6");
  }
  const int pairs = channels / 6;
  std::vector<double> out(static_cast<std::size_t>(channels));
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < pairs; ++k) {
      const double freq = std::pow(10000.0, -static_cast<double>(k) / pairs);
      const double angle = coord[axis] * freq;
      const std::size_t base = static_cast<std::size_t>(axis * 2 * pairs + 2 * k);
      out[base] = std::sin(angle);
      out[base + 1] = std::cos(angle);
    }
  }
  return out;
}

PromptSpec PromptSpec::from_points(std::vector<PromptPoint> points) {
  PromptSpec p;
  p.kind = Kind::points;
  p.points = std::move(points);
  return p;
}

PromptSpec PromptSpec::from_box(Coord min_corner, Coord max_corner) {
  PromptSpec p;
  p.kind = Kind::box;
  p.box_min = min_corner;
  p.box_max = max_corner;
  return p;
}

namespace {

bool in_bounds(const Coord& c, int side) {
  for (int v : c) {
    if (v < 0 || v >= side) return false;
  }
  return true;
}

std::string coord_string(const Coord& c) {
  return "(" + std::to_string(c[0]) + "," + std::to_string(c[1]) + "," + std::to_string(c[2]) + ")";
}

}  // namespace

void PromptSpec::validate(int volume_side) const {
  if (kind == Kind::points) {
    if (points.empty()) throw ValidationError("prompt: point list is empty");
    for (const auto& p : points) {
      if (!in_bounds(p.coord, volume_side)) {
        throw ValidationError("prompt: point " + coord_string(p.coord) + " outside volume of side " +
                              std::to_string(volume_side));
      }
    }
    return;
  }
  if (!in_bounds(box_min, volume_side) || !in_bounds(box_max, volume_side)) {
    throw ValidationError("prompt: box corner outside volume of side " + std::to_string(volume_side));
  }
  for (int a = 0; a < 3; ++a) {
    if (box_min[a] > box_max[a]) {
      throw ValidationError("prompt: box min corner " + coord_string(box_min) + " exceeds max corner " +
                            coord_string(box_max));
    }
  }
}

std::vector<std::uint32_t> patch_layout(int volume_side, int patch_size) {
  const int g = volume_side / patch_size;
  const int p = patch_size;
  const std::size_t side = static_cast<std::size_t>(volume_side);
  const Dims dims{side, side, side};
  std::vector<std::uint32_t> layout;
  layout.reserve(side * side * side);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j)
      for (int k = 0; k < g; ++k)
        for (int a = 0; a < p; ++a)
          for (int b = 0; b < p; ++b)
            for (int c = 0; c < p; ++c) {
              layout.push_back(static_cast<std::uint32_t>(
                  voxel_index(dims, static_cast<std::size_t>(i * p + a), static_cast<std::size_t>(j * p + b),
                              static_cast<std::size_t>(k * p + c))));
            }
  return layout;
}

Tensor patchify(const Volume& volume, int patch_size) {
  const auto side = volume.dims[0];
  if (volume.dims[1] != side || volume.dims[2] != side || side % static_cast<std::size_t>(patch_size) != 0) {
    throw ConfigError("patchify: volume must be a cube divisible by the patch size");
  }
  const auto layout = patch_layout(static_cast<int>(side), patch_size);
  const std::size_t p3 = static_cast<std::size_t>(patch_size * patch_size * patch_size);
  std::vector<double> out(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) out[i] = volume.data[layout[i]];
  return Tensor::from({layout.size() / p3, p3}, std::move(out));
}

ImageEncoder ImageEncoder::init(const EncoderConfig& config, Rng& rng) {
  config.validate();
  ImageEncoder enc;
  enc.config = config;
  const auto c = static_cast<std::size_t>(config.channels);
  enc.patch_weight = init_weight(static_cast<std::size_t>(config.patch_voxels()), c, rng);
  enc.patch_bias = Tensor::zeros({c}, true);
  for (int l = 0; l < config.depth; ++l) {
    TransformerBlock block;
    block.attn = AttentionParams::init(c, rng);
    block.norm1 = NormParams::init(c);
    block.mlp = MlpParams::init(c, 4 * c, rng);
    block.norm2 = NormParams::init(c);
    enc.blocks.push_back(std::move(block));
  }
  const int g = config.grid_side();
  const double half = (config.patch_size - 1) / 2.0;
  std::vector<double> pos;
  pos.reserve(static_cast<std::size_t>(config.tokens()) * c);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j)
      for (int k = 0; k < g; ++k) {
        auto pe = positional_encoding({i * config.patch_size + half, j * config.patch_size + half,
                                       k * config.patch_size + half},
                                      config.channels);
        pos.insert(pos.end(), pe.begin(), pe.end());
      }
  enc.position = Tensor::from({static_cast<std::size_t>(config.tokens()), c}, std::move(pos));
  return enc;
}

void ImageEncoder::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + "patch.weight", patch_weight);
  out.emplace_back(prefix + "patch.bias", patch_bias);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const std::string bp = prefix + "block" + std::to_string(l) + ".";
    blocks[l].attn.collect(bp + "attn.", out);
    blocks[l].norm1.collect(bp + "norm1.", out);
    blocks[l].mlp.collect(bp + "mlp.", out);
    blocks[l].norm2.collect(bp + "norm2.", out);
  }
}

void ImageEncoder::set_trainable(bool flag) {
  NamedTensors params;
  collect("", params);
  for (auto& [name, t] : params) t.set_requires_grad(flag);
}

Tensor project_patches(const ImageEncoder& encoder, const Volume& volume) {
  const auto side = static_cast<std::size_t>(encoder.config.volume_side);
  if (volume.dims != Dims{side, side, side}) {
    throw ConfigError("encode_image: volume shape does not match encoder volume_side " +
                      std::to_string(side));
  }
  Tensor patches = patchify(volume, encoder.config.patch_size);
  return add_rowvec(matmul(patches, encoder.patch_weight), encoder.patch_bias);
}

ImageEmbedding encode_image(const ImageEncoder& encoder, const Volume& volume) {
  Tensor h = add(project_patches(encoder, volume), encoder.position);
  for (const auto& block : encoder.blocks) {
    h = apply_norm(block.norm1, add(h, attend(block.attn, h, h)));
    h = apply_norm(block.norm2, add(h, apply_mlp(block.mlp, h)));
  }
  return {h, encoder.config.grid_side()};
}

PromptEncoder PromptEncoder::init(int channels, Rng& rng) {
  if (channels <= 0 || channels % 6 != 0) {
    throw ConfigError("prompt encoder: channels " + std::to_string(channels) + " is not divisible by 6");
  }
  PromptEncoder enc;
  enc.channels = channels;
  const auto c = static_cast<std::size_t>(channels);
  auto embed = [&]() {
    std::vector<double> v(c);
    for (auto& x : v) x = normal(rng, 0.0, 1.0);
    return Tensor::from({1, c}, std::move(v), true);
  };
  enc.foreground = embed();
  enc.background = embed();
  enc.box_min = embed();
  enc.box_max = embed();
  return enc;
}

void PromptEncoder::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + "type.foreground", foreground);
  out.emplace_back(prefix + "type.background", background);
  out.emplace_back(prefix + "type.box_min", box_min);
  out.emplace_back(prefix + "type.box_max", box_max);
}

void PromptEncoder::set_trainable(bool flag) {
  for (Tensor* t : {&foreground, &background, &box_min, &box_max}) t->set_requires_grad(flag);
}

PromptEmbedding encode_prompt(const PromptEncoder& encoder, const PromptSpec& prompt, int volume_side) {
  prompt.validate(volume_side);
  const auto c = static_cast<std::size_t>(encoder.channels);
  std::vector<double> pe_mean(c, 0.0);
  auto accumulate = [&](const Coord& coord) {
    auto pe = positional_encoding({static_cast<double>(coord[0]), static_cast<double>(coord[1]),
                                   static_cast<double>(coord[2])},
                                  encoder.channels);
    for (std::size_t j = 0; j < c; ++j) pe_mean[j] += pe[j];
  };
  std::vector<std::pair<const Tensor*, double>> types;
  double tokens = 0.0;
  if (prompt.kind == PromptSpec::Kind::points) {
    double fg = 0.0, bg = 0.0;
    for (const auto& p : prompt.points) {
      accumulate(p.coord);
      (p.label == PointLabel::foreground ? fg : bg) += 1.0;
    }
    tokens = fg + bg;
    if (fg > 0) types.emplace_back(&encoder.foreground, fg / tokens);
    if (bg > 0) types.emplace_back(&encoder.background, bg / tokens);
  } else {
    accumulate(prompt.box_min);
    accumulate(prompt.box_max);
    tokens = 2.0;
    types.emplace_back(&encoder.box_min, 0.5);
    types.emplace_back(&encoder.box_max, 0.5);
  }
  for (auto& v : pe_mean) v /= tokens;
  Tensor out = Tensor::from({1, c}, std::move(pe_mean));
  for (const auto& [embedding, weight] : types) out = add(out, scale(*embedding, weight));
  return {out};
}

}  // namespace moe3d
