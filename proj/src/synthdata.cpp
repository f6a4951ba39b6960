// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "moe3d/synthdata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "moe3d/checkpoint.hpp"
#include "moe3d/errors.hpp"
#include "moe3d/rng.hpp"

namespace moe3d {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::ball: return "ball";
    case ShapeFamily::box: return "box";
    case ShapeFamily::ellipsoid: return "ellipsoid";
    case ShapeFamily::tube: return "tube";
  }
  return "ball";
}

ShapeFamily parse_shape_family(const std::string& name) {
  if (name == "ball") return ShapeFamily::ball;
  if (name == "box") return ShapeFamily::box;
  if (name == "ellipsoid") return ShapeFamily::ellipsoid;
  if (name == "tube") return ShapeFamily::tube;
  throw ConfigError("unknown shape family '" + name + "'");
}

std::string to_string(CategoryRole role) { return role == CategoryRole::general ? "general" : "expert"; }

CategoryRole parse_category_role(const std::string& name) {
  if (name == "general") return CategoryRole::general;
  if (name == "expert") return CategoryRole::expert;
  throw ConfigError("unknown category role '" + name + "'");
}

std::string to_string(PromptKind kind) { return kind == PromptKind::points6 ? "points6" : "bbox"; }

PromptKind parse_prompt_kind(const std::string& name) {
  if (name == "points6") return PromptKind::points6;
  if (name == "bbox") return PromptKind::bbox;
  throw ConfigError("unknown prompt kind '" + name + "' (expected points6 or bbox)");
}

namespace {
constexpr double kTubeHalfLengthMin = 8.0;
constexpr double kTubeHalfLengthMax = 12.0;
}  // namespace

void CategorySpec::validate(int volume_side) const {
  if (name.empty()) throw ConfigError("category: empty name");
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) {
      throw ConfigError("category '" + name + "': name must be alphanumeric, '_' or '-'");
    }
  }
  if (!(size_min > 0.0 && size_min <= size_max)) {
    throw ConfigError("category '" + name + "': need 0 < size_min <= size_max");
  }
  if (intensity.fg_std < 0.0 || intensity.bg_std < 0.0) {
    throw ConfigError("category '" + name + "': intensity std must be non-negative");
  }
  if (margin < 0) throw ConfigError("category '" + name + "': margin must be non-negative");
  const double extent = family == ShapeFamily::tube ? std::max(size_max, kTubeHalfLengthMax) : size_max;
  if (2.0 * (extent + margin) + 1.0 > volume_side) {
    throw ConfigError("category '" + name + "': shape extent does not fit a volume of side " +
                      std::to_string(volume_side));
  }
}

namespace {

struct Region {
  std::array<double, 3> lo;  // inclusive voxel bounds of the placement region
  std::array<double, 3> hi;
};

struct ShapeDraw {
  std::array<double, 3> center{};
  std::array<double, 3> extent{};  // half-size of the bounding box per axis
  std::array<double, 3> radii{};
  int axis = 0;
};

ShapeDraw draw_shape(const CategorySpec& spec, double scale, Rng& rng) {
  ShapeDraw d;
  const double size = scale * uniform(rng, spec.size_min, spec.size_max);
  switch (spec.family) {
    case ShapeFamily::ball:
      d.radii = {size, size, size};
      d.extent = d.radii;
      break;
    case ShapeFamily::box:
      for (auto& r : d.radii) r = size * uniform(rng, 0.6, 1.0);
      d.extent = d.radii;
      break;
    case ShapeFamily::ellipsoid: {
      d.axis = static_cast<int>(std::uniform_int_distribution<int>(0, 2)(rng));
      for (int a = 0; a < 3; ++a) d.radii[a] = a == d.axis ? size : size * uniform(rng, 0.35, 0.55);
      d.extent = d.radii;
      break;
    }
    case ShapeFamily::tube: {
      d.axis = static_cast<int>(std::uniform_int_distribution<int>(0, 2)(rng));
      const double length = scale * uniform(rng, kTubeHalfLengthMin, kTubeHalfLengthMax);
      for (int a = 0; a < 3; ++a) d.radii[a] = a == d.axis ? length : size;
      d.extent = d.radii;
      break;
    }
  }
  return d;
}

bool inside(const ShapeDraw& d, ShapeFamily family, const std::array<double, 3>& p) {
  std::array<double, 3> q{};
  for (int a = 0; a < 3; ++a) q[a] = p[a] - d.center[a];
  switch (family) {
    case ShapeFamily::ball:
    case ShapeFamily::ellipsoid: {
      double s = 0.0;
      for (int a = 0; a < 3; ++a) s += (q[a] / d.radii[a]) * (q[a] / d.radii[a]);
      return s <= 1.0;
    }
    case ShapeFamily::box:
      for (int a = 0; a < 3; ++a) {
        if (std::abs(q[a]) > d.radii[a]) return false;
      }
      return true;
    case ShapeFamily::tube: {
      double r2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        if (a == d.axis) continue;
        r2 += q[a] * q[a];
      }
      return std::abs(q[d.axis]) <= d.radii[d.axis] && r2 <= d.radii[(d.axis + 1) % 3] * d.radii[(d.axis + 1) % 3];
    }
  }
  return false;
}

// Renders one object into `mask` (which is left untouched on failure).
bool place_shape(const CategorySpec& spec, const Region& region, double scale, Rng& rng, Mask& mask) {
  constexpr int kAttempts = 32;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    ShapeDraw d = draw_shape(spec, scale, rng);
    bool fits = true;
    for (int a = 0; a < 3; ++a) {
      const double lo = region.lo[a] + d.extent[a] + spec.margin;
      const double hi = region.hi[a] - d.extent[a] - spec.margin;
      if (lo > hi) {
        fits = false;
        break;
      }
      d.center[a] = uniform(rng, lo, std::nextafter(hi, std::numeric_limits<double>::infinity()));
    }
    if (!fits) continue;
    std::vector<std::size_t> hits;
    std::array<int, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(0, static_cast<int>(std::floor(d.center[a] - d.extent[a])));
      hi[a] = std::min(static_cast<int>(mask.dims[a]) - 1, static_cast<int>(std::ceil(d.center[a] + d.extent[a])));
    }
    for (int x = lo[0]; x <= hi[0]; ++x)
      for (int y = lo[1]; y <= hi[1]; ++y)
        for (int z = lo[2]; z <= hi[2]; ++z) {
          if (inside(d, spec.family, {double(x), double(y), double(z)})) {
            hits.push_back(voxel_index(mask.dims, std::size_t(x), std::size_t(y), std::size_t(z)));
          }
        }
    if (hits.size() < 8) continue;
    for (auto i : hits) mask.data[i] = 1;
    return true;
  }
  return false;
}

// Values are rounded through float so that disk round trips are exact.
double draw_intensity(const IntensityProfile& profile, bool foreground, Rng& rng) {
  const double v = foreground ? normal(rng, profile.fg_mean, profile.fg_std) : normal(rng, profile.bg_mean, profile.bg_std);
  return static_cast<double>(static_cast<float>(v));
}

}  // namespace

Sample generate(const CategorySpec& spec, int volume_side, std::uint64_t seed, std::string sample_id) {
  spec.validate(volume_side);
  Rng rng(seed);
  const auto side = static_cast<std::size_t>(volume_side);
  Sample s;
  s.sample_id = std::move(sample_id);
  s.category = spec.name;
  s.seed = seed;
  s.mask = Mask::cube(side);
  const double last = volume_side - 1.0;
  if (!place_shape(spec, {{0, 0, 0}, {last, last, last}}, 1.0, rng, s.mask)) {
    throw GenerationError("category '" + spec.name + "': shape does not fit a volume of side " +
                          std::to_string(volume_side));
  }
  s.volume = Volume::cube(side);
  for (std::size_t i = 0; i < s.volume.size(); ++i) s.volume.data[i] = draw_intensity(spec.intensity, s.mask.data[i] != 0, rng);
  return s;
}

PairSample generate_pair(const CategorySpec& a, const CategorySpec& b, int volume_side, std::uint64_t seed) {
  a.validate(volume_side);
  b.validate(volume_side);
  Rng rng(seed);
  const auto side = static_cast<std::size_t>(volume_side);
  const double last = volume_side - 1.0;
  const double split = volume_side / 2.0;
  constexpr double kScale = 0.7;
  PairSample p;
  p.mask_a = Mask::cube(side);
  p.mask_b = Mask::cube(side);
  if (!place_shape(a, {{0, 0, 0}, {split - 1.0, last, last}}, kScale, rng, p.mask_a) ||
      !place_shape(b, {{split, 0, 0}, {last, last, last}}, kScale, rng, p.mask_b)) {
    throw GenerationError("pair '" + a.name + "'/'" + b.name + "': shapes do not fit the half volumes");
  }
  p.volume = Volume::cube(side);
  for (std::size_t i = 0; i < p.volume.size(); ++i) {
    const bool low_half = voxel_coord(p.volume.dims, i)[0] < volume_side / 2;
    const auto& profile = low_half ? a.intensity : b.intensity;
    p.volume.data[i] = draw_intensity(profile, (p.mask_a.data[i] | p.mask_b.data[i]) != 0, rng);
  }
  return p;
}

PromptSpec sample_point_prompts(const Mask& mask, int n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("point prompts: n must be at least 1");
  std::vector<std::size_t> fg;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.data[i]) fg.push_back(i);
  }
  if (fg.empty()) throw ValidationError("point prompts: mask is empty");
  std::array<double, 3> centroid{0, 0, 0};
  for (auto i : fg) {
    const Coord c = voxel_coord(mask.dims, i);
    for (int a = 0; a < 3; ++a) centroid[a] += c[a];
  }
  for (auto& v : centroid) v /= static_cast<double>(fg.size());
  std::size_t first = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < fg.size(); ++k) {
    const Coord c = voxel_coord(mask.dims, fg[k]);
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) d2 += (c[a] - centroid[a]) * (c[a] - centroid[a]);
    if (d2 < best) {
      best = d2;
      first = k;
    }
  }
  std::vector<PromptPoint> points{{voxel_coord(mask.dims, fg[first]), PointLabel::foreground}};
  Rng rng(seed);
  const auto extra = static_cast<std::size_t>(n - 1);
  std::vector<std::size_t> rest;
  for (std::size_t k = 0; k < fg.size(); ++k) {
    if (k != first) rest.push_back(fg[k]);
  }
  if (rest.size() >= extra) {
    for (std::size_t k = 0; k < extra; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, rest.size() - 1);
      std::swap(rest[k], rest[pick(rng)]);
      points.push_back({voxel_coord(mask.dims, rest[k]), PointLabel::foreground});
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, fg.size() - 1);
    for (std::size_t k = 0; k < extra; ++k) points.push_back({voxel_coord(mask.dims, fg[pick(rng)]), PointLabel::foreground});
  }
  return PromptSpec::from_points(std::move(points));
}

PromptSpec bbox_prompt(const Mask& mask, int jitter) {
  if (jitter < 0) throw ValidationError("bbox prompt: jitter must be non-negative");
  Coord lo{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), std::numeric_limits<int>::max()};
  Coord hi{-1, -1, -1};
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.data[i]) continue;
    const Coord c = voxel_coord(mask.dims, i);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
    }
  }
  if (hi[0] < 0) throw ValidationError("bbox prompt: mask is empty");
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::max(0, lo[a] - jitter);
    hi[a] = std::min(static_cast<int>(mask.dims[a]) - 1, hi[a] + jitter);
  }
  return PromptSpec::from_box(lo, hi);
}

PromptSpec make_prompt(const Sample& sample, PromptKind kind) {
  return make_prompt(sample.mask, kind, derive_seed(sample.seed, "points6"));
}

PromptSpec make_prompt(const Mask& mask, PromptKind kind, std::uint64_t stream) {
  if (kind == PromptKind::bbox) return bbox_prompt(mask, 0);
  return sample_point_prompts(mask, 6, stream);
}

CorpusConfig CorpusConfig::defaults() {
  CorpusConfig c;
  const IntensityProfile standard{1.0, 0.35, 0.0, 0.35};
  c.categories = {
      {"sphere", CategoryRole::general, ShapeFamily::ball, 4.0, 7.0, standard, 1},
      {"cuboid", CategoryRole::general, ShapeFamily::box, 3.5, 6.5, standard, 1},
      {"spindle", CategoryRole::general, ShapeFamily::ellipsoid, 7.0, 10.0, standard, 1},
      {"rod", CategoryRole::general, ShapeFamily::tube, 2.0, 3.5, standard, 1},
      {"nodule", CategoryRole::expert, ShapeFamily::ball, 2.5, 4.5, {0.55, 0.35, 0.0, 0.35}, 1},
      {"vessel", CategoryRole::expert, ShapeFamily::tube, 1.5, 2.5, {-0.9, 0.35, 0.0, 0.35}, 1},
      {"organ", CategoryRole::expert, ShapeFamily::ellipsoid, 9.0, 12.0, {-0.2, 0.35, 0.8, 0.35}, 1},
      {"cyst", CategoryRole::expert, ShapeFamily::box, 3.0, 5.5, {-0.5, 0.35, 0.5, 0.35}, 1},
  };
  return c;
}

void CorpusConfig::validate() const {
  if (volume_side <= 0) throw ValidationError("corpus config: volume_side must be positive");
  if (train_per_category < 1 || held_out_per_category < 1) {
    throw ValidationError("corpus config: per-category sample counts must be at least 1");
  }
  std::vector<std::string> seen;
  for (const auto& spec : categories) {
    try {
      spec.validate(volume_side);
    } catch (const ConfigError& e) {
      throw ValidationError(e.what());
    }
    if (std::find(seen.begin(), seen.end(), spec.name) != seen.end()) {
      throw ValidationError("corpus config: duplicate category '" + spec.name + "'");
    }
    seen.push_back(spec.name);
  }
  if (names(CategoryRole::general).size() < 2 || names(CategoryRole::expert).size() < 2) {
    throw ValidationError("corpus config: need at least 2 general and 2 expert categories");
  }
}

const CategorySpec& CorpusConfig::category(const std::string& name) const {
  for (const auto& spec : categories) {
    if (spec.name == name) return spec;
  }
  throw ValidationError("unknown category '" + name + "'");
}

std::vector<std::string> CorpusConfig::names(CategoryRole role) const {
  std::vector<std::string> out;
  for (const auto& spec : categories) {
    if (spec.role == role) out.push_back(spec.name);
  }
  return out;
}

namespace {

json category_to_json(const CategorySpec& s) {
  return {{"name", s.name},
          {"role", to_string(s.role)},
          {"family", to_string(s.family)},
          {"size_min", s.size_min},
          {"size_max", s.size_max},
          {"fg_mean", s.intensity.fg_mean},
          {"fg_std", s.intensity.fg_std},
          {"bg_mean", s.intensity.bg_mean},
          {"bg_std", s.intensity.bg_std},
          {"margin", s.margin}};
}

json config_to_json(const CorpusConfig& c) {
  json cats = json::array();
  for (const auto& s : c.categories) cats.push_back(category_to_json(s));
  return {{"volume_side", c.volume_side},
          {"train_per_category", c.train_per_category},
          {"held_out_per_category", c.held_out_per_category},
          {"categories", cats}};
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok |= it.key() == k;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

CorpusConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("corpus config: expected a JSON object");
  check_keys(j, {"volume_side", "train_per_category", "held_out_per_category", "categories"}, "corpus config");
  CorpusConfig c = CorpusConfig::defaults();
  c.volume_side = j.value("volume_side", c.volume_side);
  c.train_per_category = j.value("train_per_category", c.train_per_category);
  c.held_out_per_category = j.value("held_out_per_category", c.held_out_per_category);
  if (j.contains("categories")) {
    c.categories.clear();
    for (const auto& cj : j.at("categories")) {
      check_keys(cj,
                 {"name", "role", "family", "size_min", "size_max", "fg_mean", "fg_std", "bg_mean", "bg_std", "margin"},
                 "category");
      CategorySpec s;
      s.name = cj.at("name").get<std::string>();
      s.role = parse_category_role(cj.value("role", std::string("general")));
      s.family = parse_shape_family(cj.at("family").get<std::string>());
      s.size_min = cj.value("size_min", s.size_min);
      s.size_max = cj.value("size_max", s.size_max);
      s.intensity.fg_mean = cj.value("fg_mean", s.intensity.fg_mean);
      s.intensity.fg_std = cj.value("fg_std", s.intensity.fg_std);
      s.intensity.bg_mean = cj.value("bg_mean", s.intensity.bg_mean);
      s.intensity.bg_std = cj.value("bg_std", s.intensity.bg_std);
      s.margin = cj.value("margin", s.margin);
      c.categories.push_back(s);
    }
  }
  return c;
}

std::string sample_id_for(const std::string& category, const char* split, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", index);
  return category + "-" + split + "-" + buf;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::string volume_bytes(const Volume& v) {
  std::string out;
  out.reserve(v.size() * 4);
  for (double x : v.data) {
    const float f = static_cast<float>(x);
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  return out;
}

std::string mask_bytes(const Mask& m) { return std::string(m.data.begin(), m.data.end()); }

std::uint32_t crc_of(const std::string& bytes) {
  return crc32_bytes({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

}  // namespace

std::string CorpusConfig::to_json() const { return config_to_json(*this).dump(2); }

CorpusConfig CorpusConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("corpus config: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("corpus config: ") + e.what());
  }
}

std::uint32_t sample_checksum(const Sample& sample) {
  return crc_of(volume_bytes(sample.volume) + mask_bytes(sample.mask));
}

std::vector<const Sample*> Corpora::general_train() const {
  std::vector<const Sample*> out;
  for (const auto& name : config.names(CategoryRole::general)) {
    auto it = train.find(name);
    if (it == train.end()) continue;
    for (const auto& s : it->second) out.push_back(&s);
  }
  return out;
}

std::map<std::string, std::uint32_t> Corpora::sample_checksums() const {
  std::map<std::string, std::uint32_t> out;
  for (const auto* split : {&train, &held_out}) {
    for (const auto& [name, samples] : *split) {
      for (const auto& s : samples) out[s.sample_id] = sample_checksum(s);
    }
  }
  return out;
}

std::uint32_t Corpora::checksum() const {
  std::string buf;
  for (const auto& [id, crc] : sample_checksums()) {
    buf += id;
    put_u32(buf, crc);
  }
  return crc_of(buf);
}

Corpora build_corpora(const CorpusConfig& config, std::uint64_t seed) {
  config.validate();
  Corpora c;
  c.config = config;
  c.seed = seed;
  for (const auto& spec : config.categories) {
    auto& train = c.train[spec.name];
    for (int i = 0; i < config.train_per_category; ++i) {
      const std::string id = sample_id_for(spec.name, "train", i);
      train.push_back(generate(spec, config.volume_side, derive_seed(seed, id), id));
    }
    auto& held = c.held_out[spec.name];
    for (int i = 0; i < config.held_out_per_category; ++i) {
      const std::string id = sample_id_for(spec.name, "test", i);
      held.push_back(generate(spec, config.volume_side, derive_seed(seed, id), id));
    }
  }
  return c;
}

void write_corpora(const Corpora& corpora, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "samples", ec);
  if (ec) throw Error("cannot create corpus directory " + dir.string() + ": " + ec.message());
  json splits = {{"train", json::object()}, {"held_out", json::object()}};
  json checksums = json::object();
  auto emit = [&](const char* split, const std::map<std::string, std::vector<Sample>>& groups) {
    for (const auto& spec : corpora.config.categories) {
      auto it = groups.find(spec.name);
      if (it == groups.end()) continue;
      json ids = json::array();
      for (const auto& s : it->second) {
        const std::string vol = volume_bytes(s.volume);
        const std::string msk = mask_bytes(s.mask);
        write_file_atomic(dir / "samples" / (s.sample_id + ".vol"), vol);
        write_file_atomic(dir / "samples" / (s.sample_id + ".mask"), msk);
        json sidecar = {{"sample_id", s.sample_id},
                        {"category", s.category},
                        {"seed", s.seed},
                        {"shape", {s.volume.dims[0], s.volume.dims[1], s.volume.dims[2]}},
                        {"volume_file", s.sample_id + ".vol"},
                        {"mask_file", s.sample_id + ".mask"}};
        write_file_atomic(dir / "samples" / (s.sample_id + ".json"), sidecar.dump(2) + "\n");
        checksums[s.sample_id] = hex32(crc_of(vol + msk));
        ids.push_back(s.sample_id);
      }
      splits[split][spec.name] = ids;
    }
  };
  emit("train", corpora.train);
  emit("held_out", corpora.held_out);
  json manifest = {{"format", "moe3d-corpus-1"},
                   {"seed", corpora.seed},
                   {"config", config_to_json(corpora.config)},
                   {"splits", splits},
                   {"checksums", checksums},
                   {"corpus_checksum", hex32(corpora.checksum())}};
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Sample read_sample(const fs::path& sidecar) {
  json j;
  try {
    j = json::parse(read_file(sidecar));
  } catch (const json::exception& e) {
    throw LoadError("sample sidecar " + sidecar.string() + " is malformed: " + e.what());
  }
  Sample s;
  try {
    s.sample_id = j.at("sample_id").get<std::string>();
    s.category = j.at("category").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 3) throw LoadError("sample " + s.sample_id + ": shape must have 3 entries");
    const Dims dims{shape[0], shape[1], shape[2]};
    const fs::path base = sidecar.parent_path();
    const std::string vol = read_file(base / j.at("volume_file").get<std::string>());
    const std::string msk = read_file(base / j.at("mask_file").get<std::string>());
    const std::size_t n = dims[0] * dims[1] * dims[2];
    if (vol.size() != 4 * n || msk.size() != n) {
      throw LoadError("sample " + s.sample_id + ": blob sizes do not match shape");
    }
    s.volume = {dims, std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(vol[4 * i + b])) << (8 * b);
      float f = 0.0f;
      std::memcpy(&f, &bits, 4);
      s.volume.data[i] = f;
    }
    s.mask = {dims, std::vector<std::uint8_t>(msk.begin(), msk.end())};
    for (auto v : s.mask.data) {
      if (v > 1) throw LoadError("sample " + s.sample_id + ": mask is not binary");
    }
  } catch (const json::exception& e) {
    throw LoadError("sample sidecar " + sidecar.string() + " is malformed: " + e.what());
  }
  return s;
}

Corpora read_corpora(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw LoadError("corpus manifest in " + dir.string() + " is malformed: " + e.what());
  }
  Corpora c;
  try {
    c.config = config_from_json(manifest.at("config"));
    c.config.validate();
    c.seed = manifest.at("seed").get<std::uint64_t>();
    const auto& checksums = manifest.at("checksums");
    for (const char* split : {"train", "held_out"}) {
      auto& groups = std::string(split) == "train" ? c.train : c.held_out;
      for (const auto& [category, ids] : manifest.at("splits").at(split).items()) {
        auto& out = groups[category];
        for (const auto& id : ids) {
          Sample s = read_sample(dir / "samples" / (id.get<std::string>() + ".json"));
          if (s.category != category) {
            throw ValidationError("sample " + s.sample_id + " is listed under '" + category + "' but labelled '" +
                                  s.category + "'");
          }
          const std::string expected = checksums.at(s.sample_id).get<std::string>();
          if (hex32(sample_checksum(s)) != expected) {
            throw ValidationError("checksum mismatch for sample " + s.sample_id);
          }
          out.push_back(std::move(s));
        }
      }
    }
    if (hex32(c.checksum()) != manifest.at("corpus_checksum").get<std::string>()) {
      throw ValidationError("corpus checksum mismatch in " + dir.string());
    }
  } catch (const json::exception& e) {
    throw LoadError("corpus manifest in " + dir.string() + " is malformed: " + e.what());
  }
  return c;
}

}  // namespace moe3d
