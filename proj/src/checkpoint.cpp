// Copyright (c) 2026 The moe3d Authors
// SPDX-License-Identifier: Apache-2.0

#include "moe3d/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <fstream>
#include <sstream>

#include "moe3d/errors.hpp"

namespace moe3d {

namespace {

constexpr const char* kMagic = "moe3d-checkpoint 1";

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::string shape_field(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(shape[i]);
  }
  return s;
}

Shape parse_shape_field(const std::string& field) {
  Shape shape;
  std::stringstream in(field);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      shape.push_back(static_cast<std::size_t>(std::stoull(part)));
    } catch (const std::exception&) {
      throw LoadError("checkpoint: bad shape field '" + field + "'");
    }
  }
  if (shape.empty()) throw LoadError("checkpoint: empty shape field");
  return shape;
}

}  // namespace

std::string CheckpointData::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  return {};
}

const Tensor* CheckpointData::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::uint32_t crc32_bytes(std::span<const unsigned char> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
    crc = crc32(crc, bytes.data() + offset, static_cast<uInt>(chunk));
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t crc32_values(std::span<const double> values) {
  std::string buf;
  buf.reserve(values.size() * 8);
  for (double v : values) put_u64_le(buf, std::bit_cast<std::uint64_t>(v));
  return crc32_bytes({reinterpret_cast<const unsigned char*>(buf.data()), buf.size()});
}

std::uint32_t tensors_checksum(const NamedTensors& tensors) {
  std::string buf;
  for (const auto& [name, t] : tensors) {
    for (double v : t.data()) put_u64_le(buf, std::bit_cast<std::uint64_t>(v));
  }
  return crc32_bytes({reinterpret_cast<const unsigned char*>(buf.data()), buf.size()});
}

std::string encode_checkpoint(const CheckpointData& data) {
  std::string header = std::string(kMagic) + "\n";
  for (const auto& [k, v] : data.meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ContractError("checkpoint: metadata key/value must be single-line, key without spaces");
    }
    header += "@" + k + " " + v + "\n";
  }
  std::string payload;
  for (const auto& [name, t] : data.tensors) {
    if (name.empty() || name.find_first_of(" \n") != std::string::npos) {
      throw ContractError("checkpoint: invalid tensor name '" + name + "'");
    }
    header += name + " " + shape_field(t.shape()) + " f64 " + std::to_string(payload.size()) + "\n";
    for (double v : t.data()) put_u64_le(payload, std::bit_cast<std::uint64_t>(v));
  }
  header += "end " + std::to_string(payload.size()) + "\n";
  const std::uint32_t crc =
      crc32_bytes({reinterpret_cast<const unsigned char*>(payload.data()), payload.size()});
  std::string out = header + payload;
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((crc >> (8 * i)) & 0xffu));
  return out;
}

CheckpointData decode_checkpoint(const std::string& bytes) {
  CheckpointData data;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw LoadError("checkpoint: truncated header");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kMagic) throw LoadError("checkpoint: bad magic line");

  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  std::size_t payload_bytes = 0;
  while (true) {
    std::string line = next_line();
    if (line.starts_with("@")) {
      const auto sp = line.find(' ');
      if (sp == std::string::npos) {
        data.meta.emplace_back(line.substr(1), "");
      } else {
        data.meta.emplace_back(line.substr(1, sp - 1), line.substr(sp + 1));
      }
      continue;
    }
    std::istringstream in(line);
    std::string first;
    in >> first;
    if (first == "end") {
      if (!(in >> payload_bytes)) throw LoadError("checkpoint: bad end line");
      break;
    }
    std::string shape, dtype;
    std::size_t offset = 0;
    if (!(in >> shape >> dtype >> offset)) throw LoadError("checkpoint: bad tensor line '" + line + "'");
    if (dtype != "f64") throw LoadError("checkpoint: unsupported dtype '" + dtype + "'");
    entries.push_back({first, parse_shape_field(shape), offset});
  }
  if (bytes.size() != pos + payload_bytes + 4) {
    throw LoadError("checkpoint: payload size mismatch (file truncated or padded)");
  }
  const auto* payload = reinterpret_cast<const unsigned char*>(bytes.data()) + pos;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(payload[payload_bytes + i]) << (8 * i);
  if (crc32_bytes({payload, payload_bytes}) != stored) throw LoadError("checkpoint: CRC mismatch");

  for (const auto& e : entries) {
    const std::size_t n = shape_numel(e.shape);
    if (e.offset + n * 8 > payload_bytes) throw LoadError("checkpoint: tensor '" + e.name + "' exceeds payload");
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      values[i] = std::bit_cast<double>(get_u64_le(payload + e.offset + 8 * i));
    }
    data.tensors.emplace_back(e.name, Tensor::from(e.shape, std::move(values)));
  }
  return data;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  write_file_atomic(path, encode_checkpoint(data));
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace moe3d
