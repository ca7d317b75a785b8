/*
 * Copyright (C) 2026 The lshformer Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "lshformer/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "lshformer/error.hpp"

namespace lshformer {
namespace {

constexpr char kMagic[4] = {'P', 'F', 'M', 'R'};
constexpr std::size_t kHeaderBytes = 20;

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

// Structural reader over the payload (everything before the CRC).
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw Error("truncated", "model file ends early");
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::uint64_t le(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

struct Parsed {
  ModelConfig config;
  ProjectionConfig projection;
  std::vector<std::pair<std::vector<std::size_t>, std::vector<float>>> tensors;
};

Parsed parse_payload(Reader& r) {
  Parsed p;
  r.u32();  // magic, version, size and header CRC are checked by the caller
  r.u32();
  r.u64();
  r.u32();
  auto& c = p.config;
  c.T = r.u32();
  c.d = r.u32();
  c.L = r.u32();
  c.H = r.u32();
  c.K = r.u32();
  c.N_max = r.u32();
  c.C = r.u32();
  c.ffn_dim = r.u32();
  c.dropout_p = r.f32();

  auto& pc = p.projection;
  pc.T = r.u32();
  pc.max_ngram = r.u32();
  pc.skip_distance = r.u32();
  pc.global_seed = r.u64();
  r.need(4ull * pc.T);
  pc.bit_seeds.resize(pc.T);
  for (auto& s : pc.bit_seeds) s = r.u32();

  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t rank = r.u32();
    r.need(4ull * rank);
    std::vector<std::size_t> dims(rank);
    for (auto& dim : dims) dim = r.u32();
    const std::uint64_t n = r.u64();
    r.need(4 * n);
    std::vector<float> values(static_cast<std::size_t>(n));
    for (auto& v : values) v = r.f32();
    p.tensors.emplace_back(std::move(dims), std::move(values));
  }
  return p;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const ModelConfig& config, const ProjectionConfig& projection,
                                          const ModelParams<float>& params) {
  config.validate();
  projection.validate();
  if (projection.T != config.T) throw Error("invalid-config", "projection T != model T");

  Writer w;
  w.raw(kMagic, 4);
  w.u32(kModelFormatVersion);
  w.u64(model_file_size(config, projection));
  w.u32(crc32_of(w.bytes()));
  for (auto v : {config.T, config.d, config.L, config.H, config.K, config.N_max, config.C, config.ffn_dim})
    w.u32(v);
  w.f32(config.dropout_p);

  w.u32(projection.T);
  w.u32(projection.max_ngram);
  w.u32(projection.skip_distance);
  w.u64(projection.global_seed);
  for (auto s : projection.bit_seeds) w.u32(s);

  std::uint32_t count = 0;
  params.visit([&](const std::string&, const Tensor<float>&) { ++count; });
  w.u32(count);
  params.visit([&](const std::string&, const Tensor<float>& t) {
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto dim : t.shape) w.u32(static_cast<std::uint32_t>(dim));
    w.u64(t.size());
    for (auto v : t.data) w.f32(v);
  });
  auto& bytes = w.bytes();
  const std::uint32_t crc = crc32_of(bytes);
  for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
  return std::move(bytes);
}

LoadedModel deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error("bad-magic", "not a model file");
  if (bytes.size() < kHeaderBytes) throw Error("truncated", "model file shorter than its header");
  Reader header(bytes.first(kHeaderBytes));
  header.u32();
  const std::uint32_t version = header.u32();
  const std::uint64_t declared = header.u64();
  const std::uint32_t header_crc = header.u32();
  if (version != kModelFormatVersion)
    throw Error("version-unsupported", "format version " + std::to_string(version));
  if (header_crc != crc32_of(bytes.first(kHeaderBytes - 4)))
    throw Error("crc-mismatch", "header checksum does not match");
  if (bytes.size() < declared)
    throw Error("truncated", "model file has " + std::to_string(bytes.size()) + " of " +
                                 std::to_string(declared) + " bytes");
  if (bytes.size() > declared) throw Error("crc-mismatch", "trailing bytes after model");

  const auto payload = bytes.first(bytes.size() - 4);
  const auto tail = bytes.last(4);
  const std::uint32_t stored = tail[0] | (tail[1] << 8) | (tail[2] << 16) |
                               (std::uint32_t{tail[3]} << 24);
  if (stored != crc32_of(payload)) throw Error("crc-mismatch", "checksum does not match contents");

  Reader r(payload);
  Parsed parsed = parse_payload(r);
  if (r.remaining() != 0) throw Error("crc-mismatch", "trailing bytes after parameters");

  parsed.config.validate();
  parsed.projection.validate();
  if (parsed.projection.T != parsed.config.T)
    throw Error("invalid-config", "projection T != model T");

  LoadedModel m{parsed.config, parsed.projection, ModelParams<float>::zeros(parsed.config)};
  std::size_t i = 0;
  m.params.visit([&](const std::string& name, Tensor<float>& t) {
    if (i >= parsed.tensors.size())
      throw Error("shape-mismatch", "file holds fewer tensors than the config requires");
    auto& [dims, values] = parsed.tensors[i++];
    if (dims != t.shape || values.size() != t.size())
      throw Error("shape-mismatch", "tensor " + name + " has unexpected shape");
    t.data = std::move(values);
  });
  if (i != parsed.tensors.size())
    throw Error("shape-mismatch", "file holds more tensors than the config requires");
  return m;
}

void save_model(const std::filesystem::path& path, const ModelConfig& config,
                const ProjectionConfig& projection, const ModelParams<float>& params) {
  const auto bytes = serialize_model(config, projection, params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("io", "write failure on " + path.string());
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  if (in.bad()) throw Error("io", "read failure on " + path.string());
  return deserialize_model(bytes);
}

std::uint64_t model_file_size(const ModelConfig& config, const ProjectionConfig& projection) {
  std::uint64_t size = kHeaderBytes + 36 + 20 + 4ull * projection.T + 4 + 4;
  ModelParams<float>::zeros(config).visit([&](const std::string&, const Tensor<float>& t) {
    size += 4 + 4 * t.shape.size() + 8 + 4 * t.size();
  });
  return size;
}

}  // namespace lshformer
