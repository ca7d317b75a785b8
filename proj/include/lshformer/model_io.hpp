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

#pragma once

// Binary model file. All integers and floats are little-endian.
//
//   offset  field
//   0       magic "PFMR"
//   4       u32 format version (1)
//   8       u64 file size in bytes, CRC included
//   16      u32 CRC-32 of bytes 0..15
//   20      model config: u32 T, d, L, H, K, N_max, C, ffn_dim, dropout_p
//           (IEEE-754 bits of the float)                       36 bytes
//   56      projection config: u32 T, u32 max_ngram, u32 skip_distance,
//           u64 global_seed, T x u32 bit_seeds                 20 + 4T bytes
//   ...     u32 tensor count, then per tensor in ModelParams::visit order:
//           u32 rank, rank x u32 dims, u64 element count, count x f32
//   end-4   u32 CRC-32 (IEEE) of every preceding byte
//
// File size = 4*total_params + 4*T + 84 + sum over tensors of (12 + 4*rank).
//
// A file shorter than its declared size is "truncated"; any other damage
// fails one of the two checksums and is reported as "crc-mismatch".

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lshformer/model.hpp"
#include "lshformer/projection.hpp"

namespace lshformer {

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct LoadedModel {
  ModelConfig config;
  ProjectionConfig projection;
  ModelParams<float> params;
};

std::vector<std::uint8_t> serialize_model(const ModelConfig& config, const ProjectionConfig& projection,
                                          const ModelParams<float>& params);

// Errors: "bad-magic", "version-unsupported", "truncated", "crc-mismatch",
// "shape-mismatch", "invalid-config".
LoadedModel deserialize_model(std::span<const std::uint8_t> bytes);

// Throws Error("io") on filesystem failures.
void save_model(const std::filesystem::path& path, const ModelConfig& config,
                const ProjectionConfig& projection, const ModelParams<float>& params);
LoadedModel load_model(const std::filesystem::path& path);

// Bytes of the file for a config, without building it.
std::uint64_t model_file_size(const ModelConfig& config, const ProjectionConfig& projection);

}  // namespace lshformer
