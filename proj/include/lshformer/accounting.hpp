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

// Closed-form parameter, byte, and multiply-accumulate accounting.
//
// Conventions:
//  - One multiply-accumulate (MAC) is one unit.
//  - Attention "scores" cover both Q.K^T and P.V: 2 * M^2 * d MACs for an
//    attention window of M positions.
//  - Softmax exponentials, layer-norm elements and GELU evaluations are
//    counted one unit per element and reported separately as `secondary`;
//    they are part of `total` but never of the headline score counts.

#include <cstdint>

#include <nlohmann/json.hpp>

#include "lshformer/model.hpp"

namespace lshformer {

struct FootprintReport {
  std::uint64_t projection_params = 0;  // 32-bit per-bit seeds
  std::uint64_t projection_bytes = 0;
  std::uint64_t input_linear_params = 0;
  std::uint64_t lpa_params = 0;
  std::uint64_t pos_embed_params = 0;
  std::uint64_t encoder_params = 0;
  std::uint64_t head_params = 0;
  std::uint64_t total_params = 0;      // learned float parameters
  std::uint64_t total_param_bytes = 0; // 4 * total_params
  std::uint64_t model_bytes = 0;       // total_param_bytes + projection_bytes
  std::uint64_t reference_V = 0;
  std::uint64_t reference_d = 0;
  std::uint64_t embedding_table_equivalent_bytes = 0;  // 4 * V * d
};

struct FlopReport {
  std::uint64_t N = 0;
  std::uint64_t K = 0;
  std::uint64_t input_linear = 0;
  std::uint64_t lpa_projections = 0;
  std::uint64_t lpa_attention_scores = 0;
  std::uint64_t encoder_projections = 0;
  std::uint64_t encoder_attention_scores = 0;
  std::uint64_t attention_projections = 0;  // lpa_projections + encoder_projections
  std::uint64_t ffn = 0;
  std::uint64_t head = 0;
  std::uint64_t secondary = 0;
  std::uint64_t total = 0;
};

struct FootprintComparison {
  std::uint64_t embedding_table_equivalent_bytes = 0;
  std::uint64_t projection_bytes = 0;
  double ratio = 0.0;
};

FootprintReport count_params(const ModelConfig& config, std::uint64_t reference_V = 30000,
                             std::uint64_t reference_d = 768);

// Requires N % K == 0 and N <= N_max; throws Error("invalid-config") otherwise.
FlopReport count_flops(const ModelConfig& config, std::uint32_t N);

FootprintComparison footprint_comparison(std::uint32_t T, std::uint64_t reference_V,
                                         std::uint64_t reference_d);

nlohmann::ordered_json to_json(const FootprintReport& report);
nlohmann::ordered_json to_json(const FlopReport& report);

}  // namespace lshformer
