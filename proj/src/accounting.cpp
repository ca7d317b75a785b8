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

#include "lshformer/accounting.hpp"

#include "lshformer/error.hpp"

namespace lshformer {
namespace {

std::uint64_t linear_params(std::uint64_t in, std::uint64_t out) { return in * out + out; }
std::uint64_t attention_params(std::uint64_t d) { return 4 * linear_params(d, d); }
std::uint64_t norm_params(std::uint64_t d) { return 2 * d; }

}  // namespace

FootprintReport count_params(const ModelConfig& config, std::uint64_t reference_V,
                             std::uint64_t reference_d) {
  config.validate();
  const std::uint64_t d = config.d;
  FootprintReport r;
  r.projection_params = config.T;
  r.projection_bytes = 4ull * config.T;
  r.input_linear_params = linear_params(config.T, d);
  r.lpa_params = config.has_lpa() ? attention_params(d) + norm_params(d) : 0;
  r.pos_embed_params = std::uint64_t{config.max_groups()} * d;
  r.encoder_params = std::uint64_t{config.L} *
                     (attention_params(d) + 2 * norm_params(d) + linear_params(d, config.ffn_dim) +
                      linear_params(config.ffn_dim, d));
  r.head_params = linear_params(d, config.C);
  r.total_params =
      r.input_linear_params + r.lpa_params + r.pos_embed_params + r.encoder_params + r.head_params;
  r.total_param_bytes = 4 * r.total_params;
  r.model_bytes = r.total_param_bytes + r.projection_bytes;
  r.reference_V = reference_V;
  r.reference_d = reference_d;
  r.embedding_table_equivalent_bytes = 4 * reference_V * reference_d;
  return r;
}

FlopReport count_flops(const ModelConfig& config, std::uint32_t N) {
  config.validate();
  if (N == 0 || N % config.K != 0 || N > config.N_max)
    throw Error("invalid-config", "N must be a positive multiple of K no larger than N_max");
  const std::uint64_t d = config.d, K = config.K, G = N / config.K, L = config.L,
                      H = config.H, ffn = config.ffn_dim, n = N;
  FlopReport r;
  r.N = N;
  r.K = K;
  r.input_linear = n * config.T * d;
  if (config.has_lpa()) {
    r.lpa_projections = n * 4 * d * d;
    r.lpa_attention_scores = G * 2 * K * K * d;
    r.secondary += G * (H * K * K + K * d);  // softmax + layer norm per group
  }
  r.encoder_projections = L * 4 * G * d * d;
  r.encoder_attention_scores = L * 2 * G * G * d;
  r.attention_projections = r.lpa_projections + r.encoder_projections;
  r.ffn = L * 2 * G * d * ffn;
  r.head = d * config.C;
  r.secondary += L * (H * G * G + 2 * G * d + G * ffn);
  r.total = r.input_linear + r.attention_projections + r.lpa_attention_scores +
            r.encoder_attention_scores + r.ffn + r.head + r.secondary;
  return r;
}

FootprintComparison footprint_comparison(std::uint32_t T, std::uint64_t reference_V,
                                         std::uint64_t reference_d) {
  FootprintComparison c;
  c.embedding_table_equivalent_bytes = 4 * reference_V * reference_d;
  c.projection_bytes = 4ull * T;
  c.ratio = c.projection_bytes == 0
                ? 0.0
                : static_cast<double>(c.embedding_table_equivalent_bytes) /
                      static_cast<double>(c.projection_bytes);
  return c;
}

nlohmann::ordered_json to_json(const FootprintReport& r) {
  return {
      {"projection_params", r.projection_params},
      {"projection_bytes", r.projection_bytes},
      {"input_linear_params", r.input_linear_params},
      {"lpa_params", r.lpa_params},
      {"pos_embed_params", r.pos_embed_params},
      {"encoder_params", r.encoder_params},
      {"head_params", r.head_params},
      {"total_params", r.total_params},
      {"total_param_bytes", r.total_param_bytes},
      {"model_bytes", r.model_bytes},
      {"reference_V", r.reference_V},
      {"reference_d", r.reference_d},
      {"embedding_table_equivalent_bytes", r.embedding_table_equivalent_bytes},
  };
}

nlohmann::ordered_json to_json(const FlopReport& r) {
  return {
      {"N", r.N},
      {"K", r.K},
      {"input_linear_macs", r.input_linear},
      {"lpa_projection_macs", r.lpa_projections},
      {"lpa_attention_scores", r.lpa_attention_scores},
      {"encoder_projection_macs", r.encoder_projections},
      {"encoder_attention_scores", r.encoder_attention_scores},
      {"attention_projection_macs", r.attention_projections},
      {"ffn_macs", r.ffn},
      {"head_macs", r.head},
      {"secondary_ops", r.secondary},
      {"total_ops", r.total},
  };
}

}  // namespace lshformer
