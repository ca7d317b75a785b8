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

// Finite-difference validation of reverse-mode gradients, in double precision.

#include <cstdint>
#include <functional>
#include <span>

namespace lshformer {

struct ParamRef {
  std::span<double> value;
  std::span<const double> grad;  // analytic gradient at the current value
};

struct GradCheckOptions {
  double epsilon = 1e-3;
  std::size_t samples = 64;  // coordinates checked; at least 50, or all if fewer exist
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

// Perturbs sampled coordinates by +/- epsilon, evaluates `loss` at each, and
// compares the central difference with the analytic gradient. Relative error
// uses max(|analytic|, |numeric|, 1e-8) as denominator. `loss` must be
// deterministic. Every perturbed value is restored before returning.
GradCheckResult grad_check(const std::function<double()>& loss, std::span<const ParamRef> params,
                           const GradCheckOptions& options = {});

}  // namespace lshformer
