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

#include "lshformer/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "lshformer/error.hpp"

namespace lshformer {

GradCheckResult grad_check(const std::function<double()>& loss, std::span<const ParamRef> params,
                           const GradCheckOptions& options) {
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].value.size() != params[t].grad.size())
      throw Error("shape-mismatch", "gradient size differs from parameter size");
    for (std::size_t i = 0; i < params[t].value.size(); ++i) coords.emplace_back(t, i);
  }
  const std::size_t wanted = std::max<std::size_t>(options.samples, 50);
  if (coords.size() > wanted) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(wanted);
  }

  GradCheckResult result;
  for (auto [t, i] : coords) {
    double& x = params[t].value[i];
    const double saved = x;
    x = saved + options.epsilon;
    const double up = loss();
    x = saved - options.epsilon;
    const double down = loss();
    x = saved;
    const double numeric = (up - down) / (2.0 * options.epsilon);
    const double analytic = params[t].grad[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
    ++result.coordinates;
  }
  return result;
}

}  // namespace lshformer
