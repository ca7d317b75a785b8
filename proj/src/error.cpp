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

#include "lshformer/error.hpp"

namespace lshformer {

Error::Error(std::string code, std::string detail)
    : std::runtime_error(detail.empty() ? code : code + ": " + detail),
      code_(std::move(code)),
      detail_(std::move(detail)) {}

}  // namespace lshformer
