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

#include <iosfwd>
#include <string>
#include <vector>

namespace lshformer {

// Entry point of the `lshformer` command-line tool. args excludes the program
// name. Returns 0 on success, 1 on runtime errors, 2 on usage errors; errors
// are written to err as one-line JSON {"error": ..., "detail": ...}.
//
//   lshformer train   --train data.tsv --model out.pfmr [--eval dev.tsv] [--metrics m.jsonl] ...
//   lshformer eval    --model out.pfmr --eval test.tsv
//   lshformer predict --model out.pfmr < texts.txt
//   lshformer report  --T 420 --d 768 --K 4 --N 64
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

// Label names are stored next to the model file as "<model>.labels", one per
// line in class-index order.
std::string labels_path(const std::string& model_path);

}  // namespace lshformer
