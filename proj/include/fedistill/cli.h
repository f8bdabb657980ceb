// Copyright 2026 The fedistill Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDISTILL_CLI_H_
#define FEDISTILL_CLI_H_

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedistill/metrics.h"

namespace fedistill {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRunError = 1;
inline constexpr int kExitConfigError = 2;

// Entry point of the fedistill tool. `args` excludes the program name.
int RunCli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partial file.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view content);

// Methods x test sets matrix; the best value of each column is suffixed with
// '*'. Throws std::invalid_argument when the reports cover different test
// sets or fewer than two reports are given.
std::string CompareReports(std::span<const EvalReport> reports);

}  // namespace fedistill

#endif  // FEDISTILL_CLI_H_
