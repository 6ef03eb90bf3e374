/*
 * Copyright 2026 The pedseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

namespace pedseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitCheck = 3;

/// Parses argv (argv[0] is the program name) and runs one subcommand.
/// Reports and tables go to `out`; structured errors, one JSON object per
/// line, go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// FNV-1a 64 of a file's bytes as 16 hex digits. Manifests record one per
/// output so replays can be compared.
std::string file_digest(const std::filesystem::path& path);

}  // namespace pedseg::cli
