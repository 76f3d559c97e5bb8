// Copyright 2026 The mrtoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/** \file cli.hpp
 *  \brief Entry point of the mrtoc command-line tool.
 *
 * Subcommands: train, eval, sweep, select-level, dump-codebook, gen-data.
 * Exit codes: 0 success, 1 configuration error, 2 runtime error.
 */

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mrtoc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

/// args[0] is the program name. Reads MRTOC_SEED from the environment.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mrtoc::cli
