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

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrtoc/data.hpp"
#include "mrtoc/models.hpp"

namespace mrtoc {

struct EvalOutcome {
    double accuracy = 0.0;
    double std_error = 0.0;  ///< binomial sqrt(p(1-p)/n)
    std::size_t n = 0;       ///< trials * test-set size
};

/// Mean accuracy of encode -> quantize(level) -> SDMC(eps_test) -> lookup ->
/// infer over `trials` independent channel realizations. Pure given seed.
EvalOutcome evaluate(const ModelArtifacts& model, int level, double eps_test, const Dataset& test, int trials,
                     std::uint64_t seed);

struct SweepRow {
    int level = 0;
    std::size_t bits = 0;  ///< M * level
    double eps_test = 0.0;
    std::optional<double> p_e;
    double accuracy = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

struct SweepConfig {
    int trials = 10;
    std::uint64_t seed = 1;
};

/// One row per (level, eps), levels outermost.
SweepResult sweep_levels_eps(const ModelArtifacts& model, std::span<const int> levels,
                             std::span<const double> eps_list, const Dataset& test, const SweepConfig& config);

/// One row per (level, p_e) with eps_test = eps_from_ber(p_e, 2^level).
SweepResult sweep_ber(const ModelArtifacts& model, std::span<const int> levels, std::span<const double> p_e_list,
                      const Dataset& test, const SweepConfig& config);

/// CSV `level,bits,eps_test,p_e,accuracy,stderr,n,seed`; p_e is blank in eps mode.
void write_sweep_csv(std::ostream& os, const SweepResult& result, const std::string& comment = {});

}  // namespace mrtoc
