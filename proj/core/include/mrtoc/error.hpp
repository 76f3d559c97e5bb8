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

#include <stdexcept>
#include <string>

namespace mrtoc {

/// A caller broke a documented precondition (bad shape, level out of range...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// NaN or Inf showed up during forward or backward evaluation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file (IDX, checkpoint, config).
class IngestionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No coding level fits the latency budget.
class InfeasibleRate : public std::runtime_error {
public:
    InfeasibleRate(const std::string& what, double min_tau)
        : std::runtime_error(what), min_tau_(min_tau) {}

    /// Smallest latency budget for which level 1 would be feasible.
    double min_tau() const noexcept { return min_tau_; }

private:
    double min_tau_;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, int level, int epoch)
        : std::runtime_error(what), level_(level), epoch_(epoch) {}
    int level() const noexcept { return level_; }
    int epoch() const noexcept { return epoch_; }

private:
    int level_;
    int epoch_;
};

#define MRTOC_EXPECT(cond, msg)                                  \
    do {                                                         \
        if (!(cond)) throw ::mrtoc::ContractViolation(msg);      \
    } while (0)

}  // namespace mrtoc
