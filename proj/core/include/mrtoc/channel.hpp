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
#include <span>
#include <vector>

#include "mrtoc/rng.hpp"

namespace mrtoc {

/// Symmetric discrete memoryless channel over r symbols: a symbol survives
/// with probability 1 - eps, otherwise it becomes one of the other r - 1
/// symbols uniformly at random.
struct SdmcChannel {
    std::size_t r = 2;
    double eps = 0.0;

    SdmcChannel() = default;
    SdmcChannel(std::size_t r, double eps);
};

struct RateContext {
    double v_bit = 0.0;          ///< affordable rate, bit/s
    double tau = 0.0;            ///< latency budget, s
    std::size_t m_subvectors = 0;
    std::size_t k_max = 0;
    double p_e = 0.0;            ///< bit error rate

    void validate() const;
};

/// Row-major r*r matrix: 1 - eps on the diagonal, eps / (r - 1) elsewhere.
std::vector<double> transition_matrix(std::size_t r, double eps);

/// Per-symbol noise draws. With u < eps the symbol is corrupted and v picks
/// the replacement among the other r - 1 symbols. Drawing these up front lets
/// several channels of different r share one noise realization.
struct ChannelNoise {
    std::vector<double> u;
    std::vector<double> v;

    static ChannelNoise draw(std::size_t n, Rng& rng);
    std::size_t size() const noexcept { return u.size(); }
};

/// Sends every index through the channel using pre-drawn noise.
std::vector<std::size_t> transmit(std::span<const std::size_t> indices, const SdmcChannel& ch,
                                  const ChannelNoise& noise);

/// Sends every index through the channel, drawing noise from rng.
std::vector<std::size_t> transmit(std::span<const std::size_t> indices, const SdmcChannel& ch, Rng& rng);

/// eps = 1 - (1 - p_e)^log2(k_t). k_t must be a power of two >= 2.
double eps_from_ber(double p_e, std::uint64_t k_t);

/// K_t = V_bit * tau / log2(M), evaluated as written. Reference helper only:
/// operational level choices go through select_level().
double codebook_size_from_rate(const RateContext& ctx);

/// Largest l in 1..log2(k_max) with M * l / V_bit <= tau.
/// Throws InfeasibleRate (carrying M / V_bit) when even l = 1 misses.
int select_level(const RateContext& ctx);

bool is_power_of_two(std::uint64_t x) noexcept;
int log2_exact(std::uint64_t x);

}  // namespace mrtoc
