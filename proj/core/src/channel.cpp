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

#include "mrtoc/channel.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "mrtoc/error.hpp"

namespace mrtoc {

bool is_power_of_two(std::uint64_t x) noexcept { return std::has_single_bit(x); }

int log2_exact(std::uint64_t x) {
    MRTOC_EXPECT(is_power_of_two(x), std::to_string(x) + " is not a power of two");
    return std::countr_zero(x);
}

SdmcChannel::SdmcChannel(std::size_t r_, double eps_) : r(r_), eps(eps_) {
    MRTOC_EXPECT(r >= 2, "SDMC needs at least 2 symbols, got r=" + std::to_string(r));
    MRTOC_EXPECT(eps >= 0.0 && eps <= 1.0, "SDMC error probability must lie in [0,1], got " + std::to_string(eps));
}

void RateContext::validate() const {
    MRTOC_EXPECT(v_bit > 0.0, "rate context: v_bit must be positive");
    MRTOC_EXPECT(tau > 0.0, "rate context: tau must be positive");
    MRTOC_EXPECT(m_subvectors > 0, "rate context: M must be positive");
    MRTOC_EXPECT(k_max >= 2 && is_power_of_two(k_max), "rate context: k_max must be a power of two >= 2");
    MRTOC_EXPECT(p_e >= 0.0 && p_e <= 1.0, "rate context: p_e must lie in [0,1]");
}

std::vector<double> transition_matrix(std::size_t r, double eps) {
    const SdmcChannel ch(r, eps);
    const double off = eps / static_cast<double>(r - 1);
    std::vector<double> p(r * r, off);
    for (std::size_t i = 0; i < r; ++i) p[i * r + i] = 1.0 - eps;
    return p;
}

ChannelNoise ChannelNoise::draw(std::size_t n, Rng& rng) {
    ChannelNoise noise;
    noise.u.resize(n);
    noise.v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        noise.u[i] = rng.uniform();
        noise.v[i] = rng.uniform();
    }
    return noise;
}

std::vector<std::size_t> transmit(std::span<const std::size_t> indices, const SdmcChannel& ch,
                                  const ChannelNoise& noise) {
    MRTOC_EXPECT(noise.size() >= indices.size(), "transmit: not enough noise draws");
    std::vector<std::size_t> out(indices.size());
    const std::size_t others = ch.r - 1;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t s = indices[i];
        if (s >= ch.r)
            throw ContractViolation("transmit: symbol " + std::to_string(s) + " outside alphabet of size " +
                                    std::to_string(ch.r));
        if (noise.u[i] < ch.eps) {
            auto k = static_cast<std::size_t>(noise.v[i] * static_cast<double>(others));
            if (k >= others) k = others - 1;
            out[i] = k < s ? k : k + 1;
        } else {
            out[i] = s;
        }
    }
    return out;
}

std::vector<std::size_t> transmit(std::span<const std::size_t> indices, const SdmcChannel& ch, Rng& rng) {
    return transmit(indices, ch, ChannelNoise::draw(indices.size(), rng));
}

double eps_from_ber(double p_e, std::uint64_t k_t) {
    MRTOC_EXPECT(p_e >= 0.0 && p_e <= 1.0, "eps_from_ber: p_e must lie in [0,1]");
    MRTOC_EXPECT(k_t >= 2 && is_power_of_two(k_t),
                 "eps_from_ber: codebook size " + std::to_string(k_t) + " is not a power of two >= 2");
    return 1.0 - std::pow(1.0 - p_e, static_cast<double>(log2_exact(k_t)));
}

double codebook_size_from_rate(const RateContext& ctx) {
    ctx.validate();
    MRTOC_EXPECT(ctx.m_subvectors > 1, "codebook_size_from_rate: M must exceed 1 (log2 M <= 0)");
    return ctx.v_bit * ctx.tau / std::log2(static_cast<double>(ctx.m_subvectors));
}

int select_level(const RateContext& ctx) {
    ctx.validate();
    const int max_level = log2_exact(ctx.k_max);
    const double m = static_cast<double>(ctx.m_subvectors);
    int best = 0;
    for (int l = 1; l <= max_level; ++l)
        if (m * l / ctx.v_bit <= ctx.tau) best = l;
    if (best == 0) {
        const double need = m / ctx.v_bit;
        throw InfeasibleRate("no coding level fits tau=" + std::to_string(ctx.tau) +
                                 " s; level 1 needs " + std::to_string(need) + " s",
                             need);
    }
    return best;
}

}  // namespace mrtoc
