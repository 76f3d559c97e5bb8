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

#include <doctest.h>

#include <cmath>

#include "mrtoc/channel.hpp"
#include "mrtoc/error.hpp"
#include "support/stats.hpp"

using namespace mrtoc;

TEST_CASE("transition matrix") {
    SUBCASE("r=2, eps=0.1") {
        const auto p = transition_matrix(2, 0.1);
        CHECK(p == std::vector<double>{0.9, 0.1, 0.1, 0.9});
    }
    SUBCASE("r=4, eps=0.3") {
        const auto p = transition_matrix(4, 0.3);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) CHECK(p[i * 4 + j] == doctest::Approx(i == j ? 0.7 : 0.1));
    }
    SUBCASE("eps=0 is the identity") {
        for (std::size_t r : {2u, 5u, 64u}) {
            const auto p = transition_matrix(r, 0.0);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < r; ++j) CHECK(p[i * r + j] == (i == j ? 1.0 : 0.0));
        }
    }
    SUBCASE("rows sum to one") {
        for (std::size_t r = 2; r <= 1024; r = r < 16 ? r + 1 : r * 2 + 1)
            for (double eps : {0.0, 0.001, 0.01, 0.05, 0.1, 0.5, 1.0}) {
                const auto p = transition_matrix(r, eps);
                for (std::size_t i = 0; i < r; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < r; ++j) s += p[i * r + j];
                    CHECK(std::abs(s - 1.0) <= 1e-12);
                }
            }
    }
    SUBCASE("r < 2 rejected") { CHECK_THROWS_AS(transition_matrix(1, 0.1), ContractViolation); }
}

TEST_CASE("transmit") {
    const std::vector<std::size_t> in{0, 1, 1, 0, 1, 0, 0, 1};
    SUBCASE("eps=0 is the identity") {
        Rng rng(1);
        CHECK(transmit(in, SdmcChannel(2, 0.0), rng) == in);
    }
    SUBCASE("eps=1, r=2 flips every symbol") {
        Rng rng(1);
        const auto out = transmit(in, SdmcChannel(2, 1.0), rng);
        for (std::size_t i = 0; i < in.size(); ++i) CHECK(out[i] == 1 - in[i]);
    }
    SUBCASE("eps=1 never delivers the sent symbol") {
        Rng rng(2);
        std::vector<std::size_t> sym(2000);
        for (auto& s : sym) s = rng.below(7);
        const auto out = transmit(sym, SdmcChannel(7, 1.0), rng);
        for (std::size_t i = 0; i < sym.size(); ++i) {
            CHECK(out[i] != sym[i]);
            CHECK(out[i] < 7);
        }
    }
    SUBCASE("fixed seed reproduces bit-exactly") {
        Rng a(9), b(9);
        std::vector<std::size_t> sym(500, 3);
        CHECK(transmit(sym, SdmcChannel(16, 0.3), a) == transmit(sym, SdmcChannel(16, 0.3), b));
    }
    SUBCASE("out-of-alphabet symbol rejected") {
        Rng rng(1);
        const std::vector<std::size_t> bad{0, 2};
        CHECK_THROWS_AS(transmit(bad, SdmcChannel(2, 0.1), rng), ContractViolation);
    }
    SUBCASE("bad channel parameters rejected") {
        CHECK_THROWS_AS(SdmcChannel(2, 1.5), ContractViolation);
        CHECK_THROWS_AS(SdmcChannel(1, 0.1), ContractViolation);
    }
}

TEST_CASE("transmit statistics: eps=0.05, r=256, 1e5 symbols") {
    const auto st = mrtoc::testing::channel_statistics(256, 0.05, 100000, 42);
    CAPTURE(st.error_rate);
    CAPTURE(st.chi2);
    CHECK(st.sigma * 3.0 == doctest::Approx(0.0021).epsilon(0.05));
    CHECK(st.rate_ok);
    CHECK(st.uniform_ok);
}

TEST_CASE("eps_from_ber") {
    CHECK(eps_from_ber(0.0, 2) == 0.0);
    CHECK(eps_from_ber(0.0, 256) == 0.0);
    CHECK(eps_from_ber(0.01, 256) == doctest::Approx(0.077255).epsilon(1e-5));
    CHECK(std::abs(eps_from_ber(0.01, 256) - (1.0 - std::pow(0.99, 8))) < 1e-15);
    CHECK(eps_from_ber(1.0, 2) == 1.0);
    CHECK_THROWS_AS(eps_from_ber(0.01, 6), ContractViolation);
    CHECK_THROWS_AS(eps_from_ber(-0.1, 4), ContractViolation);

    SUBCASE("monotone in p_e and k_t") {
        double prev_k = 0.0;
        for (std::uint64_t k = 2; k <= 1024; k *= 2) {
            double prev_p = -1.0;
            for (double p = 0.0; p <= 1.0; p += 0.05) {
                const double e = eps_from_ber(p, k);
                CHECK(e >= prev_p);
                CHECK(e >= 0.0);
                CHECK(e <= 1.0);
                prev_p = e;
            }
            const double at = eps_from_ber(0.02, k);
            CHECK(at >= prev_k);
            prev_k = at;
        }
    }
}

TEST_CASE("codebook_size_from_rate evaluates the rate formula as written") {
    RateContext ctx{1000.0, 1.0, 256, 256, 0.0};
    CHECK(codebook_size_from_rate(ctx) == 125.0);
    ctx.tau = 2.0;
    CHECK(codebook_size_from_rate(ctx) == 250.0);
    ctx.v_bit = 0.0;
    CHECK_THROWS_AS(codebook_size_from_rate(ctx), ContractViolation);
    ctx = RateContext{1000.0, 1.0, 1, 256, 0.0};
    CHECK_THROWS_AS(codebook_size_from_rate(ctx), ContractViolation);
}

TEST_CASE("select_level") {
    SUBCASE("budget exactly met at l=4") {
        CHECK(select_level(RateContext{1000.0, 2.0, 500, 256, 0.0}) == 4);
    }
    SUBCASE("infeasible carries the minimal tau") {
        try {
            select_level(RateContext{100.0, 1.0, 500, 256, 0.0});
            FAIL("expected InfeasibleRate");
        } catch (const InfeasibleRate& e) {
            CHECK(e.min_tau() == doctest::Approx(5.0));
        }
    }
    SUBCASE("unbounded budget reaches log2 k_max") {
        CHECK(select_level(RateContext{1000.0, 1e12, 500, 256, 0.0}) == 8);
    }
    SUBCASE("monotone in tau and v_bit") {
        int prev = 0;
        for (double tau = 0.5; tau < 10.0; tau += 0.25) {
            const int l = select_level(RateContext{1000.0, tau, 500, 256, 0.0});
            CHECK(l >= prev);
            prev = l;
        }
        prev = 0;
        for (double v = 300.0; v < 5000.0; v += 100.0) {
            const int l = select_level(RateContext{v, 2.0, 300, 64, 0.0});
            CHECK(l >= prev);
            prev = l;
        }
    }
}

TEST_CASE("Rng") {
    Rng a(5), b(5);
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(Rng(5).split("x").next_u64() == Rng(5).split("x").next_u64());
    CHECK(Rng(5).split("x").next_u64() != Rng(5).split("y").next_u64());
    Rng c(6);
    for (int i = 0; i < 1000; ++i) {
        const double u = c.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(c.below(7) < 7);
    }
}
