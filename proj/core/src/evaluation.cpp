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

#include "mrtoc/evaluation.hpp"

#include <bit>
#include <cmath>
#include <ostream>

#include "mrtoc/channel.hpp"
#include "mrtoc/error.hpp"
#include "mrtoc/rng.hpp"

namespace mrtoc {

EvalOutcome evaluate(const ModelArtifacts& model, int level, double eps_test, const Dataset& test, int trials,
                     std::uint64_t seed) {
    MRTOC_EXPECT(trials >= 1, "evaluate: trials must be >= 1");
    if (level < 1 || level > model.codebook.trained_levels())
        throw ContractViolation("evaluate: level " + std::to_string(level) + " is not trained (trained levels: " +
                                std::to_string(model.codebook.trained_levels()) + ")");
    test.validate();
    const SdmcChannel ch(std::size_t{1} << level, eps_test);

    const auto z_e = encode(test.features, model.encoder);
    const auto q = model.codebook.quantize(z_e.values(), level);
    const Rng root(seed);
    std::size_t correct = 0;
    for (int t = 0; t < trials; ++t) {
        auto rng = root.split(static_cast<std::uint64_t>(t));
        const auto received = transmit(q.indices, ch, rng);
        const auto z_d = model.codebook.lookup(received, level).reshaped(z_e.shape());
        const auto pred = predict(infer(z_d, model.head));
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == test.labels[i];
    }
    EvalOutcome out;
    out.n = static_cast<std::size_t>(trials) * test.size();
    out.accuracy = static_cast<double>(correct) / static_cast<double>(out.n);
    out.std_error = std::sqrt(out.accuracy * (1.0 - out.accuracy) / static_cast<double>(out.n));
    return out;
}

namespace {

// Keyed by (level, eps) so a cell's noise does not depend on its position in the grid.
std::uint64_t cell_seed(std::uint64_t seed, int level, double eps) {
    return Rng(seed).split(static_cast<std::uint64_t>(level)).split(std::bit_cast<std::uint64_t>(eps)).next_u64();
}

SweepRow make_row(const ModelArtifacts& model, int level, double eps, std::optional<double> p_e, const Dataset& test,
                  const SweepConfig& config) {
    const auto r = evaluate(model, level, eps, test, config.trials, cell_seed(config.seed, level, eps));
    return SweepRow{level, model.encoder.m * static_cast<std::size_t>(level), eps, p_e, r.accuracy, r.std_error, r.n,
                    config.seed};
}

}  // namespace

SweepResult sweep_levels_eps(const ModelArtifacts& model, std::span<const int> levels,
                             std::span<const double> eps_list, const Dataset& test, const SweepConfig& config) {
    for (int l : levels)
        MRTOC_EXPECT(l >= 1 && l <= model.codebook.trained_levels(), "sweep: level " + std::to_string(l) + " not trained");
    SweepResult out;
    for (int l : levels)
        for (double eps : eps_list) out.rows.push_back(make_row(model, l, eps, std::nullopt, test, config));
    return out;
}

SweepResult sweep_ber(const ModelArtifacts& model, std::span<const int> levels, std::span<const double> p_e_list,
                      const Dataset& test, const SweepConfig& config) {
    for (int l : levels)
        MRTOC_EXPECT(l >= 1 && l <= model.codebook.trained_levels(), "sweep: level " + std::to_string(l) + " not trained");
    SweepResult out;
    for (int l : levels)
        for (double p_e : p_e_list) {
            const double eps = eps_from_ber(p_e, std::uint64_t{1} << l);
            out.rows.push_back(make_row(model, l, eps, p_e, test, config));
        }
    return out;
}

void write_sweep_csv(std::ostream& os, const SweepResult& result, const std::string& comment) {
    if (!comment.empty()) os << "# " << comment << '\n';
    os << "level,bits,eps_test,p_e,accuracy,stderr,n,seed\n";
    os.precision(17);
    for (const auto& r : result.rows) {
        os << r.level << ',' << r.bits << ',' << r.eps_test << ',';
        if (r.p_e) os << *r.p_e;
        os << ',' << r.accuracy << ',' << r.std_error << ',' << r.n << ',' << r.seed << '\n';
    }
}

}  // namespace mrtoc
