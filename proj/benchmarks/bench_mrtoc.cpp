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

#include <benchmark/benchmark.h>

#include "mrtoc/autodiff.hpp"
#include "mrtoc/channel.hpp"
#include "mrtoc/codebook.hpp"
#include "mrtoc/training.hpp"

using namespace mrtoc;

namespace {

NestedCodebook filled_codebook(std::size_t dim, std::size_t k_max) {
    NestedCodebook cb(dim, k_max);
    Rng rng(1);
    for (int l = 1; l <= cb.max_level(); ++l) {
        cb.extend_level(l, rng);
        cb.mark_trained(l);
    }
    return cb;
}

void BM_Quantize(benchmark::State& state) {
    const auto level = static_cast<int>(state.range(0));
    const auto cb = filled_codebook(2, 256);
    Rng rng(2);
    std::vector<double> z(500 * 2);
    for (auto& v : z) v = rng.normal();
    for (auto _ : state) benchmark::DoNotOptimize(cb.quantize(z, level));
    state.SetItemsProcessed(state.iterations() * 500);
}
BENCHMARK(BM_Quantize)->Arg(1)->Arg(4)->Arg(8);

void BM_Transmit(benchmark::State& state) {
    const SdmcChannel ch(static_cast<std::size_t>(state.range(0)), 0.05);
    Rng rng(3);
    std::vector<std::size_t> idx(500);
    for (auto& i : idx) i = rng.below(ch.r);
    for (auto _ : state) benchmark::DoNotOptimize(transmit(idx, ch, rng));
    state.SetItemsProcessed(state.iterations() * 500);
}
BENCHMARK(BM_Transmit)->Arg(2)->Arg(256);

void BM_MatmulForwardBackward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(4);
    Tensor a({64, n}), b({n, n});
    for (auto& v : a.values()) v = rng.normal();
    for (auto& v : b.values()) v = rng.normal();
    for (auto _ : state) {
        ad::Graph g;
        const auto pa = g.parameter(a);
        const auto pb = g.parameter(b);
        const auto loss = g.squared_l2(g.matmul(pa, pb));
        benchmark::DoNotOptimize(ad::evaluate_with_gradients(g, loss));
    }
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(32)->Arg(128);

void BM_TrainStep(benchmark::State& state) {
    const int level = static_cast<int>(state.range(0));
    ModelShape shape;
    shape.input_dim = 8;
    shape.num_classes = 10;
    Rng rng(5);
    auto model = ModelArtifacts::init(shape, rng);
    for (int l = 1; l <= level; ++l) {
        model.codebook.extend_level(l, rng);
        if (l < level) model.codebook.mark_trained(l);
    }
    const StageSnapshot snap{level, level >= 2 ? model.codebook.prefix(std::size_t{1} << (level - 1)) : Tensor(), {}};
    const auto data = generate_blobs({10, 8, 7, 0.15}, 6);
    std::vector<std::size_t> rows(64);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    const auto batch = data.subset(rows);
    const TrainConfig cfg;
    Adam adam;
    Rng channel(7);
    for (auto _ : state) {
        ad::Graph g;
        const auto bound = bind_model(g, model);
        const auto terms = mr_loss(g, bound, model, batch, level, snap, cfg, channel);
        const auto grads = ad::evaluate_with_gradients(g, terms.total);
        optimizer_step(model, bound, grads, adam, level);
    }
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
