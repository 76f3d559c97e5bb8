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

#include <filesystem>
#include <fstream>

#include "mrtoc/error.hpp"
#include "mrtoc/models.hpp"
#include "support/oracles.hpp"

using namespace mrtoc;
using mrtoc::testing::central_difference;
using mrtoc::testing::gradient_close;
using mrtoc::testing::mlp_forward;

namespace {

ModelShape desk_shape() {
    ModelShape s;
    s.input_dim = 8;
    s.m = 16;
    s.d = 2;
    s.k_max = 16;
    s.num_classes = 10;
    s.encoder_hidden = {12, 12};
    s.head_hidden = {12, 12};
    return s;
}

Tensor random_input(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t({rows, cols});
    for (auto& v : t.values()) v = rng.normal();
    return t;
}

// d(sum of outputs)/d(every weight) against central differences.
void check_network_gradients(Mlp& net, const Tensor& x) {
    ad::Graph g;
    const auto b = bind_parameters(g, net);
    const auto out = forward(g, b, g.constant(x));
    const auto n = g.value(out).size();
    const auto loss = g.matmul(g.reshape(out, {1, n}), g.constant(Tensor::matrix(n, 1, std::vector<double>(n, 1.0))));
    const auto grads = ad::evaluate_with_gradients(g, loss);

    const std::vector<double> xv(x.values().begin(), x.values().end());
    auto f = [&] {
        double s = 0.0;
        for (double v : mlp_forward(net, xv, x.rows())) s += v;
        return s;
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        for (std::size_t i = 0; i < net.layers[l].weight.size(); ++i)
            CHECK(gradient_close(grads.at(b.weights[l])[i], central_difference(f, net.layers[l].weight[i])));
        for (std::size_t i = 0; i < net.layers[l].bias.size(); ++i)
            CHECK(gradient_close(grads.at(b.biases[l])[i], central_difference(f, net.layers[l].bias[i])));
    }
}

}  // namespace

TEST_CASE("encode") {
    const auto shape = desk_shape();
    SUBCASE("zero parameters give zero output") {
        const std::vector<std::size_t> dims{8, 12, 32};
        const EncoderParams enc{Mlp::zeros(dims), 16, 2};
        const auto z = encode(random_input(1, 8, 1).reshaped({8}), enc);
        CHECK(z.size() == 32);
        for (double v : z.values()) CHECK(v == 0.0);
    }
    SUBCASE("output width is M*D") {
        Rng rng(1);
        const auto model = ModelArtifacts::init(shape, rng);
        CHECK(encode(random_input(1, 8, 2).reshaped({8}), model.encoder).shape() == std::vector<std::size_t>{32});
        CHECK(encode(random_input(5, 8, 2), model.encoder).shape() == std::vector<std::size_t>{5, 32});
    }
    SUBCASE("dimension mismatch rejected") {
        Rng rng(1);
        const auto model = ModelArtifacts::init(shape, rng);
        CHECK_THROWS_AS(encode(random_input(1, 7, 2), model.encoder), ContractViolation);
    }
    SUBCASE("matches the plain-loop forward and is deterministic") {
        Rng rng(3);
        const auto model = ModelArtifacts::init(shape, rng);
        const auto x = random_input(4, 8, 4);
        const auto z = encode(x, model.encoder);
        const auto ref = mlp_forward(model.encoder.net, std::vector<double>(x.values().begin(), x.values().end()), 4);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(z[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        CHECK(encode(x, model.encoder) == z);
    }
    SUBCASE("gradients match finite differences") {
        Rng rng(5);
        auto model = ModelArtifacts::init(desk_shape(), rng);
        check_network_gradients(model.encoder.net, random_input(3, 8, 6));
    }
}

TEST_CASE("infer") {
    SUBCASE("zero parameters give a uniform softmax") {
        const std::vector<std::size_t> dims{32, 12, 10};
        const InferenceParams head{Mlp::zeros(dims)};
        const auto logits = infer(random_input(1, 32, 7).reshaped({32}), head);
        CHECK(logits.size() == 10);
        ad::Graph g;
        const auto p = g.value(g.softmax(g.constant(logits)));
        for (double v : p.values()) CHECK(v == doctest::Approx(0.1));
    }
    SUBCASE("logits have one entry per class") {
        Rng rng(8);
        const auto model = ModelArtifacts::init(desk_shape(), rng);
        CHECK(model.head.num_classes() == 10);
        CHECK(infer(random_input(2, 32, 9), model.head).shape() == std::vector<std::size_t>{2, 10});
        CHECK_THROWS_AS(infer(random_input(2, 31, 9), model.head), ContractViolation);
    }
    SUBCASE("gradients match finite differences") {
        Rng rng(10);
        auto model = ModelArtifacts::init(desk_shape(), rng);
        check_network_gradients(model.head.net, random_input(3, 32, 11));
    }
}

TEST_CASE("init is seeded, biases start at zero") {
    Rng a(21), b(21);
    const auto m1 = ModelArtifacts::init(desk_shape(), a);
    const auto m2 = ModelArtifacts::init(desk_shape(), b);
    CHECK(m1.encoder.net.layers[0].weight == m2.encoder.net.layers[0].weight);
    for (const auto& l : m1.head.net.layers)
        for (double v : l.bias.values()) CHECK(v == 0.0);
    const double limit = 1.0 / std::sqrt(8.0);
    for (double v : m1.encoder.net.layers[0].weight.values()) CHECK(std::abs(v) <= limit);
}

TEST_CASE("checkpoint round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "mrtoc_test_models";
    std::filesystem::create_directories(dir);
    Rng rng(30);
    auto model = ModelArtifacts::init(desk_shape(), rng);
    model.codebook.extend_level(1, rng);
    model.codebook.mark_trained(1);
    model.codebook.extend_level(2, rng);
    const nlohmann::json cfg{{"seed", 30}, {"note", "round trip"}};

    const auto path = dir / "model.ckpt";
    save_checkpoint(path, model, cfg);
    {
        std::ifstream is(path);
        std::string header;
        std::getline(is, header);
        CHECK(header == "MRTOC-CKPT-1");
    }
    const auto loaded = load_checkpoint(path);
    CHECK(loaded.config == cfg);
    CHECK(loaded.model.codebook.codewords() == model.codebook.codewords());
    CHECK(loaded.model.codebook.trained_levels() == 1);
    CHECK(loaded.model.codebook.extended_levels() == 2);
    for (std::size_t l = 0; l < model.encoder.net.layers.size(); ++l)
        CHECK(loaded.model.encoder.net.layers[l].weight == model.encoder.net.layers[l].weight);
    for (std::size_t l = 0; l < model.head.net.layers.size(); ++l)
        CHECK(loaded.model.head.net.layers[l].bias == model.head.net.layers[l].bias);

    SUBCASE("saving twice gives identical bytes") {
        save_checkpoint(dir / "again.ckpt", loaded.model, loaded.config);
        std::ifstream a(path, std::ios::binary), b(dir / "again.ckpt", std::ios::binary);
        const std::string sa((std::istreambuf_iterator<char>(a)), {});
        const std::string sb((std::istreambuf_iterator<char>(b)), {});
        CHECK(sa == sb);
    }
    SUBCASE("wrong header") {
        std::ofstream(dir / "bad.ckpt") << "MRTOC-CKPT-0\n{}\n";
        CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), IngestionError);
    }
    SUBCASE("truncated body") {
        std::ofstream(dir / "trunc.ckpt") << "MRTOC-CKPT-1\n{\"encoder\": {";
        CHECK_THROWS_AS(load_checkpoint(dir / "trunc.ckpt"), IngestionError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint(dir / "nope.ckpt"), IngestionError); }
}
