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
#include <functional>
#include <numbers>

#include "mrtoc/autodiff.hpp"
#include "mrtoc/error.hpp"
#include "mrtoc/rng.hpp"
#include "support/oracles.hpp"
#include "support/primitive_checks.hpp"

using namespace mrtoc;
using mrtoc::ad::Graph;
using mrtoc::ad::NodeId;
using mrtoc::testing::central_difference;
using mrtoc::testing::gradient_close;

namespace {

using mrtoc::testing::random_tensor;

}  // namespace

TEST_CASE("linear function gradient") {
    Graph g;
    const auto w = g.parameter(Tensor::matrix(1, 1, {3.0}));
    const auto x = g.parameter(Tensor::matrix(1, 1, {2.0}));
    const auto loss = g.matmul(w, x);
    CHECK(g.value(loss).item() == 6.0);
    const auto grads = ad::evaluate_with_gradients(g, loss);
    CHECK(grads.at(w).item() == 2.0);
    CHECK(grads.at(x).item() == 3.0);
}

TEST_CASE("relu gates the gradient") {
    Graph g;
    const auto x = g.parameter(Tensor::matrix(1, 2, {-1.0, 2.0}));
    const auto ones = g.constant(Tensor::matrix(2, 1, {1.0, 1.0}));
    const auto loss = g.matmul(g.relu(x), ones);
    CHECK(g.value(loss).item() == 2.0);
    const auto grads = ad::evaluate_with_gradients(g, loss);
    CHECK(grads.at(x)[0] == 0.0);
    CHECK(grads.at(x)[1] == 1.0);
}

TEST_CASE("constants get no gradient entry") {
    Graph g;
    const auto c = g.constant(Tensor::matrix(1, 1, {2.0}));
    const auto p = g.parameter(Tensor::matrix(1, 1, {5.0}));
    const auto grads = ad::evaluate_with_gradients(g, g.matmul(c, p));
    CHECK(grads.size() == 1);
    CHECK(grads.count(c) == 0);
}

TEST_CASE("two-layer MLP matches central differences") {
    Rng rng(11);
    std::vector<Tensor> params{random_tensor({6, 5}, rng), random_tensor({5}, rng), random_tensor({5, 3}, rng),
                               random_tensor({3}, rng)};
    const auto x = random_tensor({4, 6}, rng);
    const std::vector<int> labels{0, 2, 1, 2};

    auto build = [&](Graph& g, const std::vector<NodeId>& p) {
        auto h = g.relu(g.add(g.matmul(g.constant(x), p[0]), p[1]));
        return g.cross_entropy(g.add(g.matmul(h, p[2]), p[3]), labels);
    };
    Graph g;
    std::vector<NodeId> ids;
    for (const auto& t : params) ids.push_back(g.parameter(t));
    const auto grads = ad::evaluate_with_gradients(g, build(g, ids));

    auto f = [&] {
        Graph h;
        std::vector<NodeId> c;
        for (const auto& t : params) c.push_back(h.constant(t));
        return h.value(build(h, c)).item();
    };
    for (std::size_t k = 0; k < params.size(); ++k)
        for (std::size_t i = 0; i < params[k].size(); ++i)
            CHECK(gradient_close(grads.at(ids[k])[i], central_difference(f, params[k][i])));
}

TEST_CASE("stop_gradient") {
    SUBCASE("squared input has zero gradient") {
        Graph g;
        const auto x = g.parameter(Tensor::scalar(3.0));
        const auto loss = g.squared_l2(g.stop_gradient(x));
        CHECK(g.value(loss).item() == 9.0);
        CHECK(ad::evaluate_with_gradients(g, loss).at(x).item() == 0.0);
    }
    SUBCASE("only the live factor contributes") {
        Graph g;
        const auto x = g.parameter(Tensor::matrix(1, 1, {3.0}));
        const auto loss = g.matmul(x, g.stop_gradient(x));
        CHECK(g.value(loss).item() == 9.0);
        CHECK(ad::evaluate_with_gradients(g, loss).at(x).item() == 3.0);
    }
    SUBCASE("idempotent") {
        Graph g;
        const auto x = g.parameter(Tensor::matrix(1, 3, {1.5, -2.0, 0.25}));
        const auto once = g.stop_gradient(x);
        const auto twice = g.stop_gradient(g.stop_gradient(x));
        CHECK(g.value(once) == g.value(twice));
        CHECK(g.value(once) == g.value(x));
        const auto loss = g.add(g.squared_l2(once), g.squared_l2(twice));
        const auto grads = ad::evaluate_with_gradients(g, loss);
        for (double v : grads.at(x).values()) CHECK(v == 0.0);
    }
}

TEST_CASE("primitive forward values") {
    Graph g;
    const auto s = g.softmax(g.constant(Tensor::vector({0.0, 0.0})));
    CHECK(g.value(s)[0] == doctest::Approx(0.5));
    CHECK(g.value(s)[1] == doctest::Approx(0.5));

    const std::vector<int> label{0};
    const auto ce = g.cross_entropy(g.constant(Tensor::matrix(1, 2, {0.0, 0.0})), label);
    CHECK(g.value(ce).item() == doctest::Approx(std::numbers::ln2).epsilon(1e-12));

    const auto d = g.sub(g.constant(Tensor::vector({1.0, 0.0})), g.constant(Tensor::vector({0.0, 0.0})));
    CHECK(g.value(g.squared_l2(d)).item() == 1.0);

    const auto big = g.softmax(g.constant(Tensor::vector({1000.0, 1000.0})));
    CHECK(g.value(big)[0] == doctest::Approx(0.5));
}

TEST_CASE("every primitive matches central differences on random small tensors") {
    const auto checks = mrtoc::testing::check_all_primitives(6);
    CHECK(checks.size() == 15);
    for (const auto& c : checks) {
        CAPTURE(c.name);
        CAPTURE(c.report.worst_rel);
        CHECK(c.report.checked > 0);
        CHECK(c.report.failures == 0);
    }
}

TEST_CASE("forward evaluation is bit-reproducible") {
    Rng rng(5);
    const auto a = random_tensor({7, 8}, rng);
    const auto b = random_tensor({8, 3}, rng);
    auto run = [&] {
        Graph g;
        return g.value(g.softmax(g.relu(g.matmul(g.constant(a), g.constant(b)))));
    };
    CHECK(run() == run());
}

TEST_CASE("contract and numeric errors") {
    Graph g;
    const auto a = g.parameter(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    const auto b = g.parameter(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));

    SUBCASE("shape mismatch names both shapes") {
        try {
            g.matmul(a, b);
            FAIL("expected ContractViolation");
        } catch (const ContractViolation& e) {
            const std::string msg = e.what();
            CHECK(msg.find("[2,3]") != std::string::npos);
        }
        CHECK_THROWS_AS(g.add(a, g.constant(Tensor::vector({1.0, 2.0}))), ContractViolation);
    }
    SUBCASE("non-scalar loss") { CHECK_THROWS_AS(ad::evaluate_with_gradients(g, a), ContractViolation); }
    SUBCASE("non-finite forward value") {
        CHECK_THROWS_AS(g.constant(Tensor::scalar(std::nan(""))), NumericError);
    }
    SUBCASE("overflowing backward names the node") {
        const auto table = g.parameter(Tensor::matrix(1, 1, {1e-10}));
        const std::vector<std::size_t> idx{0, 0, 0, 0};
        const auto big = g.scale(g.gather_rows(table, idx), 1e308);
        const auto loss = g.matmul(g.reshape(big, {1, 4}), g.constant(Tensor::matrix(4, 1, {1, 1, 1, 1})));
        try {
            ad::evaluate_with_gradients(g, loss);
            FAIL("expected NumericError");
        } catch (const NumericError& e) {
            CHECK(std::string(e.what()).find("gather_rows") != std::string::npos);
        }
    }
}
