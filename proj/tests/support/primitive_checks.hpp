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

// Finite-difference sweep over the differentiable autodiff primitives.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mrtoc/autodiff.hpp"
#include "mrtoc/rng.hpp"
#include "support/oracles.hpp"

namespace mrtoc::testing {

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = rng.normal();
    return t;
}

using OpBuilder = std::function<ad::NodeId(ad::Graph&, const std::vector<ad::NodeId>&)>;

struct PrimitiveCheck {
    std::string name;
    GradientCheckReport report;
};

namespace detail {

// op(inputs) reduced by a fixed random linear functional, so the upstream
// gradient into op is non-trivial.
inline double forward_loss(const std::vector<Tensor>& inputs, const OpBuilder& op, const Tensor& weights) {
    ad::Graph g;
    std::vector<ad::NodeId> ids;
    for (const auto& t : inputs) ids.push_back(g.constant(t));
    const auto out = op(g, ids);
    const auto& v = g.value(out);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * weights[i];
    return s;
}

}  // namespace detail

inline GradientCheckReport check_primitive(std::vector<Tensor> inputs, const OpBuilder& op, std::uint64_t seed) {
    Rng rng(seed);
    ad::Graph g;
    std::vector<ad::NodeId> ids;
    for (const auto& t : inputs) ids.push_back(g.parameter(t));
    const auto out = op(g, ids);
    const auto n = g.value(out).size();
    Tensor weights({n});
    for (auto& w : weights.values()) w = rng.normal();
    const auto flat = g.reshape(out, {1, n});
    const auto loss = g.matmul(flat, g.constant(weights.reshaped({n, 1})));
    const auto grads = ad::evaluate_with_gradients(g, loss);

    GradientCheckReport rep;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const auto& gk = grads.at(ids[k]);
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double numeric =
                central_difference([&] { return detail::forward_loss(inputs, op, weights); }, inputs[k][i]);
            ++rep.checked;
            const double scale = std::max(std::abs(gk[i]), std::abs(numeric));
            if (scale >= 1e-2) rep.worst_rel = std::max(rep.worst_rel, std::abs(gk[i] - numeric) / scale);
            if (!gradient_close(gk[i], numeric)) ++rep.failures;
        }
    }
    return rep;
}

/// Every differentiable primitive on `trials` random shapes. stop_gradient and
/// straight_through are not derivatives of their forward maps and have their
/// own checks.
inline std::vector<PrimitiveCheck> check_all_primitives(int trials, std::uint64_t seed = 2024) {
    using ad::Graph;
    using ad::NodeId;
    std::vector<PrimitiveCheck> out;
    auto record = [&out](const std::string& name, const GradientCheckReport& r) {
        for (auto& c : out)
            if (c.name == name) {
                c.report.checked += r.checked;
                c.report.failures += r.failures;
                c.report.worst_rel = std::max(c.report.worst_rel, r.worst_rel);
                return;
            }
        out.push_back({name, r});
    };

    Rng shape_rng(seed);
    for (int trial = 0; trial < trials; ++trial) {
        const std::size_t n = 1 + shape_rng.below(8), k = 1 + shape_rng.below(8), m = 1 + shape_rng.below(8);
        Rng rng(seed + 100 + static_cast<std::uint64_t>(trial));
        const auto a = random_tensor({n, k}, rng);
        const auto b = random_tensor({k, m}, rng);
        const auto c = random_tensor({n, k}, rng);
        const auto row = random_tensor({k}, rng);
        std::vector<int> labels(n);
        for (auto& l : labels) l = static_cast<int>(rng.below(k));
        std::vector<std::size_t> gather_idx(n + 2);
        for (auto& i : gather_idx) i = rng.below(n);
        const auto t = static_cast<std::uint64_t>(trial);

        record("matmul", check_primitive({a, b}, [](Graph& g, const auto& p) { return g.matmul(p[0], p[1]); }, t));
        record("add", check_primitive({a, c}, [](Graph& g, const auto& p) { return g.add(p[0], p[1]); }, t));
        record("add-broadcast",
               check_primitive({a, row}, [](Graph& g, const auto& p) { return g.add(p[0], p[1]); }, t));
        record("sub", check_primitive({a, c}, [](Graph& g, const auto& p) { return g.sub(p[0], p[1]); }, t));
        record("scale", check_primitive({a}, [](Graph& g, const auto& p) { return g.scale(p[0], -1.7); }, t));
        record("relu", check_primitive({a}, [](Graph& g, const auto& p) { return g.relu(p[0]); }, t));
        record("softmax", check_primitive({a}, [](Graph& g, const auto& p) { return g.softmax(p[0]); }, t));
        record("cross_entropy",
               check_primitive({a}, [&labels](Graph& g, const auto& p) { return g.cross_entropy(p[0], labels); }, t));
        record("squared_l2", check_primitive({a}, [](Graph& g, const auto& p) { return g.squared_l2(p[0]); }, t));
        record("slice-rows",
               check_primitive({a}, [n](Graph& g, const auto& p) { return g.slice(p[0], 0, n / 2, n); }, t));
        record("slice-cols",
               check_primitive({a}, [k](Graph& g, const auto& p) { return g.slice(p[0], 1, 0, (k + 1) / 2); }, t));
        record("concat-rows", check_primitive({a, c},
                                              [](Graph& g, const auto& p) {
                                                  return g.concat(std::vector<NodeId>{p[0], p[1]}, 0);
                                              },
                                              t));
        record("concat-cols", check_primitive({a, c},
                                              [](Graph& g, const auto& p) {
                                                  return g.concat(std::vector<NodeId>{p[1], p[0]}, 1);
                                              },
                                              t));
        record("reshape",
               check_primitive({a}, [n, k](Graph& g, const auto& p) { return g.reshape(p[0], {k * n}); }, t));
        record("gather_rows", check_primitive({a},
                                              [&gather_idx](Graph& g, const auto& p) {
                                                  return g.gather_rows(p[0], gather_idx);
                                              },
                                              t));
    }
    return out;
}

}  // namespace mrtoc::testing
