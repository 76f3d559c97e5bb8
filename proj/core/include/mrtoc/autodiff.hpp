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

/** \file autodiff.hpp
 *  \brief Define-by-run reverse-mode differentiation over dense tensors.
 *
 * A Graph is built fresh for every batch. Each operation evaluates eagerly
 * and appends a node; node ids are indices into the append order, so parents
 * always precede children and the order is already topological.
 *
 * Leaves are either constants or parameters. Only parameters get an entry in
 * the map returned by evaluate_with_gradients(). Nodes whose ancestry holds no
 * parameter, and every stop_gradient() output, are skipped on the backward
 * pass.
 *
 * Shape conventions: rank-2 tensors are [rows, cols] with the batch on rows.
 * Rank-1 tensors of length n are treated as [1, n] where a matrix is needed.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mrtoc/tensor.hpp"

namespace mrtoc::ad {

using NodeId = std::size_t;

enum class OpKind {
    constant,
    parameter,
    matmul,
    add,
    sub,
    scale,
    relu,
    softmax,
    cross_entropy,
    squared_l2,
    slice,
    concat,
    reshape,
    gather_rows,
    stop_gradient,
    straight_through,
};

const char* op_name(OpKind kind) noexcept;

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    NodeId constant(Tensor value);
    NodeId parameter(Tensor value);

    /// [n,k] x [k,m] -> [n,m].
    NodeId matmul(NodeId a, NodeId b);
    /// Elementwise a + b. b may also be a length-cols row broadcast over a's rows.
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId scale(NodeId a, double factor);
    NodeId relu(NodeId a);
    /// Row-wise softmax (max-subtracted).
    NodeId softmax(NodeId a);
    /// Mean over rows of -log softmax(logits[row])[labels[row]]. Scalar.
    NodeId cross_entropy(NodeId logits, std::span<const int> labels);
    /// Sum of squares of every element. Scalar.
    NodeId squared_l2(NodeId a);
    /// Rows [begin, end) when axis == 0, columns when axis == 1.
    NodeId slice(NodeId a, int axis, std::size_t begin, std::size_t end);
    /// Concatenate along axis 0 (rows) or 1 (columns).
    NodeId concat(std::span<const NodeId> parts, int axis);
    NodeId reshape(NodeId a, std::vector<std::size_t> shape);
    /// out[i] = table[indices[i]]; table is [K, D], output is [indices.size(), D].
    NodeId gather_rows(NodeId table, std::span<const std::size_t> indices);
    /// Identity forward, zero gradient backward.
    NodeId stop_gradient(NodeId a);
    /// Forward value is `quantized` bit-exactly; backward passes gradients
    /// to `input` unchanged. Same as input + stop_gradient(quantized - input)
    /// without the rounding of the add/sub pair.
    NodeId straight_through(NodeId input, Tensor quantized);

    const Tensor& value(NodeId id) const;
    OpKind kind(NodeId id) const;
    std::span<const NodeId> parents(NodeId id) const;
    bool requires_grad(NodeId id) const;
    bool is_parameter(NodeId id) const;
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    friend std::map<NodeId, Tensor> evaluate_with_gradients(const Graph&, NodeId);

    // Accumulates d(loss)/d(parent) into grads[parent] given d(loss)/d(self).
    using Backward = std::function<void(const Graph&, NodeId self, const Tensor& grad_out,
                                        std::vector<Tensor>& grads)>;

    struct Node {
        OpKind kind;
        std::vector<NodeId> parents;
        Tensor value;
        bool requires_grad = false;
        Backward backward;
    };

    NodeId push(OpKind kind, std::vector<NodeId> parents, Tensor value, Backward backward);
    const Node& node(NodeId id) const;

    std::vector<Node> nodes_;
};

/// Reverse pass from a scalar node. Returns d(loss)/d(param) for every
/// parameter node (zero tensors for parameters the loss does not reach).
std::map<NodeId, Tensor> evaluate_with_gradients(const Graph& graph, NodeId loss);

}  // namespace mrtoc::ad
