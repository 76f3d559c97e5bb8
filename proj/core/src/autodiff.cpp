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

#include "mrtoc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mrtoc/error.hpp"

namespace mrtoc::ad {

namespace {

// Rank-2 view dimensions; rank-1 is a single row.
struct Dims {
    std::size_t rows;
    std::size_t cols;
};

Dims dims_of(const Tensor& t) { return {t.rows(), t.cols()}; }

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                            shape_string(b.shape()));
}

// out[n,m] += a[n,k] * b[k,m]
void gemm_nn(const double* a, const double* b, double* out, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        double* orow = out + i * m;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
}

// out[n,k] += g[n,m] * b[k,m]^T
void gemm_nt(const double* g, const double* b, double* out, std::size_t n, std::size_t m, std::size_t k) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g + i * m;
        double* orow = out + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double* brow = b + p * m;
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
            orow[p] += acc;
        }
    }
}

// out[k,m] += a[n,k]^T * g[n,m]
void gemm_tn(const double* a, const double* g, double* out, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a + i * k;
        const double* grow = g + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* orow = out + p * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * grow[j];
        }
    }
}

Tensor& grad_slot(std::vector<Tensor>& grads, const Graph& g, NodeId id) {
    auto& slot = grads[id];
    if (slot.size() == 0) slot = Tensor::zeros_like(g.value(id));
    return slot;
}

void accumulate(std::vector<Tensor>& grads, const Graph& g, NodeId id, const Tensor& delta) {
    if (!g.requires_grad(id)) return;
    auto& slot = grad_slot(grads, g, id);
    auto dst = slot.values();
    auto src = delta.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

std::vector<double> log_softmax_row(const double* row, std::size_t n) {
    const double mx = *std::max_element(row, row + n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = row[j] - lse;
    return out;
}

}  // namespace

const char* op_name(OpKind kind) noexcept {
    switch (kind) {
        case OpKind::constant: return "constant";
        case OpKind::parameter: return "parameter";
        case OpKind::matmul: return "matmul";
        case OpKind::add: return "add";
        case OpKind::sub: return "sub";
        case OpKind::scale: return "scale";
        case OpKind::relu: return "relu";
        case OpKind::softmax: return "softmax";
        case OpKind::cross_entropy: return "cross_entropy";
        case OpKind::squared_l2: return "squared_l2";
        case OpKind::slice: return "slice";
        case OpKind::concat: return "concat";
        case OpKind::reshape: return "reshape";
        case OpKind::gather_rows: return "gather_rows";
        case OpKind::stop_gradient: return "stop_gradient";
        case OpKind::straight_through: return "straight_through";
    }
    return "unknown";
}

const Graph::Node& Graph::node(NodeId id) const {
    MRTOC_EXPECT(id < nodes_.size(), "node id " + std::to_string(id) + " not in graph");
    return nodes_[id];
}

const Tensor& Graph::value(NodeId id) const { return node(id).value; }
OpKind Graph::kind(NodeId id) const { return node(id).kind; }
std::span<const NodeId> Graph::parents(NodeId id) const { return node(id).parents; }
bool Graph::requires_grad(NodeId id) const { return node(id).requires_grad; }
bool Graph::is_parameter(NodeId id) const { return node(id).kind == OpKind::parameter; }

NodeId Graph::push(OpKind kind, std::vector<NodeId> parents, Tensor value, Backward backward) {
    for (auto p : parents) (void)node(p);
    if (!value.all_finite())
        throw NumericError(std::string("non-finite value produced by ") + op_name(kind) + " (node " +
                           std::to_string(nodes_.size()) + ")");
    bool rg = kind == OpKind::parameter;
    for (auto p : parents) rg = rg || nodes_[p].requires_grad;
    if (kind == OpKind::stop_gradient) rg = false;
    nodes_.push_back(Node{kind, std::move(parents), std::move(value), rg, std::move(backward)});
    return nodes_.size() - 1;
}

NodeId Graph::constant(Tensor value) { return push(OpKind::constant, {}, std::move(value), nullptr); }

NodeId Graph::parameter(Tensor value) { return push(OpKind::parameter, {}, std::move(value), nullptr); }

NodeId Graph::matmul(NodeId a, NodeId b) {
    const auto& av = value(a);
    const auto& bv = value(b);
    const auto [n, k] = dims_of(av);
    const auto [k2, m] = dims_of(bv);
    if (k != k2 || bv.rank() != 2) shape_error("matmul", av, bv);
    Tensor out({n, m});
    gemm_nn(av.data(), bv.data(), out.data(), n, k, m);
    return push(OpKind::matmul, {a, b}, std::move(out),
                [](const Graph& g, NodeId self, const Tensor& gout, std::vector<Tensor>& grads) {
                    const auto pa = g.parents(self)[0];
                    const auto pb = g.parents(self)[1];
                    const auto& A = g.value(pa);
                    const auto& B = g.value(pb);
                    const auto n = A.rows(), k = A.cols(), m = B.cols();
                    if (g.requires_grad(pa)) gemm_nt(gout.data(), B.data(), grad_slot(grads, g, pa).data(), n, m, k);
                    if (g.requires_grad(pb)) gemm_tn(A.data(), gout.data(), grad_slot(grads, g, pb).data(), n, k, m);
                });
}

NodeId Graph::add(NodeId a, NodeId b) {
    const auto& av = value(a);
    const auto& bv = value(b);
    Tensor out = av;
    if (av.same_shape(bv)) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
        return push(OpKind::add, {a, b}, std::move(out),
                    [](const Graph& g, NodeId self, const Tensor& gout, std::vector<Tensor>& grads) {
                        accumulate(grads, g, g.parents(self)[0], gout);
                        accumulate(grads, g, g.parents(self)[1], gout);
                    });
    }
    // Row broadcast: b is [cols] or [1, cols].
    const bool row = av.rank() == 2 && bv.size() == av.cols() && bv.rows() == 1;
    if (!row) shape_error("add", av, bv);
    const auto n = av.rows(), m = av.cols();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bv[j];
    return push(OpKind::add, {a, b}, std::move(out),
                [](const Graph& g, NodeId self, const Tensor& gout, std::vector<Tensor>& grads) {
                    const auto pa = g.parents(self)[0];
                    const auto pb = g.parents(self)[1];
                    accumulate(grads, g, pa, gout);
                    if (!g.requires_grad(pb)) return;
                    auto& gb = grad_slot(grads, g, pb);
                    const auto n = gout.rows(), m = gout.cols();
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < m; ++j) gb[j] += gout[i * m + j];
                });
}

NodeId Graph::sub(NodeId a, NodeId b) {
    const auto& av = value(a);
    const auto& bv = value(b);
    if (!av.same_shape(bv)) shape_error("sub", av, bv);
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return push(OpKind::sub, {a, b}, std::move(out),
                [](const Graph& g, NodeId self, const Tensor& gout, std::vector<Tensor>& grads) {
                    accumulate(grads, g, g.parents(self)[0], gout);
                    const auto pb = g.parents(self)[1];
                    if (!g.requires_grad(pb)) return;
                    auto& gb = grad_slot(grads, g, pb);
                    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= gout[i];
                });
}

NodeId Graph::scale(NodeId a, double factor) {
    Tensor out = value(a);
    for (auto& v : out.values()) v *= factor;
    return push(OpKind::scale, {a}, std::move(out),
                [factor](const Graph& g, NodeId self, const Tensor& gout, std::vector<Tensor>& grads) {
                    const auto pa = g.parents(self)[0];
                    if (!g.requires_grad(pa)) return;
                    auto& ga = grad_slot(grads, g, pa);
                    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * gout[i];
                });
}

NodeId Graph::relu(NodeId a) {
    Tensor out = value(a);
    for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
    return push(OpKind::relu, {a}, std::move(out),
                [](const Graph& g, NodeId self, const Tensor& gout, std::vector<Tensor>& grads) {
                    const auto pa = g.parents(self)[0];
                    if (!g.requires_grad(pa)) return;
                    const auto& x = g.value(pa);
                    auto& ga = grad_slot(grads, g, pa);
                    for (std::size_t i = 0; i < ga.size(); ++i)
                        if (x[i] > 0.0) ga[i] += gout[i];
                });
}

NodeId Graph::softmax(NodeId a) {
    const auto& x = value(a);
    const auto n = x.rows(), m = x.cols();
    Tensor out = x;
    for (std::size_t i = 0; i < n; ++i) {
        double* row = out.data() + i * m;
        const double mx = *std::max_element(row, row + m);
        double sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) sum += (row[j] = std::exp(row[j] - mx));
        for (std::size_t j = 0; j < m; ++j) row[j] /= sum;
    }
    return push(OpKind::softmax, {a}, std::move(out),
                [](const Graph& g, NodeId self, const Tensor& gout, std::vector<Tensor>& grads) {
                    const auto pa = g.parents(self)[0];
                    if (!g.requires_grad(pa)) return;
                    const auto& s = g.value(self);
                    auto& ga = grad_slot(grads, g, pa);
                    const auto n = s.rows(), m = s.cols();
                    for (std::size_t i = 0; i < n; ++i) {
                        double dot = 0.0;
                        for (std::size_t j = 0; j < m; ++j) dot += gout[i * m + j] * s[i * m + j];
                        for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += s[i * m + j] * (gout[i * m + j] - dot);
                    }
                });
}

NodeId Graph::cross_entropy(NodeId logits, std::span<const int> labels) {
    const auto& x = value(logits);
    const auto n = x.rows(), m = x.cols();
    if (labels.size() != n)
        throw ContractViolation("cross_entropy: " + std::to_string(labels.size()) + " labels for logits of shape " +
                                shape_string(x.shape()));
    std::vector<int> lab(labels.begin(), labels.end());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        MRTOC_EXPECT(lab[i] >= 0 && static_cast<std::size_t>(lab[i]) < m,
                     "cross_entropy: label " + std::to_string(lab[i]) + " out of range for " + std::to_string(m) +
                         " classes");
        total -= log_softmax_row(x.data() + i * m, m)[lab[i]];
    }
    return push(OpKind::cross_entropy, {logits}, Tensor::scalar(total / static_cast<double>(n)),
                [lab = std::move(lab)](const Graph& g, NodeId self, const Tensor& gout, std::vector<Tensor>& grads) {
                    const auto pa = g.parents(self)[0];
                    if (!g.requires_grad(pa)) return;
                    const auto& x = g.value(pa);
                    auto& ga = grad_slot(grads, g, pa);
                    const auto n = x.rows(), m = x.cols();
                    const double w = gout.item() / static_cast<double>(n);
                    for (std::size_t i = 0; i < n; ++i) {
                        const auto ls = log_softmax_row(x.data() + i * m, m);
                        for (std::size_t j = 0; j < m; ++j) {
                            const double p = std::exp(ls[j]);
                            ga[i * m + j] += w * (p - (static_cast<int>(j) == lab[i] ? 1.0 : 0.0));
                        }
                    }
                });
}

NodeId Graph::squared_l2(NodeId a) {
    const auto& x = value(a);
    double s = 0.0;
    for (double v : x.values()) s += v * v;
    return push(OpKind::squared_l2, {a}, Tensor::scalar(s),
                [](const Graph& g, NodeId self, const Tensor& gout, std::vector<Tensor>& grads) {
                    const auto pa = g.parents(self)[0];
                    if (!g.requires_grad(pa)) return;
                    const auto& x = g.value(pa);
                    auto& ga = grad_slot(grads, g, pa);
                    const double w = 2.0 * gout.item();
                    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += w * x[i];
                });
}

NodeId Graph::slice(NodeId a, int axis, std::size_t begin, std::size_t end) {
    const auto& x = value(a);
    MRTOC_EXPECT(axis == 0 || axis == 1, "slice: axis must be 0 or 1");
    const auto n = x.rows(), m = x.cols();
    const auto extent = axis == 0 ? n : m;
    MRTOC_EXPECT(begin < end && end <= extent, "slice: range [" + std::to_string(begin) + "," +
                                                   std::to_string(end) + ") invalid for shape " +
                                                   shape_string(x.shape()));
    const auto r0 = axis == 0 ? begin : 0, r1 = axis == 0 ? end : n;
    const auto c0 = axis == 1 ? begin : 0, c1 = axis == 1 ? end : m;
    std::vector<double> vals;
    vals.reserve((r1 - r0) * (c1 - c0));
    for (auto i = r0; i < r1; ++i)
        for (auto j = c0; j < c1; ++j) vals.push_back(x[i * m + j]);
    std::vector<std::size_t> shape = x.rank() == 2 ? std::vector<std::size_t>{r1 - r0, c1 - c0}
                                                   : std::vector<std::size_t>{c1 - c0};
    return push(OpKind::slice, {a}, Tensor(std::move(shape), std::move(vals)),
                [r0, r1, c0, c1](const Graph& g, NodeId self, const Tensor& gout, std::vector<Tensor>& grads) {
                    const auto pa = g.parents(self)[0];
                    if (!g.requires_grad(pa)) return;
                    auto& ga = grad_slot(grads, g, pa);
                    const auto m = ga.cols(), w = c1 - c0;
                    for (auto i = r0; i < r1; ++i)
                        for (auto j = c0; j < c1; ++j) ga[i * m + j] += gout[(i - r0) * w + (j - c0)];
                });
}

NodeId Graph::concat(std::span<const NodeId> parts, int axis) {
    MRTOC_EXPECT(!parts.empty(), "concat: no inputs");
    MRTOC_EXPECT(axis == 0 || axis == 1, "concat: axis must be 0 or 1");
    const auto& first = value(parts[0]);
    std::size_t total = 0;
    for (auto p : parts) {
        const auto& v = value(p);
        if (axis == 0 ? v.cols() != first.cols() : v.rows() != first.rows()) shape_error("concat", first, v);
        total += axis == 0 ? v.rows() : v.cols();
    }
    const bool as_matrix = axis == 0 || first.rank() == 2;
    const auto n = axis == 0 ? total : first.rows();
    const auto m = axis == 0 ? first.cols() : total;
    Tensor out(as_matrix ? std::vector<std::size_t>{n, m} : std::vector<std::size_t>{m});
    std::size_t offset = 0;
    for (auto p : parts) {
        const auto& v = value(p);
        for (std::size_t i = 0; i < v.rows(); ++i)
            for (std::size_t j = 0; j < v.cols(); ++j) {
                const auto oi = axis == 0 ? offset + i : i;
                const auto oj = axis == 1 ? offset + j : j;
                out[oi * m + oj] = v[i * v.cols() + j];
            }
        offset += axis == 0 ? v.rows() : v.cols();
    }
    std::vector<NodeId> parents(parts.begin(), parts.end());
    return push(OpKind::concat, std::move(parents), std::move(out),
                [axis](const Graph& g, NodeId self, const Tensor& gout, std::vector<Tensor>& grads) {
                    const auto m = gout.cols();
                    std::size_t offset = 0;
                    for (auto p : g.parents(self)) {
                        const auto& v = g.value(p);
                        if (g.requires_grad(p)) {
                            auto& gp = grad_slot(grads, g, p);
                            for (std::size_t i = 0; i < v.rows(); ++i)
                                for (std::size_t j = 0; j < v.cols(); ++j) {
                                    const auto oi = axis == 0 ? offset + i : i;
                                    const auto oj = axis == 1 ? offset + j : j;
                                    gp[i * v.cols() + j] += gout[oi * m + oj];
                                }
                        }
                        offset += axis == 0 ? v.rows() : v.cols();
                    }
                });
}

NodeId Graph::reshape(NodeId a, std::vector<std::size_t> shape) {
    Tensor out = value(a).reshaped(std::move(shape));
    return push(OpKind::reshape, {a}, std::move(out),
                [](const Graph& g, NodeId self, const Tensor& gout, std::vector<Tensor>& grads) {
                    const auto pa = g.parents(self)[0];
                    if (!g.requires_grad(pa)) return;
                    auto& ga = grad_slot(grads, g, pa);
                    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i];
                });
}

NodeId Graph::gather_rows(NodeId table, std::span<const std::size_t> indices) {
    const auto& t = value(table);
    MRTOC_EXPECT(t.rank() == 2, "gather_rows: table must be rank 2, got " + shape_string(t.shape()));
    MRTOC_EXPECT(!indices.empty(), "gather_rows: empty index list");
    const auto k = t.rows(), d = t.cols();
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    Tensor out({idx.size(), d});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        MRTOC_EXPECT(idx[i] < k, "gather_rows: index " + std::to_string(idx[i]) + " >= " + std::to_string(k));
        std::copy_n(t.data() + idx[i] * d, d, out.data() + i * d);
    }
    return push(OpKind::gather_rows, {table}, std::move(out),
                [idx = std::move(idx)](const Graph& g, NodeId self, const Tensor& gout, std::vector<Tensor>& grads) {
                    const auto pa = g.parents(self)[0];
                    if (!g.requires_grad(pa)) return;
                    auto& ga = grad_slot(grads, g, pa);
                    const auto d = ga.cols();
                    for (std::size_t i = 0; i < idx.size(); ++i)
                        for (std::size_t j = 0; j < d; ++j) ga[idx[i] * d + j] += gout[i * d + j];
                });
}

NodeId Graph::stop_gradient(NodeId a) { return push(OpKind::stop_gradient, {a}, value(a), nullptr); }

NodeId Graph::straight_through(NodeId input, Tensor quantized) {
    const auto& x = value(input);
    if (x.size() != quantized.size()) shape_error("straight_through", x, quantized);
    quantized = quantized.reshaped(x.shape());
    return push(OpKind::straight_through, {input}, std::move(quantized),
                [](const Graph& g, NodeId self, const Tensor& gout, std::vector<Tensor>& grads) {
                    accumulate(grads, g, g.parents(self)[0], gout);
                });
}

std::map<NodeId, Tensor> evaluate_with_gradients(const Graph& graph, NodeId loss) {
    const auto& lv = graph.value(loss);
    if (lv.size() != 1)
        throw ContractViolation("evaluate_with_gradients: loss node " + std::to_string(loss) +
                                " is not scalar, shape " + shape_string(lv.shape()));

    std::vector<Tensor> grads(graph.size());
    if (graph.requires_grad(loss)) grads[loss] = Tensor(lv.shape(), {1.0});

    for (NodeId id = loss + 1; id-- > 0;) {
        const auto& n = graph.nodes_[id];
        if (!n.requires_grad || grads[id].size() == 0 || !n.backward) continue;
        n.backward(graph, id, grads[id], grads);
        for (auto p : n.parents) {
            if (grads[p].size() != 0 && !grads[p].all_finite())
                throw NumericError(std::string("non-finite gradient flowing out of ") + op_name(n.kind) + " (node " +
                                   std::to_string(id) + ") into node " + std::to_string(p));
        }
        // Interior gradients are dead once propagated.
        if (n.kind != OpKind::parameter) grads[id] = Tensor();
    }

    std::map<NodeId, Tensor> out;
    for (NodeId id = 0; id < graph.size(); ++id) {
        if (!graph.is_parameter(id)) continue;
        out.emplace(id, grads[id].size() ? std::move(grads[id]) : Tensor::zeros_like(graph.value(id)));
    }
    return out;
}

}  // namespace mrtoc::ad
