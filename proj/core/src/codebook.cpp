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

#include "mrtoc/codebook.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <ostream>

#include "mrtoc/channel.hpp"
#include "mrtoc/error.hpp"

namespace mrtoc {

NestedCodebook::NestedCodebook(std::size_t dim, std::size_t k_max)
    : dim_(dim), k_max_(k_max), max_level_(0) {
    MRTOC_EXPECT(dim > 0, "codebook dimension must be positive");
    MRTOC_EXPECT(k_max >= 2 && is_power_of_two(k_max),
                 "k_max must be a power of two >= 2, got " + std::to_string(k_max));
    max_level_ = log2_exact(k_max);
    codewords_ = Tensor({k_max, dim});
}

NestedCodebook::NestedCodebook(Tensor codewords, int extended_levels, int trained_levels)
    : NestedCodebook(codewords.cols(), codewords.rows()) {
    MRTOC_EXPECT(codewords.rank() == 2, "codebook table must be rank 2");
    MRTOC_EXPECT(extended_levels >= 0 && extended_levels <= max_level_, "extended level count out of range");
    MRTOC_EXPECT(trained_levels >= 0 && trained_levels <= extended_levels,
                 "trained level count exceeds extended levels");
    codewords_ = std::move(codewords);
    extended_levels_ = extended_levels;
    trained_levels_ = trained_levels;
}

void NestedCodebook::check_level(int level, const char* what) const {
    if (level < 1 || level > max_level_)
        throw ContractViolation(std::string(what) + ": level " + std::to_string(level) + " outside [1, " +
                                std::to_string(max_level_) + "]");
    if (level > extended_levels_)
        throw ContractViolation(std::string(what) + ": level " + std::to_string(level) +
                                " not initialized (extended up to " + std::to_string(extended_levels_) + ")");
}

QuantizationResult NestedCodebook::quantize(std::span<const double> z_e, int level) const {
    check_level(level, "quantize");
    MRTOC_EXPECT(!z_e.empty() && z_e.size() % dim_ == 0,
                 "quantize: input length " + std::to_string(z_e.size()) + " not a multiple of D=" +
                     std::to_string(dim_));
    const std::size_t m = z_e.size() / dim_;
    const std::size_t k = std::size_t{1} << level;
    QuantizationResult out;
    out.level = level;
    out.indices.resize(m);
    std::vector<double> q(z_e.size());
    const double* cw = codewords_.data();
    for (std::size_t s = 0; s < m; ++s) {
        const double* x = z_e.data() + s * dim_;
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
            const double* e = cw + j * dim_;
            double d = 0.0;
            for (std::size_t t = 0; t < dim_; ++t) {
                const double diff = x[t] - e[t];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        out.indices[s] = best;
        std::copy_n(cw + best * dim_, dim_, q.data() + s * dim_);
    }
    out.quantized = Tensor::vector(std::move(q));
    return out;
}

Tensor NestedCodebook::lookup(std::span<const std::size_t> indices, int level) const {
    check_level(level, "lookup");
    MRTOC_EXPECT(!indices.empty(), "lookup: empty index list");
    const std::size_t k = std::size_t{1} << level;
    std::vector<double> out(indices.size() * dim_);
    for (std::size_t s = 0; s < indices.size(); ++s) {
        if (indices[s] >= k)
            throw ContractViolation("lookup: index " + std::to_string(indices[s]) + " out of range for level " +
                                    std::to_string(level) + " (size " + std::to_string(k) + ")");
        std::copy_n(codewords_.data() + indices[s] * dim_, dim_, out.data() + s * dim_);
    }
    return Tensor::vector(std::move(out));
}

Tensor NestedCodebook::prefix(std::size_t count) const {
    MRTOC_EXPECT(count > 0 && count <= k_max_, "prefix: count out of range");
    std::vector<double> vals(codewords_.data(), codewords_.data() + count * dim_);
    return Tensor::matrix(count, dim_, std::move(vals));
}

Tensor NestedCodebook::extend_level(int l, Rng& rng, std::span<const double> init_std) {
    if (l < 1 || l > max_level_)
        throw ContractViolation("extend_level: level " + std::to_string(l) + " beyond log2(k_max)=" +
                                std::to_string(max_level_));
    if (trained_levels_ != l - 1 || extended_levels_ != l - 1)
        throw ContractViolation("extend_level: level " + std::to_string(l) + " requires " + std::to_string(l - 1) +
                                " trained levels, have " + std::to_string(trained_levels_));
    MRTOC_EXPECT(init_std.empty() || init_std.size() == dim_, "extend_level: init_std must have D entries");

    const std::size_t old_k = l == 1 ? 0 : std::size_t{1} << (l - 1);
    const std::size_t new_k = std::size_t{1} << l;
    Tensor snapshot = old_k ? prefix(old_k) : Tensor();
    for (std::size_t j = old_k; j < new_k; ++j)
        for (std::size_t t = 0; t < dim_; ++t)
            codewords_.at(j, t) = rng.normal(0.0, init_std.empty() ? 1.0 : init_std[t]);
    extended_levels_ = l;
    return snapshot;
}

void NestedCodebook::mark_trained(int l) {
    MRTOC_EXPECT(l == trained_levels_ + 1 && l <= extended_levels_,
                 "mark_trained: level " + std::to_string(l) + " out of sequence");
    trained_levels_ = l;
}

int level_introduced(std::size_t index) noexcept {
    return index < 2 ? 1 : static_cast<int>(std::bit_width(index));
}

VqLossNodes vq_loss(ad::Graph& graph, ad::NodeId z_e, ad::NodeId codebook, const QuantizationResult& q,
                    double gamma) {
    MRTOC_EXPECT(gamma > 0.0, "vq_loss: gamma must be positive");
    // Copies: the graph's node storage moves as nodes are appended.
    const auto z_shape = graph.value(z_e).shape();
    const auto z_size = graph.value(z_e).size();
    const auto dim = graph.value(codebook).cols();
    MRTOC_EXPECT(q.indices.size() * dim == z_size,
                 "vq_loss: " + std::to_string(q.indices.size()) + " indices do not cover z_e of shape " +
                     shape_string(z_shape));
    const double rows = static_cast<double>(graph.value(z_e).rows());

    auto e = graph.reshape(graph.gather_rows(codebook, q.indices), z_shape);
    auto codebook_term = graph.scale(graph.squared_l2(graph.sub(graph.stop_gradient(z_e), e)), 1.0 / rows);
    auto commitment_term = graph.scale(graph.squared_l2(graph.sub(z_e, graph.stop_gradient(e))), 1.0 / rows);
    auto total = graph.add(codebook_term, graph.scale(commitment_term, gamma));
    return {codebook_term, commitment_term, total};
}

void write_codebook_csv(std::ostream& os, const NestedCodebook& cb, const std::string& comment) {
    if (!comment.empty()) os << "# " << comment << '\n';
    os << "level_introduced,index";
    for (std::size_t t = 0; t < cb.dim(); ++t) os << ",dim_" << t;
    os << '\n';
    const std::size_t rows = cb.extended_levels() ? std::size_t{1} << cb.extended_levels() : 0;
    os.precision(17);
    for (std::size_t j = 0; j < rows; ++j) {
        os << level_introduced(j) << ',' << j;
        for (std::size_t t = 0; t < cb.dim(); ++t) os << ',' << cb.codewords().at(j, t);
        os << '\n';
    }
}

}  // namespace mrtoc
