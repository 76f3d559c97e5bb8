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

/** \file codebook.hpp
 *  \brief Nested vector-quantization codebook.
 *
 * One table of k_max codewords serves every coding level: level l uses the
 * first 2^l rows. Levels are grown one at a time by extend_level(); rows that
 * already existed are never touched by the extension itself.
 */

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mrtoc/autodiff.hpp"
#include "mrtoc/rng.hpp"
#include "mrtoc/tensor.hpp"

namespace mrtoc {

struct QuantizationResult {
    std::vector<std::size_t> indices;  ///< one per sub-vector, each < 2^level
    Tensor quantized;                  ///< concatenated codewords, same length as the input
    int level = 0;
};

class NestedCodebook {
public:
    /// Empty codebook: all rows zero, no level extended yet.
    NestedCodebook(std::size_t dim, std::size_t k_max);

    /// Rebuild from stored state (checkpoint load).
    NestedCodebook(Tensor codewords, int extended_levels, int trained_levels);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t k_max() const noexcept { return k_max_; }
    /// log2(k_max).
    int max_level() const noexcept { return max_level_; }
    int extended_levels() const noexcept { return extended_levels_; }
    int trained_levels() const noexcept { return trained_levels_; }

    /// [k_max, dim] table. Rows past 2^extended_levels are zero.
    const Tensor& codewords() const noexcept { return codewords_; }
    Tensor& codewords() noexcept { return codewords_; }

    /// Nearest codeword among the first 2^level for each dim-sized chunk of z_e.
    /// Squared Euclidean distance; ties go to the lowest index.
    QuantizationResult quantize(std::span<const double> z_e, int level) const;

    /// Concatenation of the addressed codewords.
    Tensor lookup(std::span<const std::size_t> indices, int level) const;

    /// First `count` rows as a [count, dim] tensor.
    Tensor prefix(std::size_t count) const;

    /// Grow to level l: keep rows [0, 2^(l-1)) and draw rows [2^(l-1), 2^l)
    /// from N(0, init_std[d]^2) per dimension (unit std when init_std is empty).
    /// Returns a copy of the untouched prefix, the anchor for the drift
    /// penalty; empty when l == 1.
    Tensor extend_level(int l, Rng& rng, std::span<const double> init_std = {});

    /// Record that stage l finished.
    void mark_trained(int l);

private:
    void check_level(int level, const char* what) const;

    std::size_t dim_;
    std::size_t k_max_;
    int max_level_;
    int extended_levels_ = 0;
    int trained_levels_ = 0;
    Tensor codewords_;
};

/// Coding level at which codeword `index` first appears.
int level_introduced(std::size_t index) noexcept;

struct VqLossNodes {
    ad::NodeId codebook_term;    ///< ||sg[z_e] - e||^2, moves codewords
    ad::NodeId commitment_term;  ///< ||z_e - sg[e]||^2, moves the encoder (unweighted)
    ad::NodeId total;            ///< codebook_term + gamma * commitment_term
};

/// Straight-through VQ loss for one quantization of z_e.
///
/// z_e is [M*D] or [B, M*D]; `codebook` is the [k_max, D] parameter node the
/// indices address. Terms are summed over sub-vectors and averaged over rows.
VqLossNodes vq_loss(ad::Graph& graph, ad::NodeId z_e, ad::NodeId codebook, const QuantizationResult& q,
                    double gamma);

/// CSV: `level_introduced,index,dim_0,...,dim_{D-1}`, one row per extended codeword.
void write_codebook_csv(std::ostream& os, const NestedCodebook& cb, const std::string& comment = {});

}  // namespace mrtoc
