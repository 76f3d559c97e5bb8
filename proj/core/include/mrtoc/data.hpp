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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mrtoc/tensor.hpp"

namespace mrtoc {

/// Labelled feature vectors, stored as one [n, N] matrix.
struct Dataset {
    Tensor features;
    std::vector<int> labels;
    std::size_t num_classes = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t feature_dim() const noexcept { return features.cols(); }

    /// Rows in the given order.
    Dataset subset(std::span<const std::size_t> rows) const;
    /// Throws ContractViolation if empty, ragged or labels out of range.
    void validate() const;
};

struct BlobSpec {
    std::size_t num_classes = 10;
    std::size_t dim = 8;
    std::size_t samples_per_class = 500;
    double spread = 0.15;
};

/// Gaussian blobs around centers drawn uniformly in [-1,1]^dim.
Dataset generate_blobs(const BlobSpec& spec, std::uint64_t seed);

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are scaled to [0,1] and flattened row-major.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Seeded permutation of the row indices split into P near-equal batches.
std::vector<std::vector<std::size_t>> batches(const Dataset& ds, std::size_t p, std::uint64_t seed, int epoch);

/// Number of batches for a target batch size (at least 1).
std::size_t batch_count_for(std::size_t n, std::size_t batch_size);

struct TrainTestSplit {
    Dataset train;
    Dataset test;
};

/// Seeded shuffle, first `train_fraction` of rows to train, the rest to test.
TrainTestSplit split_train_test(const Dataset& ds, double train_fraction, std::uint64_t seed);

/// CSV `label,f_0,...,f_{N-1}`.
void write_dataset_csv(std::ostream& os, const Dataset& ds, const std::string& comment = {});

}  // namespace mrtoc
