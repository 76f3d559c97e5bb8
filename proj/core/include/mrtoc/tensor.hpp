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
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mrtoc {

/// Dense row-major array of doubles. Rank 0 (scalar), 1 or 2 in practice.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor scalar(double v);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor zeros_like(const Tensor& other);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return values_.size(); }

    /// Leading dimension for rank-2, 1 otherwise.
    std::size_t rows() const noexcept;
    /// Trailing dimension (the whole length for rank-1, 1 for scalars).
    std::size_t cols() const noexcept;

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }

    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    double& at(std::size_t r, std::size_t c) noexcept { return values_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const noexcept { return values_[r * cols() + c]; }

    /// Value of a one-element tensor.
    double item() const;
    bool all_finite() const noexcept;
    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

    /// Same values, new shape; element count must match.
    Tensor reshaped(std::vector<std::size_t> shape) const;

    bool operator==(const Tensor& other) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

}  // namespace mrtoc
