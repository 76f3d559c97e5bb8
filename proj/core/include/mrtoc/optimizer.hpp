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
#include <limits>
#include <span>
#include <vector>

#include "mrtoc/tensor.hpp"

namespace mrtoc {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// One trainable tensor and its gradient. Only rows [0, active_rows) are
/// updated; the rest keep their values and moment estimates.
struct ParamRef {
    Tensor* value = nullptr;
    const Tensor* grad = nullptr;
    std::size_t active_rows = std::numeric_limits<std::size_t>::max();
};

/// Adaptive-moment optimizer. Moment slots are matched to ParamRefs by
/// position, so every step must pass the same tensors in the same order.
class Adam {
public:
    explicit Adam(AdamConfig config = {});

    void step(std::span<const ParamRef> params);
    long steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return config_; }

private:
    AdamConfig config_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    long t_ = 0;
};

}  // namespace mrtoc
