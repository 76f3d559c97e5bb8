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

#include "mrtoc/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "mrtoc/error.hpp"

namespace mrtoc {

Adam::Adam(AdamConfig config) : config_(config) {
    MRTOC_EXPECT(config_.learning_rate > 0.0, "learning rate must be positive");
}

void Adam::step(std::span<const ParamRef> params) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.push_back(Tensor::zeros_like(*p.value));
            v_.push_back(Tensor::zeros_like(*p.value));
        }
    }
    MRTOC_EXPECT(params.size() == m_.size(), "Adam::step: parameter list changed between steps");
    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t s = 0; s < params.size(); ++s) {
        auto& value = *params[s].value;
        const auto& grad = *params[s].grad;
        MRTOC_EXPECT(value.same_shape(grad) && value.same_shape(m_[s]),
                     "Adam::step: gradient shape " + shape_string(grad.shape()) + " vs parameter " +
                         shape_string(value.shape()));
        const std::size_t rows = std::min(params[s].active_rows, value.rows());
        const std::size_t n = value.rank() == 2 ? rows * value.cols() : value.size();
        auto& m = m_[s];
        auto& v = v_[s];
        for (std::size_t i = 0; i < n; ++i) {
            const double g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            value[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
        }
    }
}

}  // namespace mrtoc
