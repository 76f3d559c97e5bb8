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
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrtoc/autodiff.hpp"
#include "mrtoc/codebook.hpp"
#include "mrtoc/rng.hpp"
#include "mrtoc/tensor.hpp"

namespace mrtoc {

struct DenseLayer {
    Tensor weight;  // [in, out]
    Tensor bias;    // [out]
};

/// Fully-connected ReLU network; the last layer is linear.
struct Mlp {
    std::vector<DenseLayer> layers;

    /// dims = {in, hidden..., out}. Weights U(-1/sqrt(in), 1/sqrt(in)), biases zero.
    static Mlp init(std::span<const std::size_t> dims, Rng& rng);
    static Mlp zeros(std::span<const std::size_t> dims);

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t parameter_count() const;
};

/// Transmitter network x -> z_e. Output width is M * D.
struct EncoderParams {
    Mlp net;
    std::size_t m = 0;
    std::size_t d = 0;
};

/// Receiver network z_d -> class logits.
struct InferenceParams {
    Mlp net;
    std::size_t num_classes() const { return net.output_dim(); }
};

struct ModelShape {
    std::size_t input_dim = 0;
    std::size_t m = 16;
    std::size_t d = 2;
    std::size_t k_max = 16;
    std::size_t num_classes = 0;
    std::vector<std::size_t> encoder_hidden{128, 128};
    std::vector<std::size_t> head_hidden{128, 128};
};

/// Everything needed to run the pipeline end to end.
struct ModelArtifacts {
    EncoderParams encoder;
    InferenceParams head;
    NestedCodebook codebook;

    static ModelArtifacts init(const ModelShape& shape, Rng& rng);
};

/// Graph handles for one network's weights, in layer order.
struct BoundMlp {
    std::vector<ad::NodeId> weights;
    std::vector<ad::NodeId> biases;
};

BoundMlp bind_parameters(ad::Graph& graph, const Mlp& net);
ad::NodeId forward(ad::Graph& graph, const BoundMlp& net, ad::NodeId x);

/// z_e = E(x). x is [N] or [B, N].
ad::NodeId encode(ad::Graph& graph, const BoundMlp& encoder, ad::NodeId x);
/// logits = R(z_d). z_d is [M*D] or [B, M*D].
ad::NodeId infer(ad::Graph& graph, const BoundMlp& head, ad::NodeId z_d);

/// Eager forms (no gradients). Output rank follows the input.
Tensor encode(const Tensor& x, const EncoderParams& params);
Tensor infer(const Tensor& z_d, const InferenceParams& params);

/// Row-wise argmax of a logits tensor.
std::vector<int> predict(const Tensor& logits);

inline constexpr const char* kCheckpointHeader = "MRTOC-CKPT-1";

/// Header line, then one JSON document holding `config`, all weights, the
/// codebook table and the level counters. Doubles round-trip exactly.
void save_checkpoint(const std::filesystem::path& path, const ModelArtifacts& model, const nlohmann::json& config);

struct LoadedCheckpoint {
    ModelArtifacts model;
    nlohmann::json config;
};

/// Throws IngestionError on a missing file, wrong header or malformed body.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mrtoc
