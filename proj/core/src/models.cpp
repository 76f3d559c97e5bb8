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

#include "mrtoc/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mrtoc/error.hpp"

namespace mrtoc {

Mlp Mlp::init(std::span<const std::size_t> dims, Rng& rng) {
    Mlp net = zeros(dims);
    for (auto& layer : net.layers) {
        const double limit = 1.0 / std::sqrt(static_cast<double>(layer.weight.rows()));
        for (auto& w : layer.weight.values()) w = rng.uniform(-limit, limit);
    }
    return net;
}

Mlp Mlp::zeros(std::span<const std::size_t> dims) {
    MRTOC_EXPECT(dims.size() >= 2, "an MLP needs at least input and output sizes");
    Mlp net;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
        net.layers.push_back({Tensor({dims[i], dims[i + 1]}), Tensor({dims[i + 1]})});
    return net;
}

std::size_t Mlp::input_dim() const { return layers.empty() ? 0 : layers.front().weight.rows(); }
std::size_t Mlp::output_dim() const { return layers.empty() ? 0 : layers.back().weight.cols(); }

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

ModelArtifacts ModelArtifacts::init(const ModelShape& shape, Rng& rng) {
    MRTOC_EXPECT(shape.input_dim > 0 && shape.num_classes >= 2, "model shape: bad input/class counts");
    MRTOC_EXPECT(shape.m > 0 && shape.d > 0, "model shape: M and D must be positive");
    std::vector<std::size_t> enc{shape.input_dim};
    enc.insert(enc.end(), shape.encoder_hidden.begin(), shape.encoder_hidden.end());
    enc.push_back(shape.m * shape.d);
    std::vector<std::size_t> head{shape.m * shape.d};
    head.insert(head.end(), shape.head_hidden.begin(), shape.head_hidden.end());
    head.push_back(shape.num_classes);

    auto enc_rng = rng.split("encoder");
    auto head_rng = rng.split("head");
    return ModelArtifacts{EncoderParams{Mlp::init(enc, enc_rng), shape.m, shape.d},
                          InferenceParams{Mlp::init(head, head_rng)}, NestedCodebook(shape.d, shape.k_max)};
}

BoundMlp bind_parameters(ad::Graph& graph, const Mlp& net) {
    BoundMlp b;
    for (const auto& l : net.layers) {
        b.weights.push_back(graph.parameter(l.weight));
        b.biases.push_back(graph.parameter(l.bias));
    }
    return b;
}

ad::NodeId forward(ad::Graph& graph, const BoundMlp& net, ad::NodeId x) {
    MRTOC_EXPECT(!net.weights.empty(), "forward: empty network");
    const auto& w0 = graph.value(net.weights.front());
    const auto& xv = graph.value(x);
    if (xv.cols() != w0.rows())
        throw ContractViolation("forward: input of shape " + shape_string(xv.shape()) + " does not match layer of shape " +
                                shape_string(w0.shape()));
    const bool vector_input = xv.rank() == 1;
    auto h = vector_input ? graph.reshape(x, {1, xv.size()}) : x;
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        h = graph.add(graph.matmul(h, net.weights[i]), net.biases[i]);
        if (i + 1 < net.weights.size()) h = graph.relu(h);
    }
    if (vector_input) h = graph.reshape(h, {graph.value(h).size()});
    return h;
}

ad::NodeId encode(ad::Graph& graph, const BoundMlp& encoder, ad::NodeId x) { return forward(graph, encoder, x); }

ad::NodeId infer(ad::Graph& graph, const BoundMlp& head, ad::NodeId z_d) { return forward(graph, head, z_d); }

namespace {

Tensor eager_forward(const Tensor& x, const Mlp& net) {
    ad::Graph g;
    BoundMlp b;
    for (const auto& l : net.layers) {
        b.weights.push_back(g.constant(l.weight));
        b.biases.push_back(g.constant(l.bias));
    }
    return g.value(forward(g, b, g.constant(x)));
}

}  // namespace

Tensor encode(const Tensor& x, const EncoderParams& params) { return eager_forward(x, params.net); }

Tensor infer(const Tensor& z_d, const InferenceParams& params) { return eager_forward(z_d, params.net); }

std::vector<int> predict(const Tensor& logits) {
    const auto n = logits.rows(), m = logits.cols();
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = logits.data() + i * m;
        out[i] = static_cast<int>(std::max_element(row, row + m) - row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// checkpoint

namespace {

using nlohmann::json;

json tensor_to_json(const Tensor& t) {
    return json{{"shape", t.shape()}, {"values", std::vector<double>(t.values().begin(), t.values().end())}};
}

Tensor tensor_from_json(const json& j) {
    return Tensor(j.at("shape").get<std::vector<std::size_t>>(), j.at("values").get<std::vector<double>>());
}

json mlp_to_json(const Mlp& net) {
    json layers = json::array();
    for (const auto& l : net.layers) layers.push_back({{"weight", tensor_to_json(l.weight)}, {"bias", tensor_to_json(l.bias)}});
    return layers;
}

Mlp mlp_from_json(const json& j) {
    Mlp net;
    for (const auto& l : j) {
        DenseLayer layer{tensor_from_json(l.at("weight")), tensor_from_json(l.at("bias"))};
        MRTOC_EXPECT(layer.weight.rank() == 2 && layer.bias.size() == layer.weight.cols(), "layer shape mismatch");
        if (!net.layers.empty())
            MRTOC_EXPECT(net.layers.back().weight.cols() == layer.weight.rows(), "consecutive layers do not chain");
        net.layers.push_back(std::move(layer));
    }
    MRTOC_EXPECT(!net.layers.empty(), "network has no layers");
    return net;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelArtifacts& model, const nlohmann::json& config) {
    json body;
    body["config"] = config;
    body["encoder"] = {{"m", model.encoder.m}, {"d", model.encoder.d}, {"layers", mlp_to_json(model.encoder.net)}};
    body["head"] = {{"layers", mlp_to_json(model.head.net)}};
    body["codebook"] = {{"extended_levels", model.codebook.extended_levels()},
                        {"trained_levels", model.codebook.trained_levels()},
                        {"codewords", tensor_to_json(model.codebook.codewords())}};
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IngestionError("cannot open checkpoint for writing: " + path.string());
    os << kCheckpointHeader << '\n' << body.dump(1) << '\n';
    if (!os) throw IngestionError("failed writing checkpoint: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IngestionError("checkpoint not found: " + path.string());
    std::string header;
    std::getline(is, header);
    if (header != kCheckpointHeader)
        throw IngestionError(path.string() + ": expected header '" + kCheckpointHeader + "', got '" + header + "'");
    try {
        const json body = json::parse(is);
        const auto& enc = body.at("encoder");
        EncoderParams encoder{mlp_from_json(enc.at("layers")), enc.at("m").get<std::size_t>(),
                              enc.at("d").get<std::size_t>()};
        MRTOC_EXPECT(encoder.net.output_dim() == encoder.m * encoder.d, "encoder output is not M*D");
        InferenceParams head{mlp_from_json(body.at("head").at("layers"))};
        MRTOC_EXPECT(head.net.input_dim() == encoder.m * encoder.d, "head input is not M*D");
        const auto& cb = body.at("codebook");
        NestedCodebook codebook(tensor_from_json(cb.at("codewords")), cb.at("extended_levels").get<int>(),
                                cb.at("trained_levels").get<int>());
        MRTOC_EXPECT(codebook.dim() == encoder.d, "codebook dimension differs from encoder D");
        return {ModelArtifacts{std::move(encoder), std::move(head), std::move(codebook)}, body.at("config")};
    } catch (const json::exception& e) {
        throw IngestionError(path.string() + ": malformed checkpoint body: " + e.what());
    } catch (const ContractViolation& e) {
        throw IngestionError(path.string() + ": inconsistent checkpoint: " + e.what());
    }
}

}  // namespace mrtoc
