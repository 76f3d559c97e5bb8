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

#include "mrtoc/training.hpp"

#include <cmath>
#include <ostream>

#include "mrtoc/error.hpp"

namespace mrtoc {

double TrainConfig::gamma_for(int level) const {
    if (level >= 1 && static_cast<std::size_t>(level) <= gamma_per_level.size()) return gamma_per_level[level - 1];
    return gamma;
}

double TrainConfig::eta_for(int level) const { return level <= 1 ? 0.0 : eta; }

void TrainConfig::validate() const {
    MRTOC_EXPECT(epochs_per_level >= 0, "epochs_per_level must be non-negative");
    MRTOC_EXPECT(batch_size > 0 || batch_count > 0, "batch_size or batch_count must be positive");
    MRTOC_EXPECT(learning_rate > 0.0, "learning_rate must be positive");
    MRTOC_EXPECT(gamma > 0.0, "gamma must be positive");
    for (double g : gamma_per_level) MRTOC_EXPECT(g > 0.0, "gamma_per_level entries must be positive");
    MRTOC_EXPECT(eta >= 0.0, "eta must be non-negative");
    MRTOC_EXPECT(eps_train >= 0.0 && eps_train <= 1.0, "eps_train must lie in [0,1]");
}

BoundModel bind_model(ad::Graph& graph, const ModelArtifacts& model) {
    BoundModel b;
    b.encoder = bind_parameters(graph, model.encoder.net);
    b.head = bind_parameters(graph, model.head.net);
    b.codebook = graph.parameter(model.codebook.codewords());
    return b;
}

LossTerms mr_loss(ad::Graph& graph, const BoundModel& bound, const ModelArtifacts& model, const Dataset& batch,
                  int level, const StageSnapshot& snapshot, const TrainConfig& config, Rng& channel_rng) {
    MRTOC_EXPECT(batch.size() > 0, "mr_loss: empty batch");
    MRTOC_EXPECT(level >= 1 && level <= model.codebook.max_level(), "mr_loss: level out of range");
    const std::size_t prefix_rows = level == 1 ? 0 : std::size_t{1} << (level - 1);
    if (level >= 2 && (snapshot.level != level || snapshot.prefix.rows() != prefix_rows || snapshot.prefix.size() == 0))
        throw ContractViolation("mr_loss: no stage snapshot for level " + std::to_string(level));

    LossTerms out;
    const auto x = graph.constant(batch.features);
    out.z_e = encode(graph, bound.encoder, x);
    const Tensor z_e = graph.value(out.z_e);
    const std::size_t symbols = z_e.size() / model.codebook.dim();

    ChannelNoise shared;
    if (!config.independent_level_noise) shared = ChannelNoise::draw(symbols, channel_rng);

    std::vector<ad::NodeId> task_parts, vq_parts;
    for (int j = 1; j <= level; ++j) {
        LevelTerms lt;
        lt.quantized = model.codebook.quantize(z_e.values(), j);
        const SdmcChannel ch(std::size_t{1} << j, config.eps_train);
        lt.received = config.independent_level_noise ? transmit(lt.quantized.indices, ch, channel_rng)
                                                     : transmit(lt.quantized.indices, ch, shared);
        lt.z_d = graph.straight_through(out.z_e, model.codebook.lookup(lt.received, j));
        lt.logits = infer(graph, bound.head, lt.z_d);
        lt.task = graph.cross_entropy(lt.logits, batch.labels);
        lt.vq = vq_loss(graph, out.z_e, bound.codebook, lt.quantized, config.gamma_for(j));
        task_parts.push_back(lt.task);
        vq_parts.push_back(lt.vq.total);
        out.levels.push_back(std::move(lt));
    }

    auto sum = [&graph](const std::vector<ad::NodeId>& parts) {
        auto acc = parts.front();
        for (std::size_t i = 1; i < parts.size(); ++i) acc = graph.add(acc, parts[i]);
        return acc;
    };
    out.task = sum(task_parts);
    out.vq = sum(vq_parts);
    if (level >= 2) {
        const auto prefix = graph.slice(bound.codebook, 0, 0, prefix_rows);
        const auto anchor = graph.constant(snapshot.prefix);
        out.drift = graph.scale(graph.squared_l2(graph.sub(prefix, anchor)), config.eta_for(level));
    } else {
        out.drift = graph.constant(Tensor::scalar(0.0));
    }
    out.total = graph.add(graph.add(out.task, out.vq), out.drift);
    return out;
}

void optimizer_step(ModelArtifacts& model, const BoundModel& bound, const std::map<ad::NodeId, Tensor>& grads,
                    Adam& optimizer, int level) {
    std::vector<ParamRef> refs;
    auto add_net = [&](Mlp& net, const BoundMlp& b) {
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            refs.push_back({&net.layers[i].weight, &grads.at(b.weights[i])});
            refs.push_back({&net.layers[i].bias, &grads.at(b.biases[i])});
        }
    };
    add_net(model.encoder.net, bound.encoder);
    add_net(model.head.net, bound.head);
    refs.push_back({&model.codebook.codewords(), &grads.at(bound.codebook), std::size_t{1} << level});
    optimizer.step(refs);
}

namespace {

// Per-dimension std of the encoder outputs over the training set, pooled
// across sub-vectors.
std::vector<double> encoder_output_std(const ModelArtifacts& model, const Dataset& train) {
    const auto z = encode(train.features, model.encoder);
    const std::size_t d = model.codebook.dim();
    const std::size_t n = z.size() / d;
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t t = 0; t < d; ++t) mean[t] += z[s * d + t];
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t t = 0; t < d; ++t) {
            const double dv = z[s * d + t] - mean[t];
            var[t] += dv * dv;
        }
    std::vector<double> sd(d);
    for (std::size_t t = 0; t < d; ++t) {
        sd[t] = std::sqrt(var[t] / static_cast<double>(n));
        if (!(sd[t] > 0.0)) sd[t] = 1.0;
    }
    return sd;
}

int count_correct(const Tensor& logits, const std::vector<int>& labels) {
    const auto pred = predict(logits);
    int c = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) c += pred[i] == labels[i];
    return c;
}

}  // namespace

TrainResult train_progressive(const TrainConfig& config, const ModelShape& shape_in, const Dataset& train,
                              const TrainHooks& hooks) {
    config.validate();
    train.validate();
    ModelShape shape = shape_in;
    shape.input_dim = train.feature_dim();
    shape.num_classes = train.num_classes;

    const Rng root(config.seed);
    auto init_rng = root.split("init");
    auto codebook_rng = root.split("codebook");
    auto channel_rng = root.split("channel");
    const std::uint64_t shuffle_seed = root.split("shuffle").next_u64();

    TrainResult result{ModelArtifacts::init(shape, init_rng), {}};
    auto& model = result.model;
    const std::size_t p = config.batch_count ? config.batch_count : batch_count_for(train.size(), config.batch_size);

    for (int level = 1; level <= model.codebook.max_level(); ++level) {
        StageSnapshot snapshot;
        snapshot.level = level;
        snapshot.prefix = model.codebook.extend_level(level, codebook_rng, encoder_output_std(model, train));
        if (hooks.on_stage_begin) hooks.on_stage_begin(level, model.codebook, snapshot);

        // Each stage optimizes a different objective; moments start fresh.
        Adam optimizer(AdamConfig{config.learning_rate});
        for (int epoch = 0; epoch < config.epochs_per_level; ++epoch) {
            TrainLogRow row{level, epoch};
            std::size_t correct = 0;
            const auto split = batches(train, p, shuffle_seed, level * 1'000'000 + epoch);
            try {
                for (const auto& rows : split) {
                    const Dataset batch = train.subset(rows);
                    ad::Graph graph;
                    const auto bound = bind_model(graph, model);
                    const auto terms = mr_loss(graph, bound, model, batch, level, snapshot, config, channel_rng);
                    const auto grads = ad::evaluate_with_gradients(graph, terms.total);
                    Tensor before;
                    if (hooks.on_step) before = model.codebook.codewords();
                    optimizer_step(model, bound, grads, optimizer, level);
                    if (hooks.on_step) hooks.on_step(level, before, model.codebook, terms);

                    row.mean_loss += graph.value(terms.total).item();
                    row.task_loss += graph.value(terms.task).item();
                    row.vq_loss += graph.value(terms.vq).item();
                    row.drift_loss += graph.value(terms.drift).item();
                    correct += count_correct(graph.value(terms.levels.back().logits), batch.labels);
                }
            } catch (const NumericError& e) {
                throw DivergenceError("training diverged at level " + std::to_string(level) + ", epoch " +
                                          std::to_string(epoch) + ": " + e.what(),
                                      level, epoch);
            }
            const double nb = static_cast<double>(split.size());
            row.mean_loss /= nb;
            row.task_loss /= nb;
            row.vq_loss /= nb;
            row.drift_loss /= nb;
            row.train_acc = static_cast<double>(correct) / static_cast<double>(train.size());
            snapshot.epochs.push_back(row);
            result.log.push_back(row);
            if (hooks.on_epoch) hooks.on_epoch(row);
        }
        model.codebook.mark_trained(level);
    }
    return result;
}

ModelArtifacts train_reference(const TrainConfig& config, const ModelShape& shape_in, const Dataset& train) {
    config.validate();
    train.validate();
    ModelShape shape = shape_in;
    shape.input_dim = train.feature_dim();
    shape.num_classes = train.num_classes;

    const Rng root(config.seed);
    auto init_rng = root.split("init");
    const std::uint64_t shuffle_seed = root.split("shuffle").next_u64();
    auto model = ModelArtifacts::init(shape, init_rng);
    const std::size_t p = config.batch_count ? config.batch_count : batch_count_for(train.size(), config.batch_size);
    const int epochs = config.epochs_per_level * model.codebook.max_level();

    Adam optimizer(AdamConfig{config.learning_rate});
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (const auto& rows : batches(train, p, shuffle_seed, epoch)) {
            const Dataset batch = train.subset(rows);
            ad::Graph graph;
            const auto enc = bind_parameters(graph, model.encoder.net);
            const auto head = bind_parameters(graph, model.head.net);
            const auto logits = infer(graph, head, encode(graph, enc, graph.constant(batch.features)));
            const auto loss = graph.cross_entropy(logits, batch.labels);
            const auto grads = ad::evaluate_with_gradients(graph, loss);
            std::vector<ParamRef> refs;
            auto add_net = [&](Mlp& net, const BoundMlp& b) {
                for (std::size_t i = 0; i < net.layers.size(); ++i) {
                    refs.push_back({&net.layers[i].weight, &grads.at(b.weights[i])});
                    refs.push_back({&net.layers[i].bias, &grads.at(b.biases[i])});
                }
            };
            add_net(model.encoder.net, enc);
            add_net(model.head.net, head);
            optimizer.step(refs);
        }
    }
    return model;
}

double reference_accuracy(const ModelArtifacts& model, const Dataset& test) {
    const auto logits = infer(encode(test.features, model.encoder), model.head);
    return static_cast<double>(count_correct(logits, test.labels)) / static_cast<double>(test.size());
}

void write_train_log_csv(std::ostream& os, const std::vector<TrainLogRow>& log, const std::string& comment) {
    if (!comment.empty()) os << "# " << comment << '\n';
    os << "level,epoch,mean_loss,task_loss,vq_loss,drift_loss,train_acc\n";
    os.precision(17);
    for (const auto& r : log)
        os << r.level << ',' << r.epoch << ',' << r.mean_loss << ',' << r.task_loss << ',' << r.vq_loss << ','
           << r.drift_loss << ',' << r.train_acc << '\n';
}

}  // namespace mrtoc
