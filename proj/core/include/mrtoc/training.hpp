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

/** \file training.hpp
 *  \brief Progressive level-by-level training with the multi-rate loss.
 *
 * Stage l grows the codebook to 2^l codewords and trains encoder, codebook
 * and inference head jointly on the sum of the task and VQ losses of every
 * level 1..l, plus a penalty pulling the first 2^(l-1) codewords back toward
 * their values at the start of the stage.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mrtoc/autodiff.hpp"
#include "mrtoc/channel.hpp"
#include "mrtoc/codebook.hpp"
#include "mrtoc/data.hpp"
#include "mrtoc/models.hpp"
#include "mrtoc/optimizer.hpp"

namespace mrtoc {

struct TrainConfig {
    int epochs_per_level = 30;
    std::size_t batch_size = 64;
    /// P. Zero means derive from batch_size.
    std::size_t batch_count = 0;
    double learning_rate = 1e-3;
    /// Commitment weight; gamma_per_level[j-1] overrides it for level j.
    double gamma = 0.25;
    std::vector<double> gamma_per_level;
    /// Drift penalty weight for l >= 2. Level 1 always uses 0.
    double eta = 0.1;
    double eps_train = 0.01;
    /// Draw separate channel noise per level instead of sharing one draw.
    bool independent_level_noise = false;
    std::uint64_t seed = 1;

    double gamma_for(int level) const;
    double eta_for(int level) const;
    void validate() const;
};

struct TrainLogRow {
    int level = 0;
    int epoch = 0;
    double mean_loss = 0.0;
    double task_loss = 0.0;
    double vq_loss = 0.0;
    double drift_loss = 0.0;
    double train_acc = 0.0;
};

/// Frozen start-of-stage state for the drift penalty.
struct StageSnapshot {
    int level = 0;
    Tensor prefix;  ///< [2^(l-1), D]; empty at level 1
    std::vector<TrainLogRow> epochs;
};

/// Graph handles for every trainable tensor.
struct BoundModel {
    BoundMlp encoder;
    BoundMlp head;
    ad::NodeId codebook = 0;
};

BoundModel bind_model(ad::Graph& graph, const ModelArtifacts& model);

/// Per-level pieces of one mr_loss evaluation.
struct LevelTerms {
    QuantizationResult quantized;
    std::vector<std::size_t> received;
    ad::NodeId z_d = 0;  ///< straight-through output fed to the head
    ad::NodeId logits = 0;
    ad::NodeId task = 0;
    VqLossNodes vq;
};

struct LossTerms {
    ad::NodeId z_e = 0;
    ad::NodeId total = 0;
    ad::NodeId task = 0;
    ad::NodeId vq = 0;
    ad::NodeId drift = 0;
    std::vector<LevelTerms> levels;  ///< levels[j-1] is level j
};

/// Builds the multi-rate loss on `graph` for one batch at stage `level`.
/// Channel noise is drawn from `channel_rng` at eps_train.
LossTerms mr_loss(ad::Graph& graph, const BoundModel& bound, const ModelArtifacts& model, const Dataset& batch,
                  int level, const StageSnapshot& snapshot, const TrainConfig& config, Rng& channel_rng);

/// Applies one Adam step to every trainable tensor; codewords at index
/// >= 2^level are left alone.
void optimizer_step(ModelArtifacts& model, const BoundModel& bound, const std::map<ad::NodeId, Tensor>& grads,
                    Adam& optimizer, int level);

struct TrainHooks {
    std::function<void(int level, const NestedCodebook&, const StageSnapshot&)> on_stage_begin;
    /// Called after each optimizer step with the table as it was before the step.
    std::function<void(int level, const Tensor& codewords_before, const NestedCodebook& after, const LossTerms&)>
        on_step;
    std::function<void(const TrainLogRow&)> on_epoch;
};

struct TrainResult {
    ModelArtifacts model;
    std::vector<TrainLogRow> log;
};

/// Runs every stage l = 1..log2(k_max). Throws DivergenceError on a
/// non-finite loss.
TrainResult train_progressive(const TrainConfig& config, const ModelShape& shape, const Dataset& train,
                              const TrainHooks& hooks = {});

/// Encoder and head trained directly on cross-entropy, no quantization or
/// channel, for epochs_per_level * log2(k_max) epochs. Task-headroom baseline.
ModelArtifacts train_reference(const TrainConfig& config, const ModelShape& shape, const Dataset& train);

/// Accuracy of head(encoder(x)) without quantization.
double reference_accuracy(const ModelArtifacts& model, const Dataset& test);

/// CSV `level,epoch,mean_loss,task_loss,vq_loss,drift_loss,train_acc`.
void write_train_log_csv(std::ostream& os, const std::vector<TrainLogRow>& log, const std::string& comment = {});

}  // namespace mrtoc
