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

/** \file config.hpp
 *  \brief Experiment configuration for the command-line front end.
 */

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrtoc/data.hpp"
#include "mrtoc/evaluation.hpp"
#include "mrtoc/models.hpp"
#include "mrtoc/training.hpp"

namespace mrtoc::cli {

/// Malformed or invalid configuration. key() is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error("config key '" + key + "': " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

struct DataSection {
    std::string kind = "blobs";  ///< "blobs" or "idx"
    std::size_t num_classes = 10;
    std::size_t dim = 8;
    std::size_t samples_per_class = 500;
    double spread = 0.15;
    double train_fraction = 0.8;
    std::string idx_images;
    std::string idx_labels;
    /// Optional separate test files; without them the idx set is split like blobs.
    std::string idx_test_images;
    std::string idx_test_labels;

    bool operator==(const DataSection&) const = default;
};

struct ModelSection {
    std::size_t m = 16;
    std::size_t d = 2;
    std::size_t k_max = 16;
    std::vector<std::size_t> encoder_hidden{128, 128};
    std::vector<std::size_t> head_hidden{128, 128};

    bool operator==(const ModelSection&) const = default;
};

struct TrainSection {
    int epochs_per_level = 30;
    std::size_t batch_size = 64;
    std::size_t batch_count = 0;
    double learning_rate = 1e-3;
    double gamma = 0.25;
    std::vector<double> gamma_per_level;
    double eta = 0.1;
    double eps_train = 0.01;
    bool independent_level_noise = false;

    bool operator==(const TrainSection&) const = default;
};

struct EvalSection {
    std::vector<int> levels;  ///< empty: every trained level
    std::vector<double> eps_test{0.001, 0.01, 0.05};
    std::vector<double> p_e;  ///< non-empty switches sweep to BER mode
    int trials = 10;

    bool operator==(const EvalSection&) const = default;
};

struct RateSection {
    double v_bit = 1000.0;
    double tau = 2.0;

    bool operator==(const RateSection&) const = default;
};

struct ExperimentConfig {
    std::uint64_t seed = 7;
    std::string output_dir = "runs/desk";
    DataSection data;
    ModelSection model;
    TrainSection train;
    EvalSection eval;
    RateSection rate;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Strict parse: unknown keys, wrong types and out-of-range values throw ConfigError.
/// Missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Reads a JSON file; parse failures are ConfigError with key "<file>".
nlohmann::json read_json_file(const std::string& path);

/// Sets a dotted key such as "train.eta" to a JSON literal (bare words become strings).
void apply_override(nlohmann::json& j, const std::string& assignment);

/// FNV-1a 64 of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& resolved);

/// Built-in presets: "desk" and "paper".
ExperimentConfig preset(const std::string& name);

TrainConfig to_train_config(const ExperimentConfig& cfg);
ModelShape to_model_shape(const ExperimentConfig& cfg);
BlobSpec to_blob_spec(const ExperimentConfig& cfg);

/// Train and test sets described by the data section.
TrainTestSplit load_experiment_data(const ExperimentConfig& cfg);

}  // namespace mrtoc::cli
