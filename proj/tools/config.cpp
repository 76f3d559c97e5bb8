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

#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "mrtoc/channel.hpp"
#include "mrtoc/error.hpp"

namespace mrtoc::cli {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were consumed.
class Section {
public:
    Section(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
        if (!j_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
    }

    std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

    const json* find(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void get(const std::string& key, double& out) {
        if (const auto* v = find(key)) {
            if (!v->is_number()) throw ConfigError(path(key), "expected a number");
            out = v->get<double>();
            if (!std::isfinite(out)) throw ConfigError(path(key), "must be finite");
        }
    }

    void get(const std::string& key, bool& out) {
        if (const auto* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(path(key), "expected true or false");
            out = v->get<bool>();
        }
    }

    void get(const std::string& key, std::string& out) {
        if (const auto* v = find(key)) {
            if (!v->is_string()) throw ConfigError(path(key), "expected a string");
            out = v->get<std::string>();
        }
    }

    template <class Int>
        requires std::is_integral_v<Int>
    void get(const std::string& key, Int& out) {
        if (const auto* v = find(key)) out = integer<Int>(*v, path(key));
    }

    template <class T>
    void get(const std::string& key, std::vector<T>& out) {
        if (const auto* v = find(key)) {
            if (!v->is_array()) throw ConfigError(path(key), "expected an array");
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i) {
                const auto& e = (*v)[i];
                const auto where = path(key) + "[" + std::to_string(i) + "]";
                if constexpr (std::is_integral_v<T>) {
                    out.push_back(integer<T>(e, where));
                } else {
                    if (!e.is_number()) throw ConfigError(where, "expected a number");
                    out.push_back(e.get<double>());
                }
            }
        }
    }

    Section child(const std::string& key) {
        static const json empty = json::object();
        const auto* v = find(key);
        return Section(v ? *v : empty, path(key));
    }

    void reject_unknown() const {
        for (const auto& [key, _] : j_.items())
            if (!seen_.count(key)) throw ConfigError(path(key), "unknown key");
    }

private:
    template <class Int>
    static Int integer(const json& v, const std::string& where) {
        if (!v.is_number_integer()) throw ConfigError(where, "expected an integer");
        if constexpr (std::is_unsigned_v<Int>) {
            if (v.is_number_unsigned()) return static_cast<Int>(v.get<std::uint64_t>());
            if (v.get<std::int64_t>() < 0) throw ConfigError(where, "must be non-negative");
            return static_cast<Int>(v.get<std::int64_t>());
        } else {
            const auto x = v.get<std::int64_t>();
            if (x < std::numeric_limits<Int>::min() || x > std::numeric_limits<Int>::max())
                throw ConfigError(where, "out of range");
            return static_cast<Int>(x);
        }
    }

    const json& j_;
    std::string prefix_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(key, what);
}

bool probability(double x) { return x >= 0.0 && x <= 1.0; }

void validate(const ExperimentConfig& c) {
    const auto& d = c.data;
    require(d.kind == "blobs" || d.kind == "idx", "data.kind", "must be \"blobs\" or \"idx\"");
    if (d.kind == "blobs") {
        require(d.num_classes >= 2, "data.num_classes", "must be >= 2");
        require(d.dim >= 1, "data.dim", "must be >= 1");
        require(d.samples_per_class >= 1, "data.samples_per_class", "must be >= 1");
        require(d.spread > 0.0, "data.spread", "must be > 0");
    } else {
        require(!d.idx_images.empty(), "data.idx_images", "required when data.kind is \"idx\"");
        require(!d.idx_labels.empty(), "data.idx_labels", "required when data.kind is \"idx\"");
        require(d.idx_test_images.empty() == d.idx_test_labels.empty(), "data.idx_test_labels",
                "idx_test_images and idx_test_labels go together");
    }
    require(d.train_fraction > 0.0 && d.train_fraction < 1.0, "data.train_fraction", "must lie in (0, 1)");

    const auto& m = c.model;
    require(m.m >= 1, "model.m", "must be >= 1");
    require(m.d >= 1, "model.d", "must be >= 1");
    require(m.k_max >= 2 && is_power_of_two(m.k_max), "model.k_max", "must be a power of two >= 2");
    for (auto h : m.encoder_hidden) require(h >= 1, "model.encoder_hidden", "widths must be >= 1");
    for (auto h : m.head_hidden) require(h >= 1, "model.head_hidden", "widths must be >= 1");

    const auto& t = c.train;
    require(t.epochs_per_level >= 0, "train.epochs_per_level", "must be >= 0");
    require(t.batch_size >= 1, "train.batch_size", "must be >= 1");
    require(t.learning_rate > 0.0, "train.learning_rate", "must be > 0");
    require(t.gamma > 0.0, "train.gamma", "must be > 0");
    for (double g : t.gamma_per_level) require(g > 0.0, "train.gamma_per_level", "entries must be > 0");
    require(t.eta >= 0.0, "train.eta", "must be >= 0");
    require(probability(t.eps_train), "train.eps_train", "must lie in [0, 1]");

    const auto& e = c.eval;
    const int max_level = log2_exact(m.k_max);
    for (int l : e.levels) require(l >= 1 && l <= max_level, "eval.levels", "entries must lie in 1..log2(k_max)");
    for (double x : e.eps_test) require(probability(x), "eval.eps_test", "entries must lie in [0, 1]");
    for (double x : e.p_e) require(probability(x), "eval.p_e", "entries must lie in [0, 1]");
    require(!e.eps_test.empty() || !e.p_e.empty(), "eval.eps_test", "needs at least one entry");
    require(e.trials >= 1, "eval.trials", "must be >= 1");

    require(c.rate.v_bit > 0.0, "rate.v_bit", "must be > 0");
    require(c.rate.tau > 0.0, "rate.tau", "must be > 0");
}

json parse_literal(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;
    }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    Section root(j, "");
    root.get("seed", c.seed);
    root.get("output_dir", c.output_dir);

    auto data = root.child("data");
    data.get("kind", c.data.kind);
    data.get("num_classes", c.data.num_classes);
    data.get("dim", c.data.dim);
    data.get("samples_per_class", c.data.samples_per_class);
    data.get("spread", c.data.spread);
    data.get("train_fraction", c.data.train_fraction);
    data.get("idx_images", c.data.idx_images);
    data.get("idx_labels", c.data.idx_labels);
    data.get("idx_test_images", c.data.idx_test_images);
    data.get("idx_test_labels", c.data.idx_test_labels);
    data.reject_unknown();

    auto model = root.child("model");
    model.get("m", c.model.m);
    model.get("d", c.model.d);
    model.get("k_max", c.model.k_max);
    model.get("encoder_hidden", c.model.encoder_hidden);
    model.get("head_hidden", c.model.head_hidden);
    model.reject_unknown();

    auto train = root.child("train");
    train.get("epochs_per_level", c.train.epochs_per_level);
    train.get("batch_size", c.train.batch_size);
    train.get("batch_count", c.train.batch_count);
    train.get("learning_rate", c.train.learning_rate);
    train.get("gamma", c.train.gamma);
    train.get("gamma_per_level", c.train.gamma_per_level);
    train.get("eta", c.train.eta);
    train.get("eps_train", c.train.eps_train);
    train.get("independent_level_noise", c.train.independent_level_noise);
    train.reject_unknown();

    auto eval = root.child("eval");
    eval.get("levels", c.eval.levels);
    eval.get("eps_test", c.eval.eps_test);
    eval.get("p_e", c.eval.p_e);
    eval.get("trials", c.eval.trials);
    eval.reject_unknown();

    auto rate = root.child("rate");
    rate.get("v_bit", c.rate.v_bit);
    rate.get("tau", c.rate.tau);
    rate.reject_unknown();

    root.reject_unknown();
    validate(c);
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["data"] = {{"kind", c.data.kind},
                 {"num_classes", c.data.num_classes},
                 {"dim", c.data.dim},
                 {"samples_per_class", c.data.samples_per_class},
                 {"spread", c.data.spread},
                 {"train_fraction", c.data.train_fraction},
                 {"idx_images", c.data.idx_images},
                 {"idx_labels", c.data.idx_labels},
                 {"idx_test_images", c.data.idx_test_images},
                 {"idx_test_labels", c.data.idx_test_labels}};
    j["model"] = {{"m", c.model.m},
                  {"d", c.model.d},
                  {"k_max", c.model.k_max},
                  {"encoder_hidden", c.model.encoder_hidden},
                  {"head_hidden", c.model.head_hidden}};
    j["train"] = {{"epochs_per_level", c.train.epochs_per_level},
                  {"batch_size", c.train.batch_size},
                  {"batch_count", c.train.batch_count},
                  {"learning_rate", c.train.learning_rate},
                  {"gamma", c.train.gamma},
                  {"gamma_per_level", c.train.gamma_per_level},
                  {"eta", c.train.eta},
                  {"eps_train", c.train.eps_train},
                  {"independent_level_noise", c.train.independent_level_noise}};
    j["eval"] = {{"levels", c.eval.levels},
                 {"eps_test", c.eval.eps_test},
                 {"p_e", c.eval.p_e},
                 {"trials", c.eval.trials}};
    j["rate"] = {{"v_bit", c.rate.v_bit}, {"tau", c.rate.tau}};
    return j;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path, std::string("invalid JSON: ") + e.what());
    }
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
    const std::string key = assignment.substr(0, eq);
    json* node = &j;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError(key, "empty path component");
        if (!node->is_object()) throw ConfigError(key, "parent is not an object");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = parse_literal(assignment.substr(eq + 1));
}

std::string config_hash(const json& resolved) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : resolved.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    if (name == "desk") return c;
    if (name == "paper") {
        c.output_dir = "runs/paper";
        c.model.m = 500;
        c.model.d = 2;
        c.model.k_max = 256;
        c.model.encoder_hidden = {512, 1000};
        c.model.head_hidden = {256};
        c.train.eps_train = 0.01;
        c.eval.levels = {1, 2, 3, 4, 5, 6, 7, 8};
        return c;
    }
    throw ConfigError("preset", "unknown preset '" + name + "' (expected desk or paper)");
}

TrainConfig to_train_config(const ExperimentConfig& c) {
    TrainConfig t;
    t.epochs_per_level = c.train.epochs_per_level;
    t.batch_size = c.train.batch_size;
    t.batch_count = c.train.batch_count;
    t.learning_rate = c.train.learning_rate;
    t.gamma = c.train.gamma;
    t.gamma_per_level = c.train.gamma_per_level;
    t.eta = c.train.eta;
    t.eps_train = c.train.eps_train;
    t.independent_level_noise = c.train.independent_level_noise;
    t.seed = c.seed;
    return t;
}

ModelShape to_model_shape(const ExperimentConfig& c) {
    ModelShape s;
    s.m = c.model.m;
    s.d = c.model.d;
    s.k_max = c.model.k_max;
    s.encoder_hidden = c.model.encoder_hidden;
    s.head_hidden = c.model.head_hidden;
    return s;
}

BlobSpec to_blob_spec(const ExperimentConfig& c) {
    return BlobSpec{c.data.num_classes, c.data.dim, c.data.samples_per_class, c.data.spread};
}

TrainTestSplit load_experiment_data(const ExperimentConfig& c) {
    if (c.data.kind == "idx") {
        auto all = load_idx(c.data.idx_images, c.data.idx_labels);
        if (c.data.idx_test_images.empty()) return split_train_test(all, c.data.train_fraction, c.seed);
        auto test = load_idx(c.data.idx_test_images, c.data.idx_test_labels);
        test.num_classes = std::max(test.num_classes, all.num_classes);
        all.num_classes = test.num_classes;
        return TrainTestSplit{std::move(all), std::move(test)};
    }
    return split_train_test(generate_blobs(to_blob_spec(c), c.seed), c.data.train_fraction, c.seed);
}

}  // namespace mrtoc::cli
