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

#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>

#include <CLI11.hpp>

#include "config.hpp"
#include "mrtoc/channel.hpp"
#include "mrtoc/codebook.hpp"
#include "mrtoc/error.hpp"
#include "mrtoc/evaluation.hpp"
#include "mrtoc/models.hpp"
#include "mrtoc/training.hpp"

namespace mrtoc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCheckpointName = "model.ckpt";
constexpr const char* kTrainLogName = "train_log.csv";
constexpr const char* kConfigName = "config.json";

// Options shared by every subcommand that resolves an experiment config.
struct ConfigOptions {
    std::string config_path;
    std::string preset_name = "desk";
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;

    void attach(CLI::App& app, bool with_file = true) {
        if (with_file) {
            app.add_option("-c,--config", config_path, "JSON experiment config");
            app.add_option("--preset", preset_name, "built-in config when --config is absent (desk, paper)");
        }
        app.add_option("--set", sets, "override a config entry, e.g. --set train.eta=0.2")->take_all();
        seed_opt = app.add_option("--seed", seed, "seed override (beats MRTOC_SEED)");
    }
};

struct Resolved {
    ExperimentConfig cfg;
    json doc;
    std::string hash;

    std::string provenance() const {
        return "mrtoc config_hash=" + hash + " seed=" + std::to_string(cfg.seed);
    }
};

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("MRTOC_SEED");
    if (s == nullptr || *s == '\0') return std::nullopt;
    const std::string text(s);
    if (text.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("MRTOC_SEED", "expected an unsigned integer, got '" + text + "'");
    try {
        return std::stoull(text);
    } catch (const std::exception&) {
        throw ConfigError("MRTOC_SEED", "out of range: '" + text + "'");
    }
}

// File or preset, then --set entries, then extra key=value pairs, then
// MRTOC_SEED, then --seed.
Resolved resolve(json base, const ConfigOptions& opts, const std::vector<std::string>& extra = {}) {
    for (const auto& s : opts.sets) apply_override(base, s);
    for (const auto& s : extra) apply_override(base, s);
    if (const auto s = env_seed()) base["seed"] = *s;
    if (opts.seed_opt != nullptr && opts.seed_opt->count() > 0) base["seed"] = opts.seed;
    Resolved r;
    r.cfg = config_from_json(base);
    r.doc = config_to_json(r.cfg);
    r.hash = config_hash(r.doc);
    return r;
}

json base_config(const ConfigOptions& opts) {
    if (!opts.config_path.empty()) return read_json_file(opts.config_path);
    return config_to_json(preset(opts.preset_name));
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    body(os);
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_config(const fs::path& path, const Resolved& r) {
    write_file(path, [&](std::ostream& os) {
        json doc = r.doc;
        os << doc.dump(2) << '\n';
    });
}

fs::path sibling_config(const fs::path& output) {
    auto p = output;
    return p.replace_extension(".config.json");
}

// Writes to `path`, or to `out` when path is empty or "-".
void emit(const std::string& path, std::ostream& out, const std::function<void(std::ostream&)>& body) {
    if (path.empty() || path == "-")
        body(out);
    else
        write_file(path, body);
}

struct CheckpointContext {
    LoadedCheckpoint ckpt;
    ExperimentConfig trained_with;
};

CheckpointContext open_checkpoint(const std::string& path) {
    if (path.empty()) throw ConfigError("checkpoint", "--checkpoint is required");
    if (!fs::exists(path)) throw IngestionError("missing checkpoint: " + path + " does not exist");
    auto ckpt = load_checkpoint(path);
    if (!ckpt.config.contains("experiment"))
        throw IngestionError(path + ": checkpoint carries no experiment config");
    auto cfg = config_from_json(ckpt.config.at("experiment"));
    return CheckpointContext{std::move(ckpt), std::move(cfg)};
}

// Test split as seen at training time: the data seed is the checkpoint's,
// whatever seed the evaluation itself runs with.
Dataset test_split(const ExperimentConfig& resolved, const ExperimentConfig& trained_with) {
    auto data_cfg = resolved;
    data_cfg.seed = trained_with.seed;
    return load_experiment_data(data_cfg).test;
}

// ---- subcommands ----------------------------------------------------------

struct TrainCmd {
    ConfigOptions config;
    std::string out_dir;
    int epochs = 0;
    CLI::Option* epochs_opt = nullptr;
    bool quiet = false;

    void attach(CLI::App& app) {
        config.attach(app);
        app.add_option("-o,--out", out_dir, "output directory (overrides output_dir)");
        epochs_opt = app.add_option("--epochs", epochs, "epochs per level (overrides train.epochs_per_level)");
        app.add_flag("-q,--quiet", quiet, "no per-epoch progress on stderr");
    }

    int operator()(std::ostream& out, std::ostream& err) const {
        std::vector<std::string> extra;
        if (!out_dir.empty()) extra.push_back("output_dir=" + json(out_dir).dump());
        if (epochs_opt->count() > 0) extra.push_back("train.epochs_per_level=" + std::to_string(epochs));
        const auto r = resolve(base_config(config), config, extra);
        const fs::path dir = r.cfg.output_dir;
        fs::create_directories(dir);
        write_config(dir / kConfigName, r);

        const auto data = load_experiment_data(r.cfg);
        TrainHooks hooks;
        if (!quiet) {
            hooks.on_epoch = [&err](const TrainLogRow& row) {
                err << "level " << row.level << " epoch " << row.epoch << " loss " << row.mean_loss << " acc "
                    << row.train_acc << '\n';
            };
        }
        const auto result = train_progressive(to_train_config(r.cfg), to_model_shape(r.cfg), data.train, hooks);

        save_checkpoint(dir / kCheckpointName, result.model, json{{"experiment", r.doc}, {"config_hash", r.hash}});
        write_file(dir / kTrainLogName,
                   [&](std::ostream& os) { write_train_log_csv(os, result.log, r.provenance()); });

        out << "config_hash " << r.hash << " seed " << r.cfg.seed << '\n';
        for (int l = 1; l <= result.model.codebook.trained_levels(); ++l) {
            double acc = 0.0;
            for (const auto& row : result.log)
                if (row.level == l) acc = row.train_acc;
            out << "level " << l << " train_acc " << acc << '\n';
        }
        out << "checkpoint " << (dir / kCheckpointName).string() << '\n';
        return kExitOk;
    }
};

struct EvalCmd {
    ConfigOptions config;
    std::string checkpoint;
    int level = 0;
    double eps = 0.0;
    CLI::Option* eps_opt = nullptr;
    int trials = 0;
    CLI::Option* trials_opt = nullptr;
    std::string output;

    void attach(CLI::App& app) {
        config.attach(app, false);
        app.add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();
        app.add_option("-l,--level", level, "coding level")->required();
        eps_opt = app.add_option("--eps", eps, "test symbol error probability (default: first eval.eps_test)");
        trials_opt = app.add_option("--trials", trials, "channel realizations (overrides eval.trials)");
        app.add_option("-o,--output", output, "CSV path (default stdout)");
    }

    int operator()(std::ostream& out, std::ostream&) const {
        const auto ctx = open_checkpoint(checkpoint);
        std::vector<std::string> extra;
        if (trials_opt->count() > 0) extra.push_back("eval.trials=" + std::to_string(trials));
        const auto r = resolve(ctx.ckpt.config.at("experiment"), config, extra);
        const double e = eps_opt->count() > 0 ? eps : (r.cfg.eval.eps_test.empty() ? 0.0 : r.cfg.eval.eps_test[0]);
        if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("eps", "must lie in [0, 1]");
        const auto test = test_split(r.cfg, ctx.trained_with);

        const std::vector<int> levels{level};
        const std::vector<double> eps_list{e};
        const auto result =
            sweep_levels_eps(ctx.ckpt.model, levels, eps_list, test, SweepConfig{r.cfg.eval.trials, r.cfg.seed});
        emit(output, out, [&](std::ostream& os) { write_sweep_csv(os, result, r.provenance()); });
        if (!output.empty() && output != "-") write_config(sibling_config(output), r);
        return kExitOk;
    }
};

struct SweepCmd {
    ConfigOptions config;
    std::string checkpoint;
    std::vector<int> levels;
    std::vector<double> eps;
    std::vector<double> p_e;
    int trials = 0;
    CLI::Option* trials_opt = nullptr;
    std::string output;

    void attach(CLI::App& app) {
        config.attach(app, false);
        app.add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();
        app.add_option("--levels", levels, "coding levels (default: eval.levels, else every trained level)")
            ->delimiter(',');
        app.add_option("--eps", eps, "test symbol error probabilities")->delimiter(',');
        app.add_option("--pe", p_e, "bit error rates; switches to BER mode")->delimiter(',');
        trials_opt = app.add_option("--trials", trials, "channel realizations per cell");
        app.add_option("-o,--output", output, "CSV path (default: sweep.csv next to the checkpoint)");
    }

    int operator()(std::ostream& out, std::ostream&) const {
        const auto ctx = open_checkpoint(checkpoint);
        std::vector<std::string> extra;
        if (trials_opt->count() > 0) extra.push_back("eval.trials=" + std::to_string(trials));
        if (!levels.empty()) extra.push_back("eval.levels=" + json(levels).dump());
        if (!eps.empty()) extra.push_back("eval.eps_test=" + json(eps).dump());
        if (!p_e.empty()) extra.push_back("eval.p_e=" + json(p_e).dump());
        const auto r = resolve(ctx.ckpt.config.at("experiment"), config, extra);
        const auto test = test_split(r.cfg, ctx.trained_with);

        std::vector<int> lv = r.cfg.eval.levels;
        if (lv.empty()) {
            lv.resize(static_cast<std::size_t>(ctx.ckpt.model.codebook.trained_levels()));
            std::iota(lv.begin(), lv.end(), 1);
        }
        const SweepConfig sc{r.cfg.eval.trials, r.cfg.seed};
        const auto result = r.cfg.eval.p_e.empty()
                                ? sweep_levels_eps(ctx.ckpt.model, lv, r.cfg.eval.eps_test, test, sc)
                                : sweep_ber(ctx.ckpt.model, lv, r.cfg.eval.p_e, test, sc);

        const fs::path path = output.empty() ? fs::path(checkpoint).parent_path() / "sweep.csv" : fs::path(output);
        write_file(path, [&](std::ostream& os) { write_sweep_csv(os, result, r.provenance()); });
        write_config(sibling_config(path), r);
        out << std::setprecision(6);
        for (const auto& row : result.rows) {
            out << "level " << row.level << " eps " << row.eps_test;
            if (row.p_e) out << " p_e " << *row.p_e;
            out << " accuracy " << row.accuracy << " +- " << row.std_error << '\n';
        }
        out << "wrote " << path.string() << '\n';
        return kExitOk;
    }
};

struct SelectLevelCmd {
    ConfigOptions config;
    double v_bit = 0.0, tau = 0.0;
    std::size_t m = 0, k_max = 0;
    CLI::Option *v_opt = nullptr, *tau_opt = nullptr, *m_opt = nullptr, *k_opt = nullptr;

    void attach(CLI::App& app) {
        config.attach(app);
        v_opt = app.add_option("--vbit", v_bit, "affordable rate in bit/s (default rate.v_bit)");
        tau_opt = app.add_option("--tau", tau, "latency budget in seconds (default rate.tau)");
        m_opt = app.add_option("--m", m, "sub-vectors per message (default model.m)");
        k_opt = app.add_option("--kmax", k_max, "largest codebook size (default model.k_max)");
    }

    int operator()(std::ostream& out, std::ostream& err) const {
        std::vector<std::string> extra;
        if (v_opt->count() > 0) extra.push_back("rate.v_bit=" + json(v_bit).dump());
        if (tau_opt->count() > 0) extra.push_back("rate.tau=" + json(tau).dump());
        if (m_opt->count() > 0) extra.push_back("model.m=" + std::to_string(m));
        if (k_opt->count() > 0) extra.push_back("model.k_max=" + std::to_string(k_max));
        const auto r = resolve(base_config(config), config, extra);
        RateContext ctx;
        ctx.v_bit = r.cfg.rate.v_bit;
        ctx.tau = r.cfg.rate.tau;
        ctx.m_subvectors = r.cfg.model.m;
        ctx.k_max = r.cfg.model.k_max;
        try {
            out << select_level(ctx) << '\n';
        } catch (const InfeasibleRate& e) {
            err << "error: " << e.what() << "\nminimal feasible tau: " << std::setprecision(17) << e.min_tau()
                << '\n';
            return kExitRuntime;
        }
        return kExitOk;
    }
};

struct DumpCodebookCmd {
    std::string checkpoint;
    std::string output;

    void attach(CLI::App& app) {
        app.add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();
        app.add_option("-o,--output", output, "CSV path (default stdout)");
    }

    int operator()(std::ostream& out, std::ostream&) const {
        const auto ctx = open_checkpoint(checkpoint);
        const auto& cfg = ctx.ckpt.config;
        const std::string hash = cfg.contains("config_hash") ? cfg.at("config_hash").get<std::string>()
                                                              : config_hash(cfg.at("experiment"));
        const std::string comment =
            "mrtoc config_hash=" + hash + " seed=" + std::to_string(ctx.trained_with.seed);
        emit(output, out, [&](std::ostream& os) { write_codebook_csv(os, ctx.ckpt.model.codebook, comment); });
        return kExitOk;
    }
};

struct GenDataCmd {
    ConfigOptions config;
    std::string output;
    std::string split = "all";

    void attach(CLI::App& app) {
        config.attach(app);
        app.add_option("-o,--output", output, "CSV path")->required();
        app.add_option("--split", split, "which rows to write")->check(CLI::IsMember({"all", "train", "test"}));
    }

    int operator()(std::ostream& out, std::ostream&) const {
        const auto r = resolve(base_config(config), config);
        Dataset ds;
        if (split == "all")
            ds = r.cfg.data.kind == "blobs" ? generate_blobs(to_blob_spec(r.cfg), r.cfg.seed)
                                            : load_idx(r.cfg.data.idx_images, r.cfg.data.idx_labels);
        else {
            auto parts = load_experiment_data(r.cfg);
            ds = split == "train" ? std::move(parts.train) : std::move(parts.test);
        }
        write_file(output, [&](std::ostream& os) { write_dataset_csv(os, ds, r.provenance()); });
        write_config(sibling_config(output), r);
        out << "wrote " << ds.size() << " rows to " << output << '\n';
        return kExitOk;
    }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-rate task-oriented communication simulator", "mrtoc"};
    app.require_subcommand(1);

    TrainCmd train;
    EvalCmd eval;
    SweepCmd sweep;
    SelectLevelCmd select;
    DumpCodebookCmd dump;
    GenDataCmd gen;
    auto* train_app = app.add_subcommand("train", "progressive multi-rate training");
    auto* eval_app = app.add_subcommand("eval", "accuracy at one level and channel condition");
    auto* sweep_app = app.add_subcommand("sweep", "accuracy table over levels and channel conditions");
    auto* select_app = app.add_subcommand("select-level", "largest coding level that fits a rate budget");
    auto* dump_app = app.add_subcommand("dump-codebook", "write the nested codebook as CSV");
    auto* gen_app = app.add_subcommand("gen-data", "write the configured dataset as CSV");
    train.attach(*train_app);
    eval.attach(*eval_app);
    sweep.attach(*sweep_app);
    select.attach(*select_app);
    dump.attach(*dump_app);
    gen.attach(*gen_app);

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (train_app->parsed()) return train(out, err);
        if (eval_app->parsed()) return eval(out, err);
        if (sweep_app->parsed()) return sweep(out, err);
        if (select_app->parsed()) return select(out, err);
        if (dump_app->parsed()) return dump(out, err);
        if (gen_app->parsed()) return gen(out, err);
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InfeasibleRate& e) {
        err << "error: " << e.what() << "\nminimal feasible tau: " << e.min_tau() << '\n';
        return kExitRuntime;
    } catch (const DivergenceError& e) {
        err << "training diverged: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace mrtoc::cli
