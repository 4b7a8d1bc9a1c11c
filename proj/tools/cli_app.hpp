#pragma once

// Command-line front end: synth, train, eval, gradcheck, compare.
//
// Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trimodal/gradcheck.hpp"
#include "trimodal/trimodal.hpp"

namespace trimodal::cli {

/// Flat `key = value` file; `#` starts a comment. Keys mirror TrainConfig.
inline std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw format_error(path.string() + ": cannot open config file");
    }
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw format_error(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
        }
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

inline void apply_config(TrainConfig& cfg, const std::map<std::string, std::string>& kv, const std::string& source) {
    for (const auto& [key, value] : kv) {
        try {
            std::size_t used = 0;
            if (key == "epochs") {
                cfg.epochs = std::stoull(value, &used);
            } else if (key == "lr") {
                cfg.lr = std::stod(value, &used);
            } else if (key == "weight_decay") {
                cfg.weight_decay = std::stod(value, &used);
            } else if (key == "batch_size") {
                cfg.batch_size = std::stoull(value, &used);
            } else if (key == "tau") {
                cfg.tau = std::stod(value, &used);
            } else if (key == "seed") {
                cfg.seed = std::stoull(value, &used);
            } else if (key == "bias_enabled") {
                if (value != "true" && value != "false" && value != "1" && value != "0") {
                    throw std::invalid_argument("expected true/false");
                }
                cfg.bias_enabled = value == "true" || value == "1";
                used = value.size();
            } else if (key == "beta1") {
                cfg.beta1 = std::stod(value, &used);
            } else if (key == "beta2") {
                cfg.beta2 = std::stod(value, &used);
            } else if (key == "epsilon") {
                cfg.epsilon = std::stod(value, &used);
            } else {
                throw format_error(source + ": unknown config key '" + key + "'");
            }
            if (used != value.size()) {
                throw std::invalid_argument("trailing characters");
            }
        } catch (const format_error&) {
            throw;
        } catch (const std::exception&) {
            throw format_error(source + ": invalid value '" + value + "' for " + key);
        }
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    detail::write_file(path, text);
}

inline int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Trimodal contrastive alignment: synthetic data, training, retrieval evaluation"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset directory");
    std::string synth_out;
    SyntheticConfig synth_cfg;
    synth->add_option("--out", synth_out, "Output dataset directory")->required();
    synth->add_option("--clips", synth_cfg.n_clips, "Number of clips")->capture_default_str();
    synth->add_option("--shared-dim", synth_cfg.shared_dim, "Shared latent dimension")->capture_default_str();
    synth->add_option("--audio-dim", synth_cfg.audio_only_dim, "Audio-only latent dimension")->capture_default_str();
    synth->add_option("--visual-dim", synth_cfg.visual_only_dim, "Visual-only latent dimension")->capture_default_str();
    synth->add_option("--noise", synth_cfg.noise_sigma, "Noise standard deviation")->capture_default_str();
    synth->add_option("--signal-scale", synth_cfg.signal_scale, "Per-entry std of the clean signal")->capture_default_str();
    synth->add_option("--rows", synth_cfg.rows_per_clip, "Feature rows per clip")->capture_default_str();
    synth->add_option("--captions", synth_cfg.captions_per_type, "Captions per type per clip")->capture_default_str();
    synth->add_option("--seed", synth_cfg.seed, "Seed for mixing maps and latents")->capture_default_str();
    synth->add_option("--split", synth_cfg.split, "Split index (same maps, fresh clips)")->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "Train a regime and write a checkpoint");
    std::string train_data;
    std::string train_val;
    std::string regime_name;
    std::string ckpt_out;
    std::string trace_out;
    std::string config_file;
    TrainConfig overrides;
    train->add_option("--data", train_data, "Training dataset directory")->required();
    train->add_option("--regime", regime_name, "Training regime")
        ->required()
        ->check(CLI::IsMember({"two-stage-frozen", "two-stage-trainable", "audioclip", "slava-mixed", "slava-av-2loss",
                               "slava-av-3loss"}));
    train->add_option("--out", ckpt_out, "Checkpoint path")->required();
    train->add_option("--trace", trace_out, "Loss trace CSV (default: <out>.loss.csv)");
    train->add_option("--val-data", train_val, "Validation dataset for best-epoch selection");
    train->add_option("--config", config_file, "Flat key = value config file");
    auto* o_epochs = train->add_option("--epochs", overrides.epochs);
    auto* o_lr = train->add_option("--lr", overrides.lr);
    auto* o_wd = train->add_option("--weight-decay", overrides.weight_decay);
    auto* o_bs = train->add_option("--batch-size", overrides.batch_size);
    auto* o_tau = train->add_option("--tau", overrides.tau);
    auto* o_seed = train->add_option("--seed", overrides.seed);
    auto* o_bias = train->add_flag("--bias", overrides.bias_enabled, "Enable projection bias");

    // eval
    auto* eval = app.add_subcommand("eval", "Score a checkpoint on the retrieval tasks");
    std::string eval_data;
    std::string eval_ckpt;
    std::string eval_out;
    std::size_t eval_k = 10;
    bool first_caption_only = false;
    eval->add_option("--data", eval_data, "Dataset directory")->required();
    eval->add_option("--ckpt", eval_ckpt, "Checkpoint")->required();
    eval->add_option("--k", eval_k, "Recall cutoff")->capture_default_str()->check(CLI::PositiveNumber);
    eval->add_option("--out", eval_out, "Report path (JSON; table written to <out>.txt)")->required();
    eval->add_flag("--first-caption-only", first_caption_only, "Use only caption #0 of each clip as a query");

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");
    GradcheckOptions gc;
    gradcheck->add_option("--trials", gc.trials)->capture_default_str();
    gradcheck->add_option("--seed", gc.seed)->capture_default_str();

    // compare
    auto* compare = app.add_subcommand("compare", "Side-by-side retrieval table over several checkpoints");
    std::string cmp_data;
    std::vector<std::string> cmp_ckpts;
    std::string cmp_out;
    std::size_t cmp_k = 10;
    compare->add_option("--data", cmp_data, "Dataset directory")->required();
    compare->add_option("--ckpt", cmp_ckpts, "Checkpoints")->required();
    compare->add_option("--k", cmp_k, "Recall cutoff")->capture_default_str()->check(CLI::PositiveNumber);
    compare->add_option("--out", cmp_out, "Report path (JSON; table written to <out>.txt)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (*synth) {
            err << "config: clips=" << synth_cfg.n_clips << " shared_dim=" << synth_cfg.shared_dim
                << " audio_dim=" << synth_cfg.audio_only_dim << " visual_dim=" << synth_cfg.visual_only_dim
                << " noise=" << synth_cfg.noise_sigma << " rows=" << synth_cfg.rows_per_clip
                << " captions=" << synth_cfg.captions_per_type << " seed=" << synth_cfg.seed
                << " split=" << synth_cfg.split << "\n";
            const Dataset ds = gen_synthetic(synth_cfg);
            write_dataset(ds, synth_out);
            read_dataset(synth_out); // validate what was written
            out << "wrote " << ds.clips.size() << " clips to " << synth_out << "\n";
            return 0;
        }

        if (*train) {
            TrainConfig cfg;
            if (!config_file.empty()) {
                apply_config(cfg, read_config_file(config_file), config_file);
            }
            if (*o_epochs) cfg.epochs = overrides.epochs;
            if (*o_lr) cfg.lr = overrides.lr;
            if (*o_wd) cfg.weight_decay = overrides.weight_decay;
            if (*o_bs) cfg.batch_size = overrides.batch_size;
            if (*o_tau) cfg.tau = overrides.tau;
            if (*o_seed) cfg.seed = overrides.seed;
            if (*o_bias) cfg.bias_enabled = true;
            const Regime regime = *parse_regime(regime_name);
            err << "config: regime=" << regime_name << " " << cfg.canonical() << "\n";
            cfg.validate();

            const Dataset ds = read_dataset(train_data);
            std::optional<Dataset> val;
            if (!train_val.empty()) {
                val = read_dataset(train_val);
            }
            const TrainResult result = train_regime(ds, cfg, regime, val ? &*val : nullptr);
            const std::string tag(to_string(regime));
            save_checkpoint(result.aligner, ckpt_out, tag, cfg.config_hash());
            load_checkpoint(ckpt_out);
            write_text(trace_out.empty() ? ckpt_out + ".loss.csv" : trace_out, loss_trace_csv(result));
            for (const auto& e : result.epochs) {
                out << "stage " << e.stage << " epoch " << e.epoch << " mean loss " << e.mean_total;
                if (e.validation_total) out << " validation " << *e.validation_total;
                out << "\n";
            }
            out << "wrote checkpoint " << ckpt_out << "\n";
            return 0;
        }

        if (*eval) {
            err << "config: k=" << eval_k << " all_captions=" << (first_caption_only ? "false" : "true") << "\n";
            const Dataset ds = read_dataset(eval_data);
            const Checkpoint ck = load_checkpoint(eval_ckpt);
            SuiteOptions opts;
            opts.k = eval_k;
            opts.all_captions = !first_caption_only;
            opts.model_tag = ck.regime_tag;
            const RetrievalReport report = run_task_suite(ck.aligner, ds, opts);
            const std::string table = format_table(report);
            write_text(eval_out, report.to_json().dump(2) + "\n");
            write_text(eval_out + ".txt", table);
            out << table;
            return 0;
        }

        if (*gradcheck) {
            err << "config: trials=" << gc.trials << " seed=" << gc.seed << " step=" << gc.step << "\n";
            const GradcheckSummary s = run_gradcheck(gc);
            char buf[160];
            std::snprintf(buf, sizeof(buf), "trials %zu: max relative error info_nce %.3e, end-to-end %.3e\n",
                          s.trials, s.max_rel_error_info_nce, s.max_rel_error_end_to_end);
            out << buf;
            const bool ok = s.max_rel_error() < 1e-4;
            out << (ok ? "PASS" : "FAIL") << " (threshold 1e-4)\n";
            return ok ? 0 : 1;
        }

        if (*compare) {
            err << "config: k=" << cmp_k << " checkpoints=" << cmp_ckpts.size() << "\n";
            const Dataset ds = read_dataset(cmp_data);
            std::vector<RetrievalReport> reports;
            for (const auto& path : cmp_ckpts) {
                const Checkpoint ck = load_checkpoint(path);
                SuiteOptions opts;
                opts.k = cmp_k;
                opts.model_tag = ck.regime_tag;
                reports.push_back(run_task_suite(ck.aligner, ds, opts));
            }
            std::vector<const RetrievalReport*> ptrs;
            nlohmann::ordered_json j = nlohmann::ordered_json::array();
            for (const auto& r : reports) {
                ptrs.push_back(&r);
                j.push_back(r.to_json());
            }
            const std::string table = format_table(ptrs);
            write_text(cmp_out, j.dump(2) + "\n");
            write_text(cmp_out + ".txt", table);
            out << table;
            return 0;
        }
    } catch (const error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace trimodal::cli
