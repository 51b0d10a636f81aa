#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "longal/config.hpp"
#include "longal/dataset.hpp"
#include "longal/error.hpp"
#include "longal/kernels.hpp"
#include "longal/learner.hpp"
#include "longal/metrics.hpp"
#include "longal/orchestrator.hpp"
#include "longal/pairing.hpp"
#include "longal/preprocess.hpp"
#include "longal/strategies.hpp"

namespace fs = std::filesystem;
using namespace longal;

namespace {

int error_exit_code(const Error& e, int config_code, int io_code) {
    switch (e.code()) {
        case ErrorCode::InvalidConfig:
        case ErrorCode::GeometryError:  // unsatisfiable generation parameters
            return config_code;
        case ErrorCode::IoError:
        case ErrorCode::MissingGroundTruth:
        case ErrorCode::CorruptCheckpoint:
            return io_code;
        default:
            return io_code;
    }
}

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    SynthParams params;
    std::string out_dir;
    int hw = 0;
};

int cmd_synth(const SynthArgs& args) {
    try {
        SynthParams p = args.params;
        if (args.hw > 0) p.h = p.w = args.hw;
        p.validate();
        Dataset d = generate_synthetic(p);
        save_dataset(d, args.out_dir);
        std::size_t pairs = pair_pool_size(d.all_volumes());
        std::cout << "out_dir=" << args.out_dir << "\n";
        std::cout << "patients=" << p.n_patients << "\n";
        std::cout << "pairs=" << pairs << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "synth: " << e.what() << "\n";
        return error_exit_code(e, 2, 3);
    }
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    KvConfig kv = KvConfig::parse_file(path);
    for (const std::string& ov : overrides) {
        std::size_t eq = ov.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::InvalidConfig, "--set expects key=value, got: " + ov);
        kv.set(ov.substr(0, eq), ov.substr(eq + 1));
    }
    return ExperimentConfig::from_kv(kv);
}

struct PreparedData {
    Dataset train, val, test;
    std::uint64_t dataset_hash = 0;
};

PreparedData prepare_data(const ExperimentConfig& cfg) {
    if (cfg.data_dir.empty()) fail(ErrorCode::InvalidConfig, "data_dir is required");
    PreparedData out;
    out.dataset_hash = dataset_content_hash(cfg.data_dir);
    Dataset raw = load_dataset(cfg.data_dir);
    Dataset processed = preprocess_dataset(raw, cfg.target_h, cfg.target_w);
    auto splits = split_patients(processed, cfg.split_ratios, cfg.split_seed);
    out.train = std::move(splits[0]);
    out.val = std::move(splits[1]);
    out.test = std::move(splits[2]);
    return out;
}

int run_experiment(const ExperimentConfig& cfg, const RunControl& control, bool quiet = false) {
    if (cfg.out_dir.empty()) fail(ErrorCode::InvalidConfig, "out_dir is required");
    PreparedData data = prepare_data(cfg);

    fs::create_directories(cfg.out_dir);
    write_manifest(cfg, data.dataset_hash, (fs::path(cfg.out_dir) / "manifest.json").string());

    ExperimentLog log = run_al_loop(cfg, data.train, data.val, data.test, control);

    write_log_csv(log, (fs::path(cfg.out_dir) / "log.csv").string());

    PairPool pool = build_pair_pool(data.train.all_volumes());
    int completed = 0;
    for (const auto& rep : log.repeats) {
        if (rep.aborted) continue;
        ++completed;
        auto rows = selection_distribution(pool, data.train, rep.selected_at);
        write_selection_csv(rows, (fs::path(cfg.out_dir) /
                                   ("selection_r" + std::to_string(rep.repeat) + ".csv"))
                                      .string());
        save_learner(rep.final_learner, (fs::path(cfg.out_dir) /
                                         ("model_r" + std::to_string(rep.repeat) + ".ckpt"))
                                            .string());
    }
    if (completed == 0) {
        std::cerr << "run: all repeats aborted\n";
        return 4;
    }

    if (!quiet) {
        auto mean = log.mean_rows();
        double highest = 0.0;
        for (const auto& r : mean) highest = std::max(highest, r.dice);
        std::cout << "out_dir=" << cfg.out_dir << "\n";
        std::cout << "pairs=" << pool.size() << "\n";
        std::cout << "budget=" << resolve_budget(cfg.budget, pool.size()) << "\n";
        std::cout << "repeats_completed=" << completed << "\n";
        if (!mean.empty()) {
            const auto& last = mean.back();
            std::cout << "final_labeled=" << last.labeled_count << "\n";
            std::cout << "final_dice=" << fmt4(last.dice) << "\n";
            std::cout << "final_recall=" << fmt4(last.recall) << "\n";
            std::cout << "final_precision=" << fmt4(last.precision) << "\n";
        }
        std::cout << "highest_dice=" << fmt4(highest) << "\n";
    }
    return 0;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides, bool resume) {
    try {
        ExperimentConfig cfg = load_config(config_path, overrides);
        RunControl control;
        control.resume = resume;
        return run_experiment(cfg, control);
    } catch (const Error& e) {
        std::cerr << "run: " << e.what() << "\n";
        return error_exit_code(e, 2, 2);
    }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const std::string& checkpoint, const std::string& data_dir,
             const std::string& config_path, const std::string& split, double threshold) {
    try {
        if (!fs::exists(checkpoint)) fail(ErrorCode::IoError, "missing checkpoint " + checkpoint);
        Learner learner = load_learner(checkpoint);

        Dataset eval_set;
        if (!config_path.empty()) {
            ExperimentConfig cfg = load_config(config_path, {});
            PreparedData data = prepare_data(cfg);
            if (split == "train")
                eval_set = std::move(data.train);
            else if (split == "val")
                eval_set = std::move(data.val);
            else
                eval_set = std::move(data.test);
        } else {
            if (data_dir.empty())
                fail(ErrorCode::InvalidConfig, "eval needs --data or --config");
            if (!fs::exists(data_dir)) fail(ErrorCode::IoError, "missing dataset " + data_dir);
            Dataset raw = load_dataset(data_dir);
            eval_set = preprocess_dataset(raw, learner.trained_h, learner.trained_w);
        }

        TestMetrics m = evaluate_testset(
            [&learner](const SlicePair& p) { return learner.predict_proba(assemble_input(p)); },
            eval_set, threshold);
        std::cout << "dice=" << fmt4(m.dice) << "\n";
        std::cout << "recall=" << fmt4(m.recall) << "\n";
        std::cout << "precision=" << fmt4(m.precision) << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "eval: " << e.what() << "\n";
        return error_exit_code(e, 2, 3);
    }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& strategies_csv, const std::string& budgets_csv) {
    try {
        ExperimentConfig base = load_config(config_path, overrides);
        if (base.out_dir.empty()) fail(ErrorCode::InvalidConfig, "out_dir is required");

        std::vector<std::string> strategies;
        {
            std::istringstream ss(strategies_csv);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                if (!tok.empty()) strategies.push_back(tok);
            }
        }
        std::vector<double> budgets;
        if (!budgets_csv.empty()) {
            std::istringstream ss(budgets_csv);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                if (!tok.empty()) budgets.push_back(std::stod(tok));
            }
        } else {
            budgets.push_back(base.budget);
        }
        if (strategies.empty()) fail(ErrorCode::InvalidConfig, "no strategies given");

        fs::create_directories(base.out_dir);
        std::ofstream combined((fs::path(base.out_dir) / "sweep.csv").string(), std::ios::trunc);
        combined << "strategy,budget,repeat,iteration,labeled_count,dice,recall,precision,epochs,"
                    "wall_ms\n";
        std::ofstream summary((fs::path(base.out_dir) / "sweep_summary.csv").string(),
                              std::ios::trunc);
        summary << "strategy,budget,status,final_dice,final_recall,final_precision,highest_dice\n";

        PreparedData data = prepare_data(base);
        for (double budget : budgets) {
            for (const std::string& strat : strategies) {
                ExperimentConfig cfg = base;
                cfg.budget = budget;
                cfg.strategy.name = strategy_from_string(strat);
                char bbuf[32];
                std::snprintf(bbuf, sizeof(bbuf), "%g", budget);
                cfg.out_dir = (fs::path(base.out_dir) / (strat + "_b" + bbuf)).string();
                fs::create_directories(cfg.out_dir);
                try {
                    write_manifest(cfg, data.dataset_hash,
                                   (fs::path(cfg.out_dir) / "manifest.json").string());
                    ExperimentLog log = run_al_loop(cfg, data.train, data.val, data.test, {});
                    write_log_csv(log, (fs::path(cfg.out_dir) / "log.csv").string());
                    int completed = 0;
                    for (const auto& rep : log.repeats) {
                        if (rep.aborted) continue;
                        ++completed;
                        for (const auto& r : rep.rows) {
                            combined << strat << ',' << bbuf << ',' << r.repeat << ','
                                     << r.iteration << ',' << r.labeled_count << ','
                                     << fmt4(r.dice) << ',' << fmt4(r.recall) << ','
                                     << fmt4(r.precision) << ',' << r.epochs << ',' << r.wall_ms
                                     << '\n';
                        }
                    }
                    if (completed == 0) {
                        summary << strat << ',' << bbuf << ",failed,,,,\n";
                        continue;
                    }
                    auto mean = log.mean_rows();
                    double highest = 0.0;
                    for (const auto& r : mean) highest = std::max(highest, r.dice);
                    const auto& last = mean.back();
                    summary << strat << ',' << bbuf << ",ok," << fmt4(last.dice) << ','
                            << fmt4(last.recall) << ',' << fmt4(last.precision) << ','
                            << fmt4(highest) << '\n';
                } catch (const Error& e) {
                    std::cerr << "sweep cell " << strat << " b=" << bbuf << " failed: " << e.what()
                              << "\n";
                    summary << strat << ',' << bbuf << ",failed,,,,\n";
                }
            }
        }
        std::cout << "out_dir=" << base.out_dir << "\n";
        std::cout << "cells=" << strategies.size() * budgets.size() << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "sweep: " << e.what() << "\n";
        return error_exit_code(e, 2, 2);
    }
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct LogRow {
    int repeat = 0, iteration = 0;
    long long labeled = 0;
    double dice = 0, recall = 0, precision = 0;
    long long epochs = 0, wall_ms = 0;
};

std::vector<LogRow> parse_log_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorCode::IoError, "missing log " + path);
    std::vector<LogRow> rows;
    std::string line;
    bool header = true;
    while (std::getline(f, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        LogRow r;
        std::getline(ss, tok, ',');
        r.repeat = std::stoi(tok);
        std::getline(ss, tok, ',');
        r.iteration = std::stoi(tok);
        std::getline(ss, tok, ',');
        r.labeled = std::stoll(tok);
        std::getline(ss, tok, ',');
        r.dice = tok.empty() ? 0.0 : std::stod(tok);
        std::getline(ss, tok, ',');
        r.recall = tok.empty() ? 0.0 : std::stod(tok);
        std::getline(ss, tok, ',');
        r.precision = tok.empty() ? 0.0 : std::stod(tok);
        std::getline(ss, tok, ',');
        r.epochs = std::stoll(tok);
        std::getline(ss, tok, ',');
        r.wall_ms = std::stoll(tok);
        rows.push_back(r);
    }
    return rows;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    try {
        if (run_dirs.empty()) fail(ErrorCode::IoError, "no run directories given");
        fs::create_directories(out_dir);
        std::ofstream cmp((fs::path(out_dir) / "comparison.csv").string(), std::ios::trunc);
        cmp << "run,repeats,final_labeled,final_dice,final_recall,final_precision,highest_dice\n";

        for (const std::string& dir : run_dirs) {
            fs::path log_path = fs::path(dir) / "log.csv";
            if (!fs::exists(log_path)) fail(ErrorCode::IoError, "missing " + log_path.string());
            auto rows = parse_log_csv(log_path.string());
            if (rows.empty()) fail(ErrorCode::IoError, "empty log in " + dir);

            // mean over repeats per iteration
            std::map<int, std::vector<LogRow>> by_iter;
            int max_repeat = 0;
            for (const auto& r : rows) {
                by_iter[r.iteration].push_back(r);
                max_repeat = std::max(max_repeat, r.repeat);
            }
            std::string name = fs::path(dir).filename().string();
            if (name.empty()) name = dir;
            std::ofstream curve((fs::path(out_dir) / ("curve_" + name + ".csv")).string(),
                                std::ios::trunc);
            curve << "iteration,labeled_count,dice,recall,precision\n";
            double highest = 0.0;
            long long final_labeled = 0;
            double fd = 0, fr = 0, fp = 0;
            for (const auto& [it, group] : by_iter) {
                double d = 0, rc = 0, pr = 0;
                for (const auto& g : group) {
                    d += g.dice;
                    rc += g.recall;
                    pr += g.precision;
                }
                d /= group.size();
                rc /= group.size();
                pr /= group.size();
                curve << it << ',' << group.front().labeled << ',' << fmt4(d) << ',' << fmt4(rc)
                      << ',' << fmt4(pr) << '\n';
                highest = std::max(highest, d);
                final_labeled = group.front().labeled;
                fd = d;
                fr = rc;
                fp = pr;
            }
            cmp << name << ',' << (max_repeat + 1) << ',' << final_labeled << ',' << fmt4(fd) << ','
                << fmt4(fr) << ',' << fmt4(fp) << ',' << fmt4(highest) << '\n';
        }
        std::cout << "out_dir=" << out_dir << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "report: " << e.what() << "\n";
        return error_exit_code(e, 2, 3);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"longitudinal change-detection active learning"};
    app.require_subcommand(1);

    // synth
    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic longitudinal dataset");
    synth_cmd->add_option("--patients", synth.params.n_patients, "number of patients");
    synth_cmd->add_option("--timepoints", synth.params.timepoints_per_patient, "timepoints per patient");
    synth_cmd->add_option("--hw", synth.hw, "square slice size (sets height and width)");
    synth_cmd->add_option("--height", synth.params.h, "slice height");
    synth_cmd->add_option("--width", synth.params.w, "slice width");
    synth_cmd->add_option("--slices", synth.params.c, "slices per volume");
    synth_cmd->add_option("--lesions-min", synth.params.lesion_count_min, "min lesions per timepoint");
    synth_cmd->add_option("--lesions-max", synth.params.lesion_count_max, "max lesions per timepoint");
    synth_cmd->add_option("--diameter-min", synth.params.lesion_diameter_min, "min lesion diameter (voxels)");
    synth_cmd->add_option("--diameter-max", synth.params.lesion_diameter_max, "max lesion diameter (voxels)");
    synth_cmd->add_option("--noise", synth.params.noise_sigma, "additive Gaussian noise sigma");
    synth_cmd->add_option("--misalign", synth.params.misalignment_px, "max follow-up translation (px)");
    synth_cmd->add_option("--seed", synth.params.seed, "generator seed");
    synth_cmd->add_option("--out", synth.out_dir, "output dataset directory")->required();

    // run
    std::string run_config;
    std::vector<std::string> run_overrides;
    bool run_resume = false;
    auto* run_cmd = app.add_subcommand("run", "execute the active-learning budget loop");
    run_cmd->add_option("--config", run_config, "flat key=value config file")->required();
    run_cmd->add_option("--set", run_overrides, "override a config key (key=value, repeatable)");
    run_cmd->add_flag("--resume", run_resume, "resume from per-repeat checkpoints in out_dir");

    // eval
    std::string eval_ckpt, eval_data, eval_config, eval_split = "test";
    double eval_threshold = 0.5;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved model checkpoint");
    eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "dataset directory (evaluates all patients)");
    eval_cmd->add_option("--config", eval_config, "run config (reproduces that run's split)");
    eval_cmd->add_option("--split", eval_split, "split to evaluate with --config (train|val|test)");
    eval_cmd->add_option("--threshold", eval_threshold, "binarization threshold");

    // sweep
    std::string sweep_config, sweep_strategies, sweep_budgets;
    std::vector<std::string> sweep_overrides;
    auto* sweep_cmd = app.add_subcommand("sweep", "run a strategy x budget grid with shared seeds");
    sweep_cmd->add_option("--config", sweep_config, "flat key=value config file")->required();
    sweep_cmd->add_option("--strategies", sweep_strategies, "comma-separated strategy list")->required();
    sweep_cmd->add_option("--budgets", sweep_budgets, "comma-separated budget list");
    sweep_cmd->add_option("--set", sweep_overrides, "override a config key (key=value, repeatable)");

    // report
    std::vector<std::string> report_dirs;
    std::string report_out = "report";
    auto* report_cmd = app.add_subcommand("report", "merge run logs into comparison tables");
    report_cmd->add_option("runs", report_dirs, "run output directories");
    report_cmd->add_option("--out", report_out, "report output directory");

    CLI11_PARSE(app, argc, argv);

    if (synth_cmd->parsed()) return cmd_synth(synth);
    if (run_cmd->parsed()) return cmd_run(run_config, run_overrides, run_resume);
    if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_config, eval_split, eval_threshold);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_config, sweep_overrides, sweep_strategies, sweep_budgets);
    if (report_cmd->parsed()) return cmd_report(report_dirs, report_out);
    return 1;
}
