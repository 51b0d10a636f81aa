#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "longal/config.hpp"
#include "longal/dataset.hpp"
#include "longal/learner.hpp"
#include "longal/metrics.hpp"
#include "longal/strategies.hpp"
#include "longal/types.hpp"

namespace longal {

struct ExperimentConfig {
    std::string data_dir;
    std::string out_dir;

    double budget = 0.2;  // <= 1.0: fraction of |D_S|; > 1.0: pair count
    int q0 = 100;         // 0 means q0 = B (single full training)
    int q = 50;

    StrategyConfig strategy;
    LearnerConfig learner;

    std::uint64_t seed_pool_init = 1;
    std::uint64_t seed_learner = 2;
    std::uint64_t seed_strategy = 3;

    int repeats = 3;
    bool eval_every_iteration = true;
    double threshold = 0.5;
    bool macro_metrics = false;

    int target_h = 0, target_w = 0;  // 0 keeps native size
    std::array<double, 3> split_ratios = {0.6, 0.2, 0.2};
    std::uint64_t split_seed = 1;
    int threads = 0;
    bool dump_scores = false;

    static ExperimentConfig from_kv(KvConfig& kv);
    void validate() const;

    // canonical key=value echo (sorted keys); its hash binds checkpoints to
    // the producing config
    std::string echo() const;
    std::uint64_t config_hash() const;
};

std::size_t resolve_budget(double budget, std::size_t pool_size);

struct IterationRow {
    int repeat = 0;
    int iteration = 0;
    std::size_t labeled_count = 0;
    double dice = 0.0, recall = 0.0, precision = 0.0;
    int epochs = 0;
    std::uint64_t wall_ms = 0;
};

struct RepeatResult {
    int repeat = 0;
    bool aborted = false;
    std::string abort_reason;
    std::vector<IterationRow> rows;
    std::vector<std::pair<PairKey, int>> selected_at;  // key -> selection iteration
    Learner final_learner;
};

struct ExperimentLog {
    std::vector<RepeatResult> repeats;
    // mean metrics across completed repeats, one row per iteration
    std::vector<IterationRow> mean_rows() const;
};

// ---------------------------------------------------------------------------
// Algorithm-1 primitives
// ---------------------------------------------------------------------------

// moves q0 uniformly random keys to D_L with their oracle labels attached
void init_labeled(PairPool& pool, const Dataset& oracle, std::size_t q0, std::uint64_t seed,
                  std::vector<std::pair<PairKey, int>>* selected_at = nullptr);

// returns the stored ground-truth change mask for the key
ChangeLabel oracle_label(const PairKey& key, const Dataset& oracle);

// Run controls: `resume` continues from per-repeat checkpoints in
// cfg.out_dir; `stop_after_iteration` halts a repeat after that many
// completed loop iterations (simulates an interruption for resume checks).
struct RunControl {
    bool resume = false;
    std::optional<int> stop_after_iteration;
};

// The budgeted query/label/train loop over all repeats. Each repeat derives
// its own seeds, retrains per iteration, evaluates on the test split, and
// checkpoints after every iteration when cfg.out_dir is set. A NonFiniteLoss
// aborts only the affected repeat.
ExperimentLog run_al_loop(const ExperimentConfig& cfg, const Dataset& train, const Dataset& val,
                          const Dataset& test, const RunControl& control = {});

// ---------------------------------------------------------------------------
// experiment state checkpoints (resume support)
// ---------------------------------------------------------------------------

struct ExperimentState {
    std::uint64_t config_hash = 0;
    int repeat = 0;
    int next_iteration = 0;
    bool finished = false;
    std::vector<std::pair<PairKey, int>> selected_at;
    std::vector<IterationRow> rows;
    Learner learner;  // parameters for warm starts
};

void save_experiment_state(const ExperimentState& st, const std::string& path);
ExperimentState load_experiment_state(const std::string& path);

// ---------------------------------------------------------------------------
// run outputs
// ---------------------------------------------------------------------------

void write_log_csv(const ExperimentLog& log, const std::string& path);
void write_manifest(const ExperimentConfig& cfg, std::uint64_t dataset_hash,
                    const std::string& path);

}  // namespace longal
