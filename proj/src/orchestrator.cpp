#include "longal/orchestrator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "longal/error.hpp"
#include "longal/kernels.hpp"
#include "longal/pairing.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace longal {

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

namespace {

AggregateMode aggregate_from_string(const std::string& s) {
    if (s == "mean") return AggregateMode::Mean;
    if (s == "max") return AggregateMode::Max;
    if (s == "topk_mean") return AggregateMode::TopkMean;
    fail(ErrorCode::InvalidConfig, "unknown aggregate mode: " + s);
}

std::string aggregate_to_string(AggregateMode m) {
    switch (m) {
        case AggregateMode::Mean: return "mean";
        case AggregateMode::Max: return "max";
        case AggregateMode::TopkMean: return "topk_mean";
    }
    return "?";
}

}  // namespace

ExperimentConfig ExperimentConfig::from_kv(KvConfig& kv) {
    ExperimentConfig c;
    c.data_dir = kv.get_string("data_dir", "");
    c.out_dir = kv.get_string("out_dir", "");
    c.budget = kv.get_double("budget", c.budget);
    c.q0 = kv.get_int("q0", c.q0);
    c.q = kv.get_int("q", c.q);
    c.repeats = kv.get_int("repeats", c.repeats);
    c.eval_every_iteration = kv.get_bool("eval_every_iteration", c.eval_every_iteration);
    c.threshold = kv.get_double("threshold", c.threshold);
    c.macro_metrics = kv.get_bool("macro_metrics", c.macro_metrics);
    c.target_h = kv.get_int("target_h", c.target_h);
    c.target_w = kv.get_int("target_w", c.target_w);
    c.split_ratios[0] = kv.get_double("split_train", c.split_ratios[0]);
    c.split_ratios[1] = kv.get_double("split_val", c.split_ratios[1]);
    c.split_ratios[2] = kv.get_double("split_test", c.split_ratios[2]);
    c.split_seed = kv.get_u64("split_seed", c.split_seed);
    c.seed_pool_init = kv.get_u64("seed_pool_init", c.seed_pool_init);
    c.seed_learner = kv.get_u64("seed_learner", c.seed_learner);
    c.seed_strategy = kv.get_u64("seed_strategy", c.seed_strategy);
    c.threads = kv.get_int("threads", c.threads);
    c.dump_scores = kv.get_bool("dump_scores", c.dump_scores);

    c.strategy.name = strategy_from_string(kv.get_string("strategy", "random"));
    c.strategy.n_drop = kv.get_int("n_drop", c.strategy.n_drop);
    c.strategy.n_clusters = kv.get_int("n_clusters", c.strategy.n_clusters);
    c.strategy.cluster_seed = kv.get_u64("cluster_seed", c.strategy.cluster_seed);
    c.strategy.candidate_multiplier = kv.get_int("candidate_multiplier", c.strategy.candidate_multiplier);
    c.strategy.hybrid_prefilter = kv.get_int("hybrid_prefilter", c.strategy.hybrid_prefilter);
    c.strategy.hybrid_diversity_weight =
        kv.get_double("hybrid_diversity_weight", c.strategy.hybrid_diversity_weight);
    c.strategy.hybrid_density_weight =
        kv.get_double("hybrid_density_weight", c.strategy.hybrid_density_weight);
    c.strategy.aggregate = aggregate_from_string(kv.get_string("aggregate", "mean"));
    c.strategy.topk_px = kv.get_int("topk_px", c.strategy.topk_px);
    c.strategy.mi_bins = kv.get_int("mi_bins", c.strategy.mi_bins);
    c.strategy.cluster_margin_inverted =
        kv.get_bool("cluster_margin_inverted", c.strategy.cluster_margin_inverted);

    c.learner.lr = kv.get_double("lr", c.learner.lr);
    c.learner.batch_size = kv.get_int("batch_size", c.learner.batch_size);
    c.learner.max_epochs = kv.get_int("max_epochs", c.learner.max_epochs);
    c.learner.patience = kv.get_int("patience", c.learner.patience);
    c.learner.focal_alpha = kv.get_double("focal_alpha", c.learner.focal_alpha);
    c.learner.focal_gamma = kv.get_double("focal_gamma", c.learner.focal_gamma);
    c.learner.dropout_rate = kv.get_double("dropout", c.learner.dropout_rate);
    c.learner.base_channels = kv.get_int("base_channels", c.learner.base_channels);
    c.learner.augment_training = kv.get_bool("augment", c.learner.augment_training);
    c.learner.warm_start = kv.get_bool("warm_start", c.learner.warm_start);

    kv.reject_unknown();
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    if (budget <= 0.0) fail(ErrorCode::InvalidConfig, "budget must be > 0");
    if (q0 < 0) fail(ErrorCode::InvalidConfig, "q0 must be >= 0 (0 means q0 = B)");
    if (q < 1) fail(ErrorCode::InvalidConfig, "q must be >= 1");
    if (repeats < 1) fail(ErrorCode::InvalidConfig, "repeats must be >= 1");
    if (threshold <= 0.0 || threshold >= 1.0)
        fail(ErrorCode::InvalidConfig, "threshold must lie in (0,1)");
    strategy.validate();
    learner.validate();
}

std::string ExperimentConfig::echo() const {
    std::ostringstream ss;
    char buf[64];
    auto put = [&ss](const std::string& k, const std::string& v) { ss << k << " = " << v << "\n"; };
    auto putd = [&](const std::string& k, double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        put(k, buf);
    };
    auto puti = [&](const std::string& k, long long v) { put(k, std::to_string(v)); };
    auto putb = [&](const std::string& k, bool v) { put(k, v ? "true" : "false"); };

    put("aggregate", aggregate_to_string(strategy.aggregate));
    putb("augment", learner.augment_training);
    puti("base_channels", learner.base_channels);
    puti("batch_size", learner.batch_size);
    putd("budget", budget);
    puti("candidate_multiplier", strategy.candidate_multiplier);
    putb("cluster_margin_inverted", strategy.cluster_margin_inverted);
    puti("cluster_seed", static_cast<long long>(strategy.cluster_seed));
    put("data_dir", data_dir);
    putd("dropout", learner.dropout_rate);
    putb("dump_scores", dump_scores);
    putb("eval_every_iteration", eval_every_iteration);
    putd("focal_alpha", learner.focal_alpha);
    putd("focal_gamma", learner.focal_gamma);
    putd("hybrid_density_weight", strategy.hybrid_density_weight);
    putd("hybrid_diversity_weight", strategy.hybrid_diversity_weight);
    puti("hybrid_prefilter", strategy.hybrid_prefilter);
    putd("lr", learner.lr);
    putb("macro_metrics", macro_metrics);
    puti("max_epochs", learner.max_epochs);
    puti("mi_bins", strategy.mi_bins);
    puti("n_clusters", strategy.n_clusters);
    puti("n_drop", strategy.n_drop);
    put("out_dir", out_dir);
    puti("patience", learner.patience);
    puti("q", q);
    puti("q0", q0);
    puti("repeats", repeats);
    puti("seed_learner", static_cast<long long>(seed_learner));
    puti("seed_pool_init", static_cast<long long>(seed_pool_init));
    puti("seed_strategy", static_cast<long long>(seed_strategy));
    puti("split_seed", static_cast<long long>(split_seed));
    putd("split_test", split_ratios[2]);
    putd("split_train", split_ratios[0]);
    putd("split_val", split_ratios[1]);
    put("strategy", strategy_to_string(strategy.name));
    puti("target_h", target_h);
    puti("target_w", target_w);
    putd("threshold", threshold);
    puti("topk_px", strategy.topk_px);
    putb("warm_start", learner.warm_start);
    return ss.str();
}

std::uint64_t ExperimentConfig::config_hash() const { return hash_string(echo()); }

std::size_t resolve_budget(double budget, std::size_t pool_size) {
    std::size_t b;
    if (budget <= 1.0) {
        b = static_cast<std::size_t>(std::llround(budget * static_cast<double>(pool_size)));
    } else {
        b = static_cast<std::size_t>(std::llround(budget));
    }
    if (b < 1) b = 1;
    if (b > pool_size) b = pool_size;  // budget exactness: min(B, |D_S|)
    return b;
}

// ---------------------------------------------------------------------------
// primitives
// ---------------------------------------------------------------------------

ChangeLabel oracle_label(const PairKey& key, const Dataset& oracle) {
    const PatientRecord* rec = oracle.find(key.patient_id);
    if (!rec) fail(ErrorCode::MissingGroundTruth, "no ground truth for patient " + key.patient_id);
    auto it = rec->truth.find(key);
    if (it == rec->truth.end())
        fail(ErrorCode::MissingGroundTruth, "no ground truth for " + key.str());
    ChangeLabel label;
    label.key = key;
    label.mask = it->second;
    return label;
}

void init_labeled(PairPool& pool, const Dataset& oracle, std::size_t q0, std::uint64_t seed,
                  std::vector<std::pair<PairKey, int>>* selected_at) {
    if (q0 > pool.size())
        fail(ErrorCode::BudgetExceedsPool, "q0 exceeds the pool size");
    Rng rng(seed);
    auto idx = rng.sample_without_replacement(pool.size(), q0);
    std::sort(idx.begin(), idx.end());  // canonical labeling order
    for (std::size_t i : idx) {
        const PairKey& key = pool.pairs[i].key;
        pool.mark_labeled(key, oracle_label(key, oracle));
        if (selected_at) selected_at->push_back({key, 0});
    }
}

// ---------------------------------------------------------------------------
// experiment state io
// ---------------------------------------------------------------------------

namespace {

constexpr char kExptMagic[8] = {'L', 'A', 'L', 'E', 'X', 'P', 'T', '1'};

template <typename T>
void put_raw(std::ostream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_raw(std::istream& f) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) fail(ErrorCode::CorruptCheckpoint, "experiment state truncated");
    return v;
}

void put_string(std::ostream& f, const std::string& s) {
    put_raw<std::uint32_t>(f, static_cast<std::uint32_t>(s.size()));
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& f) {
    std::uint32_t n = get_raw<std::uint32_t>(f);
    std::string s(n, '\0');
    f.read(s.data(), n);
    if (!f) fail(ErrorCode::CorruptCheckpoint, "experiment state truncated");
    return s;
}

}  // namespace

void save_experiment_state(const ExperimentState& st, const std::string& path) {
    std::ostringstream buf(std::ios::binary);
    buf.write(kExptMagic, sizeof(kExptMagic));
    put_raw<std::uint32_t>(buf, 1);
    put_raw<std::uint64_t>(buf, st.config_hash);
    put_raw<std::int32_t>(buf, st.repeat);
    put_raw<std::int32_t>(buf, st.next_iteration);
    put_raw<std::uint8_t>(buf, st.finished ? 1 : 0);
    put_raw<std::uint32_t>(buf, static_cast<std::uint32_t>(st.selected_at.size()));
    for (const auto& [key, it] : st.selected_at) {
        put_string(buf, key.str());
        put_raw<std::int32_t>(buf, it);
    }
    put_raw<std::uint32_t>(buf, static_cast<std::uint32_t>(st.rows.size()));
    for (const auto& r : st.rows) {
        put_raw<std::int32_t>(buf, r.repeat);
        put_raw<std::int32_t>(buf, r.iteration);
        put_raw<std::uint64_t>(buf, static_cast<std::uint64_t>(r.labeled_count));
        put_raw<double>(buf, r.dice);
        put_raw<double>(buf, r.recall);
        put_raw<double>(buf, r.precision);
        put_raw<std::int32_t>(buf, r.epochs);
        put_raw<std::uint64_t>(buf, r.wall_ms);
    }
    save_learner_stream(st.learner, buf);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
    const std::string bytes = buf.str();
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail(ErrorCode::IoError, "short write to " + path);
}

ExperimentState load_experiment_state(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::IoError, "cannot open " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kExptMagic, sizeof(magic)) != 0)
        fail(ErrorCode::CorruptCheckpoint, "bad experiment state magic in " + path);
    std::uint32_t version = get_raw<std::uint32_t>(f);
    if (version != 1) fail(ErrorCode::CorruptCheckpoint, "unsupported experiment state version");

    ExperimentState st;
    st.config_hash = get_raw<std::uint64_t>(f);
    st.repeat = get_raw<std::int32_t>(f);
    st.next_iteration = get_raw<std::int32_t>(f);
    st.finished = get_raw<std::uint8_t>(f) != 0;
    std::uint32_t n_sel = get_raw<std::uint32_t>(f);
    st.selected_at.reserve(n_sel);
    for (std::uint32_t i = 0; i < n_sel; ++i) {
        std::string key = get_string(f);
        std::int32_t it = get_raw<std::int32_t>(f);
        st.selected_at.emplace_back(PairKey::parse(key), it);
    }
    std::uint32_t n_rows = get_raw<std::uint32_t>(f);
    st.rows.reserve(n_rows);
    for (std::uint32_t i = 0; i < n_rows; ++i) {
        IterationRow r;
        r.repeat = get_raw<std::int32_t>(f);
        r.iteration = get_raw<std::int32_t>(f);
        r.labeled_count = static_cast<std::size_t>(get_raw<std::uint64_t>(f));
        r.dice = get_raw<double>(f);
        r.recall = get_raw<double>(f);
        r.precision = get_raw<double>(f);
        r.epochs = get_raw<std::int32_t>(f);
        r.wall_ms = get_raw<std::uint64_t>(f);
        st.rows.push_back(r);
    }
    st.learner = load_learner_stream(f);
    return st;
}

// ---------------------------------------------------------------------------
// the loop
// ---------------------------------------------------------------------------

namespace {

std::vector<TrainItem> collect_labeled_items(const PairPool& pool) {
    std::vector<TrainItem> items;
    items.reserve(pool.labeled.size());
    for (const auto& p : pool.pairs) {
        if (!pool.is_labeled(p.key)) continue;
        items.push_back({&p, &pool.labels.at(p.key)});
    }
    return items;
}

struct LabeledSet {
    PairPool pool;
    std::vector<TrainItem> items;
};

LabeledSet make_labeled_set(const Dataset& d) {
    LabeledSet s;
    s.pool = build_pair_pool(d.all_volumes());
    for (const auto& p : s.pool.pairs) s.pool.mark_labeled(p.key, oracle_label(p.key, d));
    s.items = collect_labeled_items(s.pool);
    return s;
}

std::string state_path(const std::string& out_dir, int repeat) {
    return (fs::path(out_dir) / ("checkpoint_r" + std::to_string(repeat) + ".bin")).string();
}

RepeatResult run_single_repeat(const ExperimentConfig& cfg, const Dataset& train,
                               const std::vector<TrainItem>& val_items, const Dataset& test,
                               int rep, const RunControl& control, bool try_resume) {
    PairPool pool = build_pair_pool(train.all_volumes());
    const std::size_t B = resolve_budget(cfg.budget, pool.size());
    const std::size_t q0 = cfg.q0 == 0 ? B : static_cast<std::size_t>(cfg.q0);
    if (q0 > B) fail(ErrorCode::InvalidConfig, "q0 exceeds the budget");

    const std::uint64_t pool_seed = seed_combine(cfg.seed_pool_init, static_cast<std::uint64_t>(rep));
    const std::uint64_t learner_seed = seed_combine(cfg.seed_learner, static_cast<std::uint64_t>(rep));
    const std::uint64_t strategy_seed = seed_combine(cfg.seed_strategy, static_cast<std::uint64_t>(rep));

    RepeatResult res;
    res.repeat = rep;
    int it = 0;
    Learner learner;
    bool have_learner = false;

    const bool checkpoints = !cfg.out_dir.empty();
    if (try_resume && checkpoints && fs::exists(state_path(cfg.out_dir, rep))) {
        ExperimentState st = load_experiment_state(state_path(cfg.out_dir, rep));
        if (st.config_hash != cfg.config_hash())
            fail(ErrorCode::CorruptCheckpoint, "checkpoint was produced by a different config");
        for (const auto& [key, sel_it] : st.selected_at)
            pool.mark_labeled(key, oracle_label(key, train));
        res.selected_at = st.selected_at;
        res.rows = st.rows;
        learner = st.learner;
        have_learner = true;
        it = st.next_iteration;
        if (st.finished) {
            res.final_learner = std::move(learner);
            return res;
        }
    } else {
        init_labeled(pool, train, q0, pool_seed, &res.selected_at);
    }

    while (true) {
        const auto t0 = std::chrono::steady_clock::now();

        LearnerConfig lcfg = cfg.learner;
        lcfg.init_seed = seed_combine(learner_seed, static_cast<std::uint64_t>(it));
        TrainStats stats;
        std::vector<TrainItem> labeled_items = collect_labeled_items(pool);
        const Learner* warm = (cfg.learner.warm_start && have_learner) ? &learner : nullptr;
        learner = train_learner(lcfg, labeled_items, val_items, warm, &stats);
        have_learner = true;

        IterationRow row;
        row.repeat = rep;
        row.iteration = it;
        row.labeled_count = pool.labeled.size();
        row.epochs = stats.epochs_run;
        const bool is_last = pool.labeled.size() >= B;
        if (cfg.eval_every_iteration || is_last) {
            TestMetrics m = evaluate_testset(
                [&learner](const SlicePair& p) { return learner.predict_proba(assemble_input(p)); },
                test, cfg.threshold, cfg.macro_metrics);
            row.dice = m.dice;
            row.recall = m.recall;
            row.precision = m.precision;
        } else {
            row.dice = row.recall = row.precision = std::numeric_limits<double>::quiet_NaN();
        }
        row.wall_ms = static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                     std::chrono::steady_clock::now() - t0)
                                                     .count());
        res.rows.push_back(row);

        if (is_last) {
            if (checkpoints) {
                ExperimentState st{cfg.config_hash(), rep, it + 1, true,
                                   res.selected_at,    res.rows, learner};
                save_experiment_state(st, state_path(cfg.out_dir, rep));
            }
            break;
        }

        const std::size_t q_it = std::min<std::size_t>(cfg.q, B - pool.labeled.size());
        ScoreVector scores;
        std::vector<PairKey> selected =
            query(cfg.strategy, learner, pool, q_it, strategy_seed, it + 1,
                  cfg.dump_scores ? &scores : nullptr);
        if (cfg.dump_scores && !scores.entries.empty() && checkpoints) {
            fs::path p = fs::path(cfg.out_dir) /
                         ("scores_r" + std::to_string(rep) + "_i" + std::to_string(it + 1) + ".csv");
            write_scores_csv(scores, pool, p.string());
        }
        for (const PairKey& key : selected) {
            pool.mark_labeled(key, oracle_label(key, train));
            res.selected_at.push_back({key, it + 1});
        }

        if (checkpoints) {
            ExperimentState st{cfg.config_hash(), rep, it + 1, false,
                               res.selected_at,    res.rows, learner};
            save_experiment_state(st, state_path(cfg.out_dir, rep));
        }
        if (control.stop_after_iteration && it + 1 > *control.stop_after_iteration) {
            res.aborted = true;
            res.abort_reason = "interrupted by run control";
            return res;
        }
        ++it;
    }

    res.final_learner = std::move(learner);
    return res;
}

}  // namespace

ExperimentLog run_al_loop(const ExperimentConfig& cfg, const Dataset& train, const Dataset& val,
                          const Dataset& test, const RunControl& control) {
    cfg.validate();
    if (cfg.threads > 0) kernels::set_max_threads(cfg.threads);

    LabeledSet val_set = make_labeled_set(val);

    ExperimentLog log;
    for (int rep = 0; rep < cfg.repeats; ++rep) {
        try {
            log.repeats.push_back(
                run_single_repeat(cfg, train, val_set.items, test, rep, control, control.resume));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NonFiniteLoss) throw;
            std::fprintf(stderr, "[longal] repeat %d aborted: %s\n", rep, e.what());
            RepeatResult res;
            res.repeat = rep;
            res.aborted = true;
            res.abort_reason = e.what();
            log.repeats.push_back(std::move(res));
        }
    }
    return log;
}

std::vector<IterationRow> ExperimentLog::mean_rows() const {
    std::vector<IterationRow> out;
    std::size_t max_iters = 0;
    for (const auto& r : repeats)
        if (!r.aborted) max_iters = std::max(max_iters, r.rows.size());
    for (std::size_t i = 0; i < max_iters; ++i) {
        IterationRow mean;
        mean.repeat = -1;
        mean.iteration = static_cast<int>(i);
        int n = 0;
        for (const auto& r : repeats) {
            if (r.aborted || i >= r.rows.size()) continue;
            const IterationRow& row = r.rows[i];
            mean.labeled_count = row.labeled_count;
            mean.dice += row.dice;
            mean.recall += row.recall;
            mean.precision += row.precision;
            mean.epochs += row.epochs;
            mean.wall_ms += row.wall_ms;
            ++n;
        }
        if (n == 0) continue;
        mean.dice /= n;
        mean.recall /= n;
        mean.precision /= n;
        mean.epochs = static_cast<int>(std::llround(static_cast<double>(mean.epochs) / n));
        mean.wall_ms /= static_cast<std::uint64_t>(n);
        out.push_back(mean);
    }
    return out;
}

// ---------------------------------------------------------------------------
// outputs
// ---------------------------------------------------------------------------

namespace {

std::string fmt_metric(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

void write_log_csv(const ExperimentLog& log, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
    f << "repeat,iteration,labeled_count,dice,recall,precision,epochs,wall_ms\n";
    for (const auto& rep : log.repeats) {
        for (const auto& r : rep.rows) {
            f << r.repeat << ',' << r.iteration << ',' << r.labeled_count << ','
              << fmt_metric(r.dice) << ',' << fmt_metric(r.recall) << ',' << fmt_metric(r.precision)
              << ',' << r.epochs << ',' << r.wall_ms << '\n';
        }
    }
}

void write_manifest(const ExperimentConfig& cfg, std::uint64_t dataset_hash,
                    const std::string& path) {
    json m;
    m["format"] = "longal-run-manifest";
    m["version"] = 1;
    json c;
    std::istringstream echo(cfg.echo());
    std::string line;
    while (std::getline(echo, line)) {
        std::size_t eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        c[line.substr(0, eq)] = line.substr(eq + 3);
    }
    m["config"] = c;
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(dataset_hash));
    m["dataset_hash"] = hex;
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(cfg.config_hash()));
    m["config_hash"] = hex;

    std::ofstream f(path, std::ios::trunc);
    if (!f) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
    f << m.dump(2) << "\n";
}

}  // namespace longal
