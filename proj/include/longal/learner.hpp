#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "longal/net.hpp"
#include "longal/types.hpp"

namespace longal {

struct LearnerConfig {
    double lr = 1e-4;          // 5e-4 for full supervision
    int batch_size = 8;        // 4 for the large-pool regime
    int max_epochs = 100;
    int patience = 5;
    double focal_alpha = 1.0;
    double focal_gamma = 2.0;
    double dropout_rate = 0.5;
    int base_channels = 16;
    bool augment_training = true;
    bool warm_start = false;
    std::uint64_t init_seed = 0;

    void validate() const;
};

struct AdamState {
    std::vector<float> m, v;
    std::uint64_t t = 0;

    void init(std::size_t n) {
        m.assign(n, 0.0f);
        v.assign(n, 0.0f);
        t = 0;
    }
    // beta1 = 0.9, beta2 = 0.999, eps = 1e-8
    void step(std::vector<float>& params, const std::vector<float>& grad, double lr);
};

struct Embedding {
    PairKey key;
    std::vector<float> v;
};

struct Learner {
    LearnerConfig cfg;
    Net<float> net;
    AdamState adam;
    int trained_h = 0, trained_w = 0;  // 0 until first training

    static Learner create(const LearnerConfig& cfg);

    // deterministic forward pass, dropout disabled; values in (0,1)
    Image predict_proba(const ModelInput& input) const;

    // n_drop stochastic passes with bottleneck dropout active; pass i is
    // seeded from (seed_base, key, i)
    std::vector<Image> mc_predict(const ModelInput& input, int n_drop, const PairKey& key,
                                  std::uint64_t seed_base) const;

    Embedding embed(const ModelInput& input, const PairKey& key) const;

    void check_input(const ModelInput& input) const;
};

struct TrainItem {
    const SlicePair* pair;
    const ChangeLabel* label;
};

struct TrainStats {
    int epochs_run = 0;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    std::vector<double> val_history;
};

// Mini-batch Adam on focal loss with per-epoch augmentation of the training
// pairs; early stopping on mean validation focal loss; returns the snapshot
// with the best validation loss. Deterministic given (cfg, data).
// Pass warm_from to continue from existing parameters instead of a fresh
// seeded initialization.
Learner train_learner(const LearnerConfig& cfg, const std::vector<TrainItem>& labeled,
                      const std::vector<TrainItem>& val, const Learner* warm_from = nullptr,
                      TrainStats* stats = nullptr);

// Versioned little-endian checkpoint: header, flat f32 parameter vector,
// optimizer state. Round-trips bit-exactly.
void save_learner(const Learner& l, const std::string& path);
Learner load_learner(const std::string& path);

// stream forms, used when a checkpoint is embedded in a larger state file
void save_learner_stream(const Learner& l, std::ostream& f);
Learner load_learner_stream(std::istream& f);

}  // namespace longal
