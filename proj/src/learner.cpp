#include "longal/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "longal/error.hpp"
#include "longal/focal.hpp"
#include "longal/pairing.hpp"
#include "longal/preprocess.hpp"

namespace longal {

void LearnerConfig::validate() const {
    if (lr <= 0.0) fail(ErrorCode::InvalidConfig, "lr must be > 0");
    if (batch_size < 1) fail(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    if (max_epochs < 1) fail(ErrorCode::InvalidConfig, "max_epochs must be >= 1");
    if (patience < 1 || patience >= max_epochs)
        fail(ErrorCode::InvalidConfig, "patience must satisfy 1 <= patience < max_epochs");
    if (focal_gamma < 0.0) fail(ErrorCode::InvalidConfig, "focal_gamma must be >= 0");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        fail(ErrorCode::InvalidConfig, "dropout_rate must lie in [0,1)");
    if (base_channels < 1) fail(ErrorCode::InvalidConfig, "base_channels must be >= 1");
}

void AdamState::step(std::vector<float>& params, const std::vector<float>& grad, double lr) {
    const float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;
    ++t;
    const float corr1 = 1.0f - std::pow(beta1, static_cast<float>(t));
    const float corr2 = 1.0f - std::pow(beta2, static_cast<float>(t));
    const float flr = static_cast<float>(lr);
    for (std::size_t i = 0; i < params.size(); ++i) {
        float g = grad[i];
        m[i] = beta1 * m[i] + (1.0f - beta1) * g;
        v[i] = beta2 * v[i] + (1.0f - beta2) * g * g;
        float mhat = m[i] / corr1;
        float vhat = v[i] / corr2;
        params[i] -= flr * mhat / (std::sqrt(vhat) + eps);
    }
}

Learner Learner::create(const LearnerConfig& cfg) {
    cfg.validate();
    Learner l;
    l.cfg = cfg;
    l.net = Net<float>::create(cfg.base_channels, cfg.dropout_rate, cfg.init_seed);
    l.adam.init(l.net.param_count());
    return l;
}

void Learner::check_input(const ModelInput& input) const {
    if (input.h < 4 || input.w < 4 || input.h % 4 != 0 || input.w % 4 != 0)
        fail(ErrorCode::ShapeMismatch, "input dims must be positive multiples of 4");
    if (input.data.size() != static_cast<std::size_t>(3) * input.h * input.w)
        fail(ErrorCode::ShapeMismatch, "input is not 3 x h x w");
    if (trained_h > 0 && (input.h != trained_h || input.w != trained_w))
        fail(ErrorCode::ShapeMismatch, "input dims do not match training dims");
}

Image Learner::predict_proba(const ModelInput& input) const {
    check_input(input);
    NetWorkspace<float> ws;
    net.forward(input.data.data(), input.h, input.w, ws, DropoutMode::Off, 0);
    Image out(input.h, input.w);
    std::copy(ws.p.v.begin(), ws.p.v.end(), out.v.begin());
    return out;
}

std::vector<Image> Learner::mc_predict(const ModelInput& input, int n_drop, const PairKey& key,
                                       std::uint64_t seed_base) const {
    if (n_drop < 1) fail(ErrorCode::InsufficientPasses, "n_drop must be >= 1");
    check_input(input);
    std::vector<Image> passes(n_drop);
    std::uint64_t key_seed = seed_combine_str(seed_base, key.str());
    for (int i = 0; i < n_drop; ++i) {
        NetWorkspace<float> ws;
        net.forward(input.data.data(), input.h, input.w, ws, DropoutMode::Active,
                    seed_combine(key_seed, static_cast<std::uint64_t>(i)));
        Image out(input.h, input.w);
        std::copy(ws.p.v.begin(), ws.p.v.end(), out.v.begin());
        passes[i] = std::move(out);
    }
    return passes;
}

Embedding Learner::embed(const ModelInput& input, const PairKey& key) const {
    check_input(input);
    NetWorkspace<float> ws;
    net.forward(input.data.data(), input.h, input.w, ws, DropoutMode::Off, 0);
    Embedding e;
    e.key = key;
    e.v = net.embed_from(ws);
    return e;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

namespace {

double validation_loss(const Learner& l, const std::vector<TrainItem>& val,
                       std::vector<NetWorkspace<float>>& slots) {
    const int n = static_cast<int>(val.size());
    std::vector<double> losses(n);
#pragma omp parallel for schedule(dynamic) num_threads(static_cast<int>(slots.size()))
    for (int i = 0; i < n; ++i) {
#ifdef _OPENMP
        NetWorkspace<float>& ws = slots[omp_get_thread_num() % slots.size()];
#else
        NetWorkspace<float>& ws = slots[0];
#endif
        ModelInput input = assemble_input(*val[i].pair);
        l.net.forward(input.data.data(), input.h, input.w, ws, DropoutMode::Off, 0);
        losses[i] = focal_loss_map(ws.p.v.data(), val[i].label->mask.v.data(), ws.p.size(),
                                   l.cfg.focal_alpha, l.cfg.focal_gamma);
    }
    double acc = 0.0;
    for (double x : losses) acc += x;
    return acc / static_cast<double>(n);
}

}  // namespace

Learner train_learner(const LearnerConfig& cfg, const std::vector<TrainItem>& labeled,
                      const std::vector<TrainItem>& val, const Learner* warm_from,
                      TrainStats* stats) {
    cfg.validate();
    if (labeled.empty()) fail(ErrorCode::EmptyLabeledSet, "no labeled pairs to train on");
    if (val.empty()) fail(ErrorCode::EmptyLabeledSet, "validation set is empty");

    Learner learner;
    if (warm_from) {
        if (warm_from->net.base != cfg.base_channels)
            fail(ErrorCode::InvalidConfig, "warm start network width differs from config");
        learner = *warm_from;
        learner.cfg = cfg;
    } else {
        learner = Learner::create(cfg);
    }
    const int h = labeled.front().pair->baseline.h;
    const int w = labeled.front().pair->baseline.w;
    if (h % 4 != 0 || w % 4 != 0)
        fail(ErrorCode::ShapeMismatch, "training dims must be multiples of 4");
    if (cfg.augment_training && h != w)
        fail(ErrorCode::ShapeMismatch, "augmentation rotations require square training slices");
    for (const auto& item : labeled) {
        if (item.pair->baseline.h != h || item.pair->baseline.w != w)
            fail(ErrorCode::ShapeMismatch, "training pairs have mixed dims");
        if (item.label->mask.h != h || item.label->mask.w != w)
            fail(ErrorCode::ShapeMismatch, "label dims do not match pair dims");
    }
    for (const auto& item : val) {
        if (item.pair->baseline.h != h || item.pair->baseline.w != w)
            fail(ErrorCode::ShapeMismatch, "validation pairs have mixed dims");
        if (item.label->mask.h != h || item.label->mask.w != w)
            fail(ErrorCode::ShapeMismatch, "validation label dims do not match");
    }
    learner.trained_h = h;
    learner.trained_w = w;

    const int n = static_cast<int>(labeled.size());
    const int batch = std::min(cfg.batch_size, n);
    const std::size_t np = learner.net.param_count();

#ifdef _OPENMP
    const int max_slots = std::max(1, omp_get_max_threads());
#else
    const int max_slots = 1;
#endif
    const int n_slots = std::min(max_slots, batch);
    std::vector<NetWorkspace<float>> slots(std::max(n_slots, 1));
    std::vector<std::vector<float>> slot_grads(batch, std::vector<float>(np));
    std::vector<double> slot_losses(batch);

    std::vector<float> grad(np);
    std::vector<float> best_params = learner.net.params;
    AdamState best_adam = learner.adam;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int since_best = 0;
    int epochs_run = 0;
    if (stats) stats->val_history.clear();

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        epochs_run = epoch;
        Rng shuffle_rng(seed_combine(cfg.init_seed, 0x7368756646ULL, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        for (int start = 0; start < n; start += batch) {
            const int m = std::min(batch, n - start);
            const double scale = 1.0 / (static_cast<double>(h) * w * m);

#pragma omp parallel for schedule(dynamic) num_threads(n_slots)
            for (int s = 0; s < m; ++s) {
#ifdef _OPENMP
                NetWorkspace<float>& ws = slots[omp_get_thread_num() % slots.size()];
#else
                NetWorkspace<float>& ws = slots[0];
#endif
                const TrainItem& item = labeled[order[start + s]];
                SlicePair pair = *item.pair;
                ChangeLabel label = *item.label;
                if (cfg.augment_training) {
                    Rng aug_rng(seed_combine(seed_combine_str(cfg.init_seed, item.pair->key.str()),
                                             static_cast<std::uint64_t>(epoch)));
                    auto aug = augment(pair, label, aug_rng);
                    pair = std::move(aug.first);
                    label = std::move(aug.second);
                }
                ModelInput input = assemble_input(pair);
                std::uint64_t drop_seed = seed_combine(cfg.init_seed, 0x64726f70ULL,
                                                       static_cast<std::uint64_t>(epoch),
                                                       static_cast<std::uint64_t>(start + s));
                learner.net.forward(input.data.data(), h, w, ws, DropoutMode::Active, drop_seed);
                slot_losses[s] = focal_loss_map(ws.p.v.data(), label.mask.v.data(), ws.p.size(),
                                                cfg.focal_alpha, cfg.focal_gamma);
                ws.g_p.resize(1, h, w);
                focal_loss_backward_map(ws.p.v.data(), label.mask.v.data(), ws.p.size(),
                                        cfg.focal_alpha, cfg.focal_gamma, scale, ws.g_p.v.data());
                learner.net.backward(ws);
                slot_grads[s] = ws.g_params;
            }

            double batch_loss = 0.0;
            for (int s = 0; s < m; ++s) batch_loss += slot_losses[s];
            batch_loss /= m;
            if (!std::isfinite(batch_loss))
                fail(ErrorCode::NonFiniteLoss,
                     "training loss became non-finite at epoch " + std::to_string(epoch));

            // fixed-order reduction across the batch keeps runs reproducible
            std::fill(grad.begin(), grad.end(), 0.0f);
            for (int s = 0; s < m; ++s) {
                const std::vector<float>& g = slot_grads[s];
                for (std::size_t i = 0; i < np; ++i) grad[i] += g[i];
            }
            learner.adam.step(learner.net.params, grad, cfg.lr);
        }

        double val_loss = validation_loss(learner, val, slots);
        if (!std::isfinite(val_loss))
            fail(ErrorCode::NonFiniteLoss,
                 "validation loss became non-finite at epoch " + std::to_string(epoch));
        if (stats) stats->val_history.push_back(val_loss);

        if (val_loss < best_val) {
            best_val = val_loss;
            best_params = learner.net.params;
            best_adam = learner.adam;
            best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= cfg.patience) break;
        }
    }

    learner.net.params = std::move(best_params);
    learner.adam = std::move(best_adam);
    if (stats) {
        stats->epochs_run = epochs_run;
        stats->best_epoch = best_epoch;
        stats->best_val_loss = best_val;
    }
    return learner;
}

// ---------------------------------------------------------------------------
// checkpoint io
// ---------------------------------------------------------------------------

namespace {

constexpr char kCkptMagic[8] = {'L', 'A', 'L', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ostream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& f) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) fail(ErrorCode::CorruptCheckpoint, "checkpoint truncated");
    return v;
}

}  // namespace

void save_learner_stream(const Learner& l, std::ostream& f) {
    f.write(kCkptMagic, sizeof(kCkptMagic));
    put<std::uint32_t>(f, 1);  // version
    put<std::uint32_t>(f, static_cast<std::uint32_t>(l.net.base));
    put<std::uint32_t>(f, static_cast<std::uint32_t>(l.net.in_ch));
    put<float>(f, static_cast<float>(l.net.dropout_rate));
    put<std::uint32_t>(f, static_cast<std::uint32_t>(l.trained_h));
    put<std::uint32_t>(f, static_cast<std::uint32_t>(l.trained_w));
    put<std::uint64_t>(f, static_cast<std::uint64_t>(l.net.param_count()));
    f.write(reinterpret_cast<const char*>(l.net.params.data()),
            static_cast<std::streamsize>(l.net.params.size() * sizeof(float)));
    put<std::uint8_t>(f, 1);  // optimizer state present
    f.write(reinterpret_cast<const char*>(l.adam.m.data()),
            static_cast<std::streamsize>(l.adam.m.size() * sizeof(float)));
    f.write(reinterpret_cast<const char*>(l.adam.v.data()),
            static_cast<std::streamsize>(l.adam.v.size() * sizeof(float)));
    put<std::uint64_t>(f, l.adam.t);
}

Learner load_learner_stream(std::istream& f) {
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        fail(ErrorCode::CorruptCheckpoint, "bad checkpoint magic");
    std::uint32_t version = get<std::uint32_t>(f);
    if (version != 1) fail(ErrorCode::CorruptCheckpoint, "unsupported checkpoint version");
    std::uint32_t base = get<std::uint32_t>(f);
    std::uint32_t in_ch = get<std::uint32_t>(f);
    float dropout = get<float>(f);
    std::uint32_t th = get<std::uint32_t>(f);
    std::uint32_t tw = get<std::uint32_t>(f);
    std::uint64_t np = get<std::uint64_t>(f);

    LearnerConfig cfg;
    cfg.base_channels = static_cast<int>(base);
    cfg.dropout_rate = dropout;
    Learner l = Learner::create(cfg);
    if (l.net.in_ch != static_cast<int>(in_ch) || l.net.param_count() != np)
        fail(ErrorCode::CorruptCheckpoint, "checkpoint parameter count mismatch");
    l.trained_h = static_cast<int>(th);
    l.trained_w = static_cast<int>(tw);
    f.read(reinterpret_cast<char*>(l.net.params.data()),
           static_cast<std::streamsize>(np * sizeof(float)));
    if (!f) fail(ErrorCode::CorruptCheckpoint, "checkpoint truncated");
    std::uint8_t has_adam = get<std::uint8_t>(f);
    if (has_adam) {
        f.read(reinterpret_cast<char*>(l.adam.m.data()),
               static_cast<std::streamsize>(np * sizeof(float)));
        f.read(reinterpret_cast<char*>(l.adam.v.data()),
               static_cast<std::streamsize>(np * sizeof(float)));
        if (!f) fail(ErrorCode::CorruptCheckpoint, "checkpoint truncated");
        l.adam.t = get<std::uint64_t>(f);
    }
    return l;
}

void save_learner(const Learner& l, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
    save_learner_stream(l, f);
    if (!f) fail(ErrorCode::IoError, "short write to " + path);
}

Learner load_learner(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::IoError, "cannot open " + path);
    return load_learner_stream(f);
}

}  // namespace longal
