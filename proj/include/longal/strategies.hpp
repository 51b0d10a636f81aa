#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "longal/learner.hpp"
#include "longal/rng.hpp"
#include "longal/types.hpp"

namespace longal {

enum class StrategyName {
    Random,
    LeastConfidence,
    Margin,
    Entropy,
    Bald,
    KCenter,
    ClusterMargin,
    Hybrid,
};

StrategyName strategy_from_string(const std::string& s);
std::string strategy_to_string(StrategyName s);

enum class AggregateMode { Mean, Max, TopkMean };

struct StrategyConfig {
    StrategyName name = StrategyName::Random;
    int n_drop = 10;
    int n_clusters = 20;
    std::uint64_t cluster_seed = 42;
    int candidate_multiplier = 10;  // cluster-margin prefilter n = min(q * mult, |D_U|)
    int hybrid_prefilter = 500;
    double hybrid_diversity_weight = 2.0;
    double hybrid_density_weight = 1.0;
    AggregateMode aggregate = AggregateMode::Mean;
    int topk_px = 16;
    int mi_bins = 16;
    bool cluster_margin_inverted = false;  // ablation: uncertainty pass first

    void validate() const;
};

// Per-pair informativeness, higher = more informative. Entries cover exactly
// the unlabeled set, in canonical pool order.
struct ScoreVector {
    std::string strategy;
    int iteration = 0;
    std::vector<std::pair<PairKey, double>> entries;
};

// aligned key/value holders for learner outputs over D_U
struct ProbMapSet {
    std::vector<PairKey> keys;
    std::vector<Image> maps;
};

struct McStackSet {
    std::vector<PairKey> keys;
    std::vector<std::vector<Image>> stacks;
};

struct EmbeddingSet {
    std::vector<PairKey> keys;
    std::vector<std::vector<float>> vecs;
};

// ---------------------------------------------------------------------------
// pixel-level closed forms (double precision)
// ---------------------------------------------------------------------------

double lc_pixel_score(double p);       // 1 - max(p, 1-p)
double margin_pixel_score(double p);   // 1 - |2p - 1|
double entropy_pixel(double p);        // -p ln p - (1-p) ln(1-p), natural log
double binary_entropy(double p);       // alias of entropy_pixel

// BALD mutual information per pixel: H(mean of passes) - mean of H(pass),
// clamped at zero against rounding.
double bald_pixel_mi(const double* pass_probs, int n_passes);

double aggregate_pixels(const std::vector<double>& pixel_scores, AggregateMode mode, int topk_px);

// ---------------------------------------------------------------------------
// scorers and selectors
// ---------------------------------------------------------------------------

ScoreVector score_least_confidence(const ProbMapSet& probs, const StrategyConfig& cfg);
ScoreVector score_margin(const ProbMapSet& probs, const StrategyConfig& cfg);
ScoreVector score_entropy(const ProbMapSet& probs, const StrategyConfig& cfg);
ScoreVector score_bald(const McStackSet& stacks, const StrategyConfig& cfg);

// top q by (score desc, pool index asc)
std::vector<PairKey> top_q_keys(const ScoreVector& scores, std::size_t q, const PairPool& pool);

// greedy k-center: repeatedly pick the unlabeled point farthest from its
// nearest labeled-or-selected center; ties resolved by pool order
std::vector<PairKey> select_kcenter(const EmbeddingSet& unlabeled, const EmbeddingSet& labeled,
                                    std::size_t q, const PairPool& pool);

std::vector<PairKey> select_cluster_margin(const EmbeddingSet& unlabeled,
                                           const ScoreVector& margin_scores, std::size_t q,
                                           const StrategyConfig& cfg, const PairPool& pool);

std::vector<PairKey> select_hybrid(const McStackSet& stacks, const EmbeddingSet& unlabeled,
                                   const EmbeddingSet& labeled, std::size_t q,
                                   const StrategyConfig& cfg, const PairPool& pool);

std::vector<PairKey> select_random(const PairPool& pool, std::size_t q, Rng& rng);

// Dispatches to the configured strategy, running whatever learner inference
// it needs over D_U. Returned keys are distinct, unlabeled, and exactly q
// when q <= |D_U|.
std::vector<PairKey> query(const StrategyConfig& cfg, const Learner& learner, const PairPool& pool,
                           std::size_t q, std::uint64_t strategy_seed, int iteration,
                           ScoreVector* scores_out = nullptr);

// audit export: pair_key,score,rank
void write_scores_csv(const ScoreVector& scores, const PairPool& pool, const std::string& path);

// ---------------------------------------------------------------------------
// k-means (Lloyd), seeded distinct-point init, deterministic
// ---------------------------------------------------------------------------

struct KMeansResult {
    std::vector<int> assignment;                  // point -> cluster
    std::vector<std::vector<double>> centroids;   // k x D
    int iterations = 0;
};

KMeansResult kmeans(const std::vector<std::vector<float>>& points, int k, std::uint64_t seed,
                    int max_iters = 300);

// quantized-embedding empirical mutual information (hybrid diversity term)
double quantized_mi(const std::vector<float>& a, const std::vector<float>& b, int bins);

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b);

}  // namespace longal
