#include "longal/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "longal/error.hpp"
#include "longal/pairing.hpp"

namespace longal {

StrategyName strategy_from_string(const std::string& s) {
    if (s == "random") return StrategyName::Random;
    if (s == "least_confidence") return StrategyName::LeastConfidence;
    if (s == "margin") return StrategyName::Margin;
    if (s == "entropy") return StrategyName::Entropy;
    if (s == "bald") return StrategyName::Bald;
    if (s == "kcenter" || s == "coreset") return StrategyName::KCenter;
    if (s == "cluster_margin") return StrategyName::ClusterMargin;
    if (s == "hybrid") return StrategyName::Hybrid;
    fail(ErrorCode::InvalidConfig, "unknown strategy: " + s);
}

std::string strategy_to_string(StrategyName s) {
    switch (s) {
        case StrategyName::Random: return "random";
        case StrategyName::LeastConfidence: return "least_confidence";
        case StrategyName::Margin: return "margin";
        case StrategyName::Entropy: return "entropy";
        case StrategyName::Bald: return "bald";
        case StrategyName::KCenter: return "kcenter";
        case StrategyName::ClusterMargin: return "cluster_margin";
        case StrategyName::Hybrid: return "hybrid";
    }
    return "?";
}

void StrategyConfig::validate() const {
    if (n_drop < 1) fail(ErrorCode::InvalidConfig, "n_drop must be >= 1");
    if (n_clusters < 1) fail(ErrorCode::InvalidConfig, "n_clusters must be >= 1");
    if (candidate_multiplier < 1) fail(ErrorCode::InvalidConfig, "candidate_multiplier must be >= 1");
    if (hybrid_prefilter < 1) fail(ErrorCode::InvalidConfig, "hybrid_prefilter must be >= 1");
    if (hybrid_diversity_weight <= 0.0 || hybrid_density_weight <= 0.0)
        fail(ErrorCode::InvalidConfig, "hybrid weights must be > 0");
    if (topk_px < 1) fail(ErrorCode::InvalidConfig, "topk_px must be >= 1");
    if (mi_bins < 2) fail(ErrorCode::InvalidConfig, "mi_bins must be >= 2");
}

// ---------------------------------------------------------------------------
// pixel scores
// ---------------------------------------------------------------------------

double lc_pixel_score(double p) {
    double conf = p > 1.0 - p ? p : 1.0 - p;
    return 1.0 - conf;
}

double margin_pixel_score(double p) { return 1.0 - std::fabs(2.0 * p - 1.0); }

double entropy_pixel(double p) {
    double acc = 0.0;
    if (p > 0.0) acc -= p * std::log(p);
    if (p < 1.0) acc -= (1.0 - p) * std::log(1.0 - p);
    return acc;
}

double binary_entropy(double p) { return entropy_pixel(p); }

double bald_pixel_mi(const double* pass_probs, int n_passes) {
    double mean = 0.0;
    for (int i = 0; i < n_passes; ++i) mean += pass_probs[i];
    mean /= n_passes;
    double mean_h = 0.0;
    for (int i = 0; i < n_passes; ++i) mean_h += entropy_pixel(pass_probs[i]);
    mean_h /= n_passes;
    double mi = entropy_pixel(mean) - mean_h;
    return mi > 0.0 ? mi : 0.0;
}

double aggregate_pixels(const std::vector<double>& pixel_scores, AggregateMode mode, int topk_px) {
    if (pixel_scores.empty()) return 0.0;
    switch (mode) {
        case AggregateMode::Mean: {
            double acc = 0.0;
            for (double s : pixel_scores) acc += s;
            return acc / static_cast<double>(pixel_scores.size());
        }
        case AggregateMode::Max: {
            double best = pixel_scores[0];
            for (double s : pixel_scores) best = s > best ? s : best;
            return best;
        }
        case AggregateMode::TopkMean: {
            std::vector<double> sorted = pixel_scores;
            std::size_t k = std::min<std::size_t>(topk_px, sorted.size());
            std::partial_sort(sorted.begin(), sorted.begin() + k, sorted.end(),
                              std::greater<double>());
            double acc = 0.0;
            for (std::size_t i = 0; i < k; ++i) acc += sorted[i];
            return acc / static_cast<double>(k);
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// scorers
// ---------------------------------------------------------------------------

namespace {

template <typename PixelFn>
ScoreVector score_probmaps(const ProbMapSet& probs, const StrategyConfig& cfg,
                           const char* strategy, PixelFn&& fn) {
    if (probs.keys.empty()) fail(ErrorCode::EmptyUnlabeledSet, "no unlabeled pairs to score");
    ScoreVector out;
    out.strategy = strategy;
    out.entries.resize(probs.keys.size());
    std::vector<double> px;
    for (std::size_t i = 0; i < probs.keys.size(); ++i) {
        const Image& map = probs.maps[i];
        px.resize(map.size());
        for (std::size_t j = 0; j < map.size(); ++j) px[j] = fn(static_cast<double>(map.v[j]));
        out.entries[i] = {probs.keys[i], aggregate_pixels(px, cfg.aggregate, cfg.topk_px)};
    }
    return out;
}

}  // namespace

ScoreVector score_least_confidence(const ProbMapSet& probs, const StrategyConfig& cfg) {
    return score_probmaps(probs, cfg, "least_confidence", lc_pixel_score);
}

ScoreVector score_margin(const ProbMapSet& probs, const StrategyConfig& cfg) {
    return score_probmaps(probs, cfg, "margin", margin_pixel_score);
}

ScoreVector score_entropy(const ProbMapSet& probs, const StrategyConfig& cfg) {
    return score_probmaps(probs, cfg, "entropy", entropy_pixel);
}

ScoreVector score_bald(const McStackSet& stacks, const StrategyConfig& cfg) {
    if (stacks.keys.empty()) fail(ErrorCode::EmptyUnlabeledSet, "no unlabeled pairs to score");
    ScoreVector out;
    out.strategy = "bald";
    out.entries.resize(stacks.keys.size());
    std::vector<double> px, passes;
    for (std::size_t i = 0; i < stacks.keys.size(); ++i) {
        const auto& stack = stacks.stacks[i];
        if (stack.size() < 2)
            fail(ErrorCode::InsufficientPasses, "BALD needs at least 2 MC passes");
        const std::size_t n = stack[0].size();
        px.resize(n);
        passes.resize(stack.size());
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t s = 0; s < stack.size(); ++s)
                passes[s] = static_cast<double>(stack[s].v[j]);
            px[j] = bald_pixel_mi(passes.data(), static_cast<int>(passes.size()));
        }
        out.entries[i] = {stacks.keys[i], aggregate_pixels(px, cfg.aggregate, cfg.topk_px)};
    }
    return out;
}

// ---------------------------------------------------------------------------
// selection helpers
// ---------------------------------------------------------------------------

namespace {

std::size_t pool_rank(const PairPool& pool, const PairKey& k) {
    auto it = pool.index_of.find(k);
    return it == pool.index_of.end() ? pool.pairs.size() : it->second;
}

// indices into `entries`, ordered by (score desc, pool index asc)
std::vector<std::size_t> rank_entries(const ScoreVector& scores, const PairPool& pool) {
    std::vector<std::size_t> idx(scores.entries.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        double sa = scores.entries[a].second, sb = scores.entries[b].second;
        if (sa != sb) return sa > sb;
        return pool_rank(pool, scores.entries[a].first) < pool_rank(pool, scores.entries[b].first);
    });
    return idx;
}

double sq_euclid(const std::vector<float>& a, const std::vector<float>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

}  // namespace

std::vector<PairKey> top_q_keys(const ScoreVector& scores, std::size_t q, const PairPool& pool) {
    if (q > scores.entries.size())
        fail(ErrorCode::EmptyUnlabeledSet, "q exceeds the unlabeled pool");
    auto idx = rank_entries(scores, pool);
    std::vector<PairKey> out;
    out.reserve(q);
    for (std::size_t i = 0; i < q; ++i) out.push_back(scores.entries[idx[i]].first);
    return out;
}

std::vector<PairKey> select_kcenter(const EmbeddingSet& unlabeled, const EmbeddingSet& labeled,
                                    std::size_t q, const PairPool& pool) {
    if (unlabeled.keys.empty()) fail(ErrorCode::EmptyUnlabeledSet, "no unlabeled embeddings");
    if (q > unlabeled.keys.size()) fail(ErrorCode::EmptyUnlabeledSet, "q exceeds the unlabeled pool");
    const std::size_t n = unlabeled.keys.size();
    for (const auto& e : labeled.vecs)
        if (e.size() != unlabeled.vecs[0].size())
            fail(ErrorCode::DimensionMismatch, "embedding dims differ");

    // canonical presentation order
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pool_rank(pool, unlabeled.keys[a]) < pool_rank(pool, unlabeled.keys[b]);
    });

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n, inf);  // squared distance to nearest center
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& c : labeled.vecs) {
            double d = sq_euclid(unlabeled.vecs[i], c);
            if (d < dist[i]) dist[i] = d;
        }
    }
    std::vector<bool> taken(n, false);
    std::vector<PairKey> out;
    out.reserve(q);
    for (std::size_t step = 0; step < q; ++step) {
        std::size_t best = n;
        double best_d = -1.0;
        for (std::size_t oi = 0; oi < n; ++oi) {
            std::size_t i = order[oi];
            if (taken[i]) continue;
            double d = dist[i];
            if (best == n || d > best_d) {
                best = i;
                best_d = d;
            }
        }
        taken[best] = true;
        out.push_back(unlabeled.keys[best]);
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            double d = sq_euclid(unlabeled.vecs[i], unlabeled.vecs[best]);
            if (d < dist[i]) dist[i] = d;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

KMeansResult kmeans(const std::vector<std::vector<float>>& points, int k, std::uint64_t seed,
                    int max_iters) {
    if (points.empty()) fail(ErrorCode::EmptyUnlabeledSet, "kmeans on empty point set");
    const int n = static_cast<int>(points.size());
    const int dim = static_cast<int>(points[0].size());
    k = std::min(k, n);

    KMeansResult res;
    res.centroids.assign(k, std::vector<double>(dim, 0.0));
    Rng rng(seed);
    auto init_idx = rng.sample_without_replacement(n, k);
    for (int c = 0; c < k; ++c)
        for (int d = 0; d < dim; ++d) res.centroids[c][d] = points[init_idx[c]][d];

    res.assignment.assign(n, -1);
    std::vector<int> counts(k, 0);

    auto dist_to = [&](int i, int c) {
        double acc = 0.0;
        for (int d = 0; d < dim; ++d) {
            double diff = static_cast<double>(points[i][d]) - res.centroids[c][d];
            acc += diff * diff;
        }
        return acc;
    };

    for (int iter = 0; iter < max_iters; ++iter) {
        res.iterations = iter + 1;
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = dist_to(i, 0);
            for (int c = 1; c < k; ++c) {
                double d = dist_to(i, c);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (res.assignment[i] != best) {
                res.assignment[i] = best;
                changed = true;
            }
        }

        // re-seed empty clusters to the point farthest from its centroid
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) ++counts[res.assignment[i]];
        std::vector<bool> reseeded(n, false);
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            int far = -1;
            double far_d = -1.0;
            for (int i = 0; i < n; ++i) {
                if (reseeded[i] || counts[res.assignment[i]] <= 1) continue;
                double d = dist_to(i, res.assignment[i]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far < 0) continue;
            --counts[res.assignment[far]];
            res.assignment[far] = c;
            counts[c] = 1;
            reseeded[far] = true;
            changed = true;
        }

        if (!changed && iter > 0) break;

        // centroid update, fixed member order
        for (int c = 0; c < k; ++c) std::fill(res.centroids[c].begin(), res.centroids[c].end(), 0.0);
        for (int i = 0; i < n; ++i) {
            auto& cen = res.centroids[res.assignment[i]];
            for (int d = 0; d < dim; ++d) cen[d] += points[i][d];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (int d = 0; d < dim; ++d) res.centroids[c][d] /= counts[c];
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// cluster margin
// ---------------------------------------------------------------------------

std::vector<PairKey> select_cluster_margin(const EmbeddingSet& unlabeled,
                                           const ScoreVector& margin_scores, std::size_t q,
                                           const StrategyConfig& cfg, const PairPool& pool) {
    if (unlabeled.keys.empty()) fail(ErrorCode::EmptyUnlabeledSet, "no unlabeled embeddings");
    const std::size_t n = unlabeled.keys.size();
    if (q > n) fail(ErrorCode::EmptyUnlabeledSet, "q exceeds the unlabeled pool");

    // align margin scores to the embedding set
    std::vector<double> score(n, 0.0);
    {
        std::map<PairKey, double> lut;
        for (const auto& [k, s] : margin_scores.entries) lut[k] = s;
        for (std::size_t i = 0; i < n; ++i) {
            auto it = lut.find(unlabeled.keys[i]);
            if (it == lut.end())
                fail(ErrorCode::DimensionMismatch, "margin score missing for " + unlabeled.keys[i].str());
            score[i] = it->second;
        }
    }

    const int k = std::min<int>(cfg.n_clusters, static_cast<int>(n));
    KMeansResult km = kmeans(unlabeled.vecs, k, cfg.cluster_seed);

    // members per cluster, each ordered by (margin score desc, pool idx asc)
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < n; ++i) members[km.assignment[i]].push_back(i);
    for (auto& ms : members) {
        std::sort(ms.begin(), ms.end(), [&](std::size_t a, std::size_t b) {
            if (score[a] != score[b]) return score[a] > score[b];
            return pool_rank(pool, unlabeled.keys[a]) < pool_rank(pool, unlabeled.keys[b]);
        });
    }
    // cluster visit order: ascending (size, cluster id)
    std::vector<int> cluster_order(k);
    std::iota(cluster_order.begin(), cluster_order.end(), 0);
    std::sort(cluster_order.begin(), cluster_order.end(), [&](int a, int b) {
        if (members[a].size() != members[b].size()) return members[a].size() < members[b].size();
        return a < b;
    });

    const std::size_t n_cand = std::min<std::size_t>(q * static_cast<std::size_t>(cfg.candidate_multiplier), n);

    auto round_robin = [&](const std::vector<bool>& eligible, std::size_t want) {
        std::vector<std::size_t> cursor(k, 0);
        std::vector<std::size_t> drawn;
        drawn.reserve(want);
        while (drawn.size() < want) {
            bool any = false;
            for (int c : cluster_order) {
                auto& ms = members[c];
                while (cursor[c] < ms.size() && !eligible[ms[cursor[c]]]) ++cursor[c];
                if (cursor[c] < ms.size()) {
                    drawn.push_back(ms[cursor[c]]);
                    ++cursor[c];
                    any = true;
                    if (drawn.size() == want) break;
                }
            }
            if (!any) break;
        }
        return drawn;
    };

    std::vector<PairKey> out;
    out.reserve(q);
    if (!cfg.cluster_margin_inverted) {
        // diversity pass first: round-robin candidates, then uncertainty top-q
        std::vector<bool> all(n, true);
        std::vector<std::size_t> cand = round_robin(all, n_cand);
        std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
            if (score[a] != score[b]) return score[a] > score[b];
            return pool_rank(pool, unlabeled.keys[a]) < pool_rank(pool, unlabeled.keys[b]);
        });
        for (std::size_t i = 0; i < q; ++i) out.push_back(unlabeled.keys[cand[i]]);
    } else {
        // original order: uncertainty prefilter, then cluster round-robin
        std::vector<std::size_t> by_score(n);
        std::iota(by_score.begin(), by_score.end(), 0);
        std::sort(by_score.begin(), by_score.end(), [&](std::size_t a, std::size_t b) {
            if (score[a] != score[b]) return score[a] > score[b];
            return pool_rank(pool, unlabeled.keys[a]) < pool_rank(pool, unlabeled.keys[b]);
        });
        std::vector<bool> eligible(n, false);
        for (std::size_t i = 0; i < n_cand; ++i) eligible[by_score[i]] = true;
        std::vector<std::size_t> picked = round_robin(eligible, q);
        for (std::size_t i : picked) out.push_back(unlabeled.keys[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// hybrid
// ---------------------------------------------------------------------------

namespace {

std::vector<int> quantize_vec(const std::vector<float>& v, int bins) {
    float lo = v[0], hi = v[0];
    for (float x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    std::vector<int> out(v.size(), 0);
    if (!(hi > lo)) return out;  // degenerate: everything in bin 0
    const double span = static_cast<double>(hi) - lo;
    for (std::size_t i = 0; i < v.size(); ++i) {
        int b = static_cast<int>((static_cast<double>(v[i]) - lo) / span * bins);
        if (b >= bins) b = bins - 1;
        if (b < 0) b = 0;
        out[i] = b;
    }
    return out;
}

}  // namespace

double quantized_mi(const std::vector<float>& a, const std::vector<float>& b, int bins) {
    if (a.size() != b.size() || a.empty())
        fail(ErrorCode::DimensionMismatch, "MI needs equal-length embeddings");
    const std::vector<int> qa = quantize_vec(a, bins);
    const std::vector<int> qb = quantize_vec(b, bins);
    const double n = static_cast<double>(a.size());
    std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
    std::vector<double> pa(bins, 0.0), pb(bins, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[static_cast<std::size_t>(qa[i]) * bins + qb[i]] += 1.0;
        pa[qa[i]] += 1.0;
        pb[qb[i]] += 1.0;
    }
    double mi = 0.0;
    for (int x = 0; x < bins; ++x) {
        for (int y = 0; y < bins; ++y) {
            double pj = joint[static_cast<std::size_t>(x) * bins + y] / n;
            if (pj <= 0.0) continue;
            mi += pj * std::log(pj / ((pa[x] / n) * (pb[y] / n)));
        }
    }
    return mi > 0.0 ? mi : 0.0;
}

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size()) fail(ErrorCode::DimensionMismatch, "cosine needs equal dims");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<PairKey> select_hybrid(const McStackSet& stacks, const EmbeddingSet& unlabeled,
                                   const EmbeddingSet& labeled, std::size_t q,
                                   const StrategyConfig& cfg, const PairPool& pool) {
    if (unlabeled.keys.empty()) fail(ErrorCode::EmptyUnlabeledSet, "no unlabeled embeddings");
    const std::size_t n = unlabeled.keys.size();
    if (q > n) fail(ErrorCode::EmptyUnlabeledSet, "q exceeds the unlabeled pool");

    // (1) uncertainty prefilter by BALD mutual information
    ScoreVector mi_scores = score_bald(stacks, cfg);
    auto ranked = rank_entries(mi_scores, pool);  // indices into mi_scores.entries
    const std::size_t n_cand = std::min<std::size_t>(cfg.hybrid_prefilter, n);

    std::map<PairKey, std::size_t> emb_of;
    for (std::size_t i = 0; i < n; ++i) emb_of[unlabeled.keys[i]] = i;

    // candidates in prefilter order (most uncertain first); ties within the
    // BALD ranking already fall back to pool order
    std::vector<std::size_t> cand;
    cand.reserve(n_cand);
    for (std::size_t i = 0; i < n_cand; ++i) {
        auto it = emb_of.find(mi_scores.entries[ranked[i]].first);
        if (it == emb_of.end())
            fail(ErrorCode::DimensionMismatch, "embedding missing for scored pair");
        cand.push_back(it->second);
    }

    // (2) density: mean cosine similarity to the other candidates
    std::vector<double> density(cand.size(), 0.0);
    if (cand.size() > 1) {
        for (std::size_t i = 0; i < cand.size(); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < cand.size(); ++j) {
                if (i == j) continue;
                acc += cosine_similarity(unlabeled.vecs[cand[i]], unlabeled.vecs[cand[j]]);
            }
            density[i] = acc / static_cast<double>(cand.size() - 1);
        }
    }

    // (3) diversity: low shared information with everything labeled
    std::vector<double> diversity(cand.size(), 0.0);
    if (labeled.vecs.empty()) {
        std::fprintf(stderr, "[longal] hybrid: empty labeled set, diversity term set to 0\n");
    } else {
        for (std::size_t i = 0; i < cand.size(); ++i) {
            double worst = -std::numeric_limits<double>::infinity();
            for (const auto& lv : labeled.vecs) {
                double mi = quantized_mi(unlabeled.vecs[cand[i]], lv, cfg.mi_bins);
                worst = std::max(worst, mi);
            }
            diversity[i] = -worst;
        }
    }

    // (4) min-max normalize, weighted sum; stable sort keeps prefilter order
    // on ties so a degenerate batch falls back to pure uncertainty rank
    auto normalize = [](std::vector<double>& v) {
        double lo = v[0], hi = v[0];
        for (double x : v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        if (!(hi > lo)) {
            std::fill(v.begin(), v.end(), 0.0);
            return;
        }
        for (double& x : v) x = (x - lo) / (hi - lo);
    };
    normalize(density);
    normalize(diversity);

    const double wsum = cfg.hybrid_diversity_weight + cfg.hybrid_density_weight;
    std::vector<double> final_score(cand.size());
    for (std::size_t i = 0; i < cand.size(); ++i) {
        final_score[i] =
            (cfg.hybrid_diversity_weight * diversity[i] + cfg.hybrid_density_weight * density[i]) /
            wsum;
    }

    std::vector<std::size_t> order(cand.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return final_score[a] > final_score[b]; });

    std::vector<PairKey> out;
    out.reserve(q);
    for (std::size_t i = 0; i < q; ++i) out.push_back(unlabeled.keys[cand[order[i]]]);
    return out;
}

std::vector<PairKey> select_random(const PairPool& pool, std::size_t q, Rng& rng) {
    auto unlabeled = pool.unlabeled_pairs();
    if (q > unlabeled.size()) fail(ErrorCode::EmptyUnlabeledSet, "q exceeds the unlabeled pool");
    auto idx = rng.sample_without_replacement(unlabeled.size(), q);
    std::vector<PairKey> out;
    out.reserve(q);
    for (std::size_t i : idx) out.push_back(unlabeled[i]->key);
    return out;
}

// ---------------------------------------------------------------------------
// dispatcher
// ---------------------------------------------------------------------------

namespace {

ProbMapSet compute_probs(const Learner& learner, const std::vector<const SlicePair*>& pairs) {
    ProbMapSet out;
    out.keys.resize(pairs.size());
    out.maps.resize(pairs.size());
    const int n = static_cast<int>(pairs.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        out.keys[i] = pairs[i]->key;
        out.maps[i] = learner.predict_proba(assemble_input(*pairs[i]));
    }
    return out;
}

McStackSet compute_stacks(const Learner& learner, const std::vector<const SlicePair*>& pairs,
                          int n_drop, std::uint64_t seed) {
    McStackSet out;
    out.keys.resize(pairs.size());
    out.stacks.resize(pairs.size());
    const int n = static_cast<int>(pairs.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        out.keys[i] = pairs[i]->key;
        out.stacks[i] = learner.mc_predict(assemble_input(*pairs[i]), n_drop, pairs[i]->key, seed);
    }
    return out;
}

EmbeddingSet compute_embeddings(const Learner& learner, const std::vector<const SlicePair*>& pairs) {
    EmbeddingSet out;
    out.keys.resize(pairs.size());
    out.vecs.resize(pairs.size());
    const int n = static_cast<int>(pairs.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        Embedding e = learner.embed(assemble_input(*pairs[i]), pairs[i]->key);
        out.keys[i] = e.key;
        out.vecs[i] = std::move(e.v);
    }
    return out;
}

}  // namespace

std::vector<PairKey> query(const StrategyConfig& cfg, const Learner& learner, const PairPool& pool,
                           std::size_t q, std::uint64_t strategy_seed, int iteration,
                           ScoreVector* scores_out) {
    cfg.validate();
    auto unlabeled = pool.unlabeled_pairs();
    if (unlabeled.empty()) fail(ErrorCode::EmptyUnlabeledSet, "pool has no unlabeled pairs");
    if (q > unlabeled.size()) fail(ErrorCode::EmptyUnlabeledSet, "q exceeds the unlabeled pool");

    // validate shapes up front so the parallel inference loops cannot throw
    for (const auto& sp : pool.pairs) {
        if (sp.baseline.h != pool.pairs.front().baseline.h ||
            sp.baseline.w != pool.pairs.front().baseline.w)
            fail(ErrorCode::ShapeMismatch, "pool pairs have mixed dims");
    }
    learner.check_input(assemble_input(pool.pairs.front()));

    std::vector<PairKey> selected;
    ScoreVector scores;
    scores.iteration = iteration;

    switch (cfg.name) {
        case StrategyName::Random: {
            Rng rng(seed_combine(strategy_seed, static_cast<std::uint64_t>(iteration)));
            selected = select_random(pool, q, rng);
            scores.strategy = "random";
            break;
        }
        case StrategyName::LeastConfidence:
        case StrategyName::Margin:
        case StrategyName::Entropy: {
            ProbMapSet probs = compute_probs(learner, unlabeled);
            if (cfg.name == StrategyName::LeastConfidence)
                scores = score_least_confidence(probs, cfg);
            else if (cfg.name == StrategyName::Margin)
                scores = score_margin(probs, cfg);
            else
                scores = score_entropy(probs, cfg);
            scores.iteration = iteration;
            selected = top_q_keys(scores, q, pool);
            break;
        }
        case StrategyName::Bald: {
            McStackSet stacks = compute_stacks(learner, unlabeled, cfg.n_drop,
                                               seed_combine(strategy_seed, 0x6d63ULL,
                                                            static_cast<std::uint64_t>(iteration)));
            scores = score_bald(stacks, cfg);
            scores.iteration = iteration;
            selected = top_q_keys(scores, q, pool);
            break;
        }
        case StrategyName::KCenter: {
            EmbeddingSet un = compute_embeddings(learner, unlabeled);
            EmbeddingSet lab = compute_embeddings(learner, pool.labeled_pairs());
            selected = select_kcenter(un, lab, q, pool);
            scores.strategy = "kcenter";
            break;
        }
        case StrategyName::ClusterMargin: {
            ProbMapSet probs = compute_probs(learner, unlabeled);
            scores = score_margin(probs, cfg);
            scores.iteration = iteration;
            EmbeddingSet un = compute_embeddings(learner, unlabeled);
            selected = select_cluster_margin(un, scores, q, cfg, pool);
            break;
        }
        case StrategyName::Hybrid: {
            McStackSet stacks = compute_stacks(learner, unlabeled, cfg.n_drop,
                                               seed_combine(strategy_seed, 0x6d63ULL,
                                                            static_cast<std::uint64_t>(iteration)));
            EmbeddingSet un = compute_embeddings(learner, unlabeled);
            EmbeddingSet lab = compute_embeddings(learner, pool.labeled_pairs());
            selected = select_hybrid(stacks, un, lab, q, cfg, pool);
            scores = score_bald(stacks, cfg);
            scores.strategy = "hybrid_prefilter_bald";
            scores.iteration = iteration;
            break;
        }
    }

    // contract: distinct, unlabeled, exactly q
    for (const auto& k : selected) {
        if (pool.is_labeled(k)) fail(ErrorCode::DimensionMismatch, "strategy selected a labeled key");
    }
    if (selected.size() != q) fail(ErrorCode::DimensionMismatch, "strategy returned wrong count");

    if (scores_out) *scores_out = std::move(scores);
    return selected;
}

void write_scores_csv(const ScoreVector& scores, const PairPool& pool, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
    f << "pair_key,score,rank\n";
    auto ranked = rank_entries(scores, pool);
    std::vector<std::size_t> rank_of(scores.entries.size());
    for (std::size_t r = 0; r < ranked.size(); ++r) rank_of[ranked[r]] = r + 1;
    char buf[64];
    for (std::size_t i = 0; i < scores.entries.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", scores.entries[i].second);
        f << scores.entries[i].first.str() << ',' << buf << ',' << rank_of[i] << '\n';
    }
}

}  // namespace longal
