#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "longal/dataset.hpp"
#include "longal/types.hpp"

namespace longal {

struct Confusion {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    Confusion& operator+=(const Confusion& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

Confusion confusion(const ChangeMap& pred, const ChangeMap& gt);
Confusion confusion_masks(const Mask& pred, const Mask& gt);

// dice = 2tp / (2tp + fp + fn); empty-vs-empty convention: 1.
// precision = tp / (tp + fp), recall = tp / (tp + fn); a metric whose
// denominator is empty is 1 when the other side is empty too, else 0.
double dice(const Confusion& c);
double precision(const Confusion& c);
double recall(const Confusion& c);

struct TestMetrics {
    double dice = 0.0, recall = 0.0, precision = 0.0;
    Confusion confusion;
};

// Per-slice probability predictor; the learner's predict_proba conforms.
using SlicePredictor = std::function<Image(const SlicePair&)>;

// Predicts every pair of the test dataset, assembles per-(patient,t,t')
// change maps at the threshold, and accumulates one global confusion over
// all test voxels (micro-averaging). Set macro_average for the per-volume
// averaged variant.
TestMetrics evaluate_testset(const SlicePredictor& predict, const Dataset& test, double threshold,
                             bool macro_average = false);

// ---------------------------------------------------------------------------
// selection-distribution export: one row per pool pair with its target
// pixel count, whether it was ever selected, and at which iteration
// ---------------------------------------------------------------------------

struct SelectionRow {
    PairKey key;
    std::uint64_t target_pixel_count = 0;
    bool selected = false;
    int selection_iteration = -1;
};

// `truth_source` supplies ground-truth masks for every pool pair;
// `selected_at` maps selected keys to the iteration that picked them.
std::vector<SelectionRow> selection_distribution(
    const PairPool& pool, const Dataset& truth_source,
    const std::vector<std::pair<PairKey, int>>& selected_at);

void write_selection_csv(const std::vector<SelectionRow>& rows, const std::string& path);

}  // namespace longal
