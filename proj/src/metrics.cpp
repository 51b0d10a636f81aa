#include "longal/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "longal/error.hpp"
#include "longal/pairing.hpp"

namespace longal {

Confusion confusion(const ChangeMap& pred, const ChangeMap& gt) {
    if (pred.h != gt.h || pred.w != gt.w || pred.c != gt.c)
        fail(ErrorCode::ShapeMismatch, "change map dims differ");
    Confusion c;
    for (std::size_t i = 0; i < pred.voxels.size(); ++i) {
        bool p = pred.voxels[i] != 0;
        bool g = gt.voxels[i] != 0;
        if (p && g)
            ++c.tp;
        else if (p && !g)
            ++c.fp;
        else if (!p && g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

Confusion confusion_masks(const Mask& pred, const Mask& gt) {
    if (!pred.same_shape(gt)) fail(ErrorCode::ShapeMismatch, "mask dims differ");
    Confusion c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        bool p = pred.v[i] != 0;
        bool g = gt.v[i] != 0;
        if (p && g)
            ++c.tp;
        else if (p && !g)
            ++c.fp;
        else if (!p && g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

double dice(const Confusion& c) {
    std::uint64_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return 1.0;  // both empty
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double precision(const Confusion& c) {
    if (c.tp + c.fp == 0) return c.fn == 0 ? 1.0 : 0.0;
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall(const Confusion& c) {
    if (c.tp + c.fn == 0) return c.fp == 0 ? 1.0 : 0.0;
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

TestMetrics evaluate_testset(const SlicePredictor& predict, const Dataset& test, double threshold,
                             bool macro_average) {
    PairPool pool = build_pair_pool(test.all_volumes());

    // group pool pairs by (patient, t, t')
    struct VolKey {
        std::string pid;
        int t, tf;
        bool operator<(const VolKey& o) const {
            return std::tie(pid, t, tf) < std::tie(o.pid, o.t, o.tf);
        }
    };
    std::map<VolKey, std::vector<const SlicePair*>> groups;
    for (const auto& p : pool.pairs)
        groups[{p.key.patient_id, p.key.t, p.key.t_follow}].push_back(&p);

    Confusion total;
    double macro_dice = 0.0, macro_rec = 0.0, macro_prec = 0.0;
    std::size_t n_groups = 0;

    for (const auto& [vk, pairs] : groups) {
        const PatientRecord* rec = test.find(vk.pid);
        if (!rec) fail(ErrorCode::MissingGroundTruth, "patient missing: " + vk.pid);

        std::vector<std::pair<int, Image>> preds;
        std::vector<std::pair<int, Image>> gts;
        preds.reserve(pairs.size());
        for (const SlicePair* p : pairs) {
            preds.emplace_back(p->key.slice_index, predict(*p));
            auto it = rec->truth.find(p->key);
            if (it == rec->truth.end())
                fail(ErrorCode::MissingGroundTruth, "mask missing for " + p->key.str());
            Image gt_img(it->second.h, it->second.w);
            for (std::size_t i = 0; i < gt_img.size(); ++i)
                gt_img.v[i] = it->second.v[i] ? 1.0f : 0.0f;
            gts.emplace_back(p->key.slice_index, std::move(gt_img));
        }
        ChangeMap pred_map = assemble_change_map(preds, threshold);
        ChangeMap gt_map = assemble_change_map(gts, 0.5);
        Confusion c = confusion(pred_map, gt_map);
        total += c;
        macro_dice += dice(c);
        macro_rec += recall(c);
        macro_prec += precision(c);
        ++n_groups;
    }

    TestMetrics m;
    m.confusion = total;
    if (macro_average && n_groups > 0) {
        m.dice = macro_dice / static_cast<double>(n_groups);
        m.recall = macro_rec / static_cast<double>(n_groups);
        m.precision = macro_prec / static_cast<double>(n_groups);
    } else {
        m.dice = dice(total);
        m.recall = recall(total);
        m.precision = precision(total);
    }
    return m;
}

std::vector<SelectionRow> selection_distribution(
    const PairPool& pool, const Dataset& truth_source,
    const std::vector<std::pair<PairKey, int>>& selected_at) {
    std::map<PairKey, int> sel;
    for (const auto& [k, it] : selected_at) sel.emplace(k, it);

    std::vector<SelectionRow> rows;
    rows.reserve(pool.pairs.size());
    for (const auto& p : pool.pairs) {
        SelectionRow row;
        row.key = p.key;
        const PatientRecord* rec = truth_source.find(p.key.patient_id);
        if (!rec) fail(ErrorCode::MissingGroundTruth, "patient missing: " + p.key.patient_id);
        auto it = rec->truth.find(p.key);
        if (it == rec->truth.end())
            fail(ErrorCode::MissingGroundTruth, "mask missing for " + p.key.str());
        for (std::uint8_t v : it->second.v) row.target_pixel_count += v ? 1 : 0;
        auto sit = sel.find(p.key);
        if (sit != sel.end()) {
            row.selected = true;
            row.selection_iteration = sit->second;
        }
        rows.push_back(row);
    }
    return rows;
}

void write_selection_csv(const std::vector<SelectionRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
    f << "pair_key,target_pixel_count,selected,selection_iteration\n";
    for (const auto& r : rows) {
        f << r.key.str() << ',' << r.target_pixel_count << ',' << (r.selected ? 1 : 0) << ','
          << r.selection_iteration << '\n';
    }
}

}  // namespace longal
