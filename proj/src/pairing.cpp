#include "longal/pairing.hpp"

#include <algorithm>
#include <map>

namespace longal {

std::vector<Slice> slice_volume(const Volume& v) {
    v.validate();
    std::vector<Slice> out;
    out.reserve(v.c);
    const std::size_t hw = static_cast<std::size_t>(v.h) * v.w;
    for (int k = 0; k < v.c; ++k) {
        Slice s;
        s.patient_id = v.patient_id;
        s.timepoint = v.timepoint;
        s.slice_index = k;
        s.pixels = Image(v.h, v.w);
        std::copy_n(v.data.data() + k * hw, hw, s.pixels.v.data());
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

// patient_id -> volumes ascending by timepoint, dims checked
std::map<std::string, std::vector<const Volume*>> group_by_patient(const std::vector<Volume>& volumes) {
    std::map<std::string, std::vector<const Volume*>> by_patient;
    for (const auto& v : volumes) {
        v.validate();
        by_patient[v.patient_id].push_back(&v);
    }
    for (auto& [pid, vols] : by_patient) {
        std::sort(vols.begin(), vols.end(),
                  [](const Volume* a, const Volume* b) { return a->timepoint < b->timepoint; });
        if (vols.size() < 2)
            fail(ErrorCode::InsufficientTimepoints, "patient " + pid + " has fewer than 2 timepoints");
        for (std::size_t i = 1; i < vols.size(); ++i) {
            if (vols[i]->h != vols[0]->h || vols[i]->w != vols[0]->w || vols[i]->c != vols[0]->c)
                fail(ErrorCode::DimensionMismatch, "patient " + pid + " volumes differ in (h,w,c)");
            if (vols[i]->timepoint == vols[i - 1]->timepoint)
                fail(ErrorCode::DimensionMismatch,
                     "patient " + pid + " has duplicate timepoint " + std::to_string(vols[i]->timepoint));
        }
    }
    return by_patient;
}

}  // namespace

std::size_t pair_pool_size(const std::vector<Volume>& volumes) {
    auto by_patient = group_by_patient(volumes);
    std::size_t total = 0;
    for (const auto& [pid, vols] : by_patient) {
        std::size_t t = vols.size();
        total += t * (t - 1) / 2 * static_cast<std::size_t>(vols[0]->c);
    }
    return total;
}

PairPool build_pair_pool(const std::vector<Volume>& volumes) {
    if (volumes.empty()) fail(ErrorCode::InsufficientTimepoints, "no volumes");
    auto by_patient = group_by_patient(volumes);

    PairPool pool;
    for (const auto& [pid, vols] : by_patient) {
        // slice each volume once, then pair per (k, t, t')
        std::vector<std::vector<Slice>> sliced;
        sliced.reserve(vols.size());
        for (const Volume* v : vols) sliced.push_back(slice_volume(*v));

        const int c = vols[0]->c;
        for (int k = 0; k < c; ++k) {
            for (std::size_t a = 0; a < vols.size(); ++a) {
                for (std::size_t b = a + 1; b < vols.size(); ++b) {
                    pool.pairs.push_back(make_slice_pair(sliced[a][k], sliced[b][k]));
                }
            }
        }
    }
    std::sort(pool.pairs.begin(), pool.pairs.end(),
              [](const SlicePair& x, const SlicePair& y) { return x.key < y.key; });
    for (std::size_t i = 0; i < pool.pairs.size(); ++i) pool.index_of[pool.pairs[i].key] = i;
    return pool;
}

ModelInput assemble_input(const SlicePair& p) {
    ModelInput in;
    in.h = p.baseline.h;
    in.w = p.baseline.w;
    in.data.resize(3 * p.baseline.size());
    std::copy(p.baseline.v.begin(), p.baseline.v.end(), in.channel(0));
    std::copy(p.followup.v.begin(), p.followup.v.end(), in.channel(1));
    std::copy(p.difference.v.begin(), p.difference.v.end(), in.channel(2));
    return in;
}

ChangeMap assemble_change_map(const std::vector<std::pair<int, Image>>& preds, double threshold) {
    if (preds.empty()) fail(ErrorCode::MissingSlice, "no slice predictions");
    int c = static_cast<int>(preds.size());
    std::vector<const Image*> by_index(c, nullptr);
    for (const auto& [k, img] : preds) {
        if (k < 0 || k >= c) fail(ErrorCode::MissingSlice, "slice index " + std::to_string(k) + " out of range");
        if (by_index[k]) fail(ErrorCode::DuplicateSlice, "slice index " + std::to_string(k) + " repeated");
        by_index[k] = &img;
    }
    for (int k = 0; k < c; ++k)
        if (!by_index[k]) fail(ErrorCode::MissingSlice, "slice index " + std::to_string(k) + " absent");

    ChangeMap m;
    m.h = by_index[0]->h;
    m.w = by_index[0]->w;
    m.c = c;
    m.voxels.resize(static_cast<std::size_t>(m.h) * m.w * c);
    for (int k = 0; k < c; ++k) {
        const Image& img = *by_index[k];
        if (img.h != m.h || img.w != m.w) fail(ErrorCode::ShapeMismatch, "prediction shapes differ");
        std::uint8_t* plane = m.voxels.data() + static_cast<std::size_t>(k) * m.h * m.w;
        for (std::size_t i = 0; i < img.size(); ++i)
            plane[i] = static_cast<double>(img.v[i]) >= threshold ? 1 : 0;
    }
    return m;
}

}  // namespace longal
