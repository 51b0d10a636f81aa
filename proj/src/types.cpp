#include "longal/types.hpp"

#include <algorithm>
#include <cstdio>

namespace longal {

std::string PairKey::str() const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "/k%d/t%d-t%d", slice_index, t, t_follow);
    return patient_id + buf;
}

PairKey PairKey::parse(const std::string& s) {
    // <patient_id>/k<k>/t<t>-t<t'>; patient ids may not contain '/'
    auto fail_parse = [&]() { fail(ErrorCode::CorruptCheckpoint, "bad pair key: " + s); };
    std::size_t p1 = s.rfind("/t");
    if (p1 == std::string::npos) fail_parse();
    std::size_t p0 = s.rfind("/k", p1 == 0 ? 0 : p1 - 1);
    if (p0 == std::string::npos || p0 >= p1) fail_parse();
    PairKey k;
    k.patient_id = s.substr(0, p0);
    int t = 0, tf = 0, kk = 0;
    if (std::sscanf(s.c_str() + p0, "/k%d/t%d-t%d", &kk, &t, &tf) != 3) fail_parse();
    k.slice_index = kk;
    k.t = t;
    k.t_follow = tf;
    return k;
}

Image image_difference(const Image& baseline, const Image& followup) {
    if (!baseline.same_shape(followup))
        fail(ErrorCode::ShapeMismatch, "difference requires matching slice shapes");
    Image d(baseline.h, baseline.w);
    for (std::size_t i = 0; i < d.size(); ++i) d.v[i] = followup.v[i] - baseline.v[i];
    return d;
}

SlicePair make_slice_pair(const Slice& baseline, const Slice& followup) {
    if (baseline.patient_id != followup.patient_id)
        fail(ErrorCode::DimensionMismatch, "pair spans two patients");
    if (baseline.slice_index != followup.slice_index)
        fail(ErrorCode::DimensionMismatch, "pair spans two slice indices");
    if (!(followup.timepoint > baseline.timepoint))
        fail(ErrorCode::DimensionMismatch, "followup timepoint must exceed baseline");
    SlicePair p;
    p.key = PairKey{baseline.patient_id, baseline.slice_index, baseline.timepoint, followup.timepoint};
    p.baseline = baseline.pixels;
    p.followup = followup.pixels;
    p.difference = image_difference(p.baseline, p.followup);
    return p;
}

void PairPool::mark_labeled(const PairKey& k, ChangeLabel label) {
    if (index_of.find(k) == index_of.end())
        fail(ErrorCode::MissingGroundTruth, "key not in pool: " + k.str());
    labeled.insert(k);
    labels[k] = std::move(label);
}

std::vector<const SlicePair*> PairPool::unlabeled_pairs() const {
    std::vector<const SlicePair*> out;
    out.reserve(pairs.size() - labeled.size());
    for (const auto& p : pairs)
        if (!is_labeled(p.key)) out.push_back(&p);
    return out;
}

std::vector<const SlicePair*> PairPool::labeled_pairs() const {
    std::vector<const SlicePair*> out;
    out.reserve(labeled.size());
    for (const auto& p : pairs)
        if (is_labeled(p.key)) out.push_back(&p);
    return out;
}

}  // namespace longal
