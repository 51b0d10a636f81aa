#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "longal/error.hpp"

namespace longal {

// Row-major 2D grid. The workhorse container for slices, masks and
// probability maps.
template <typename T>
struct Plane {
    int h = 0;
    int w = 0;
    std::vector<T> v;

    Plane() = default;
    Plane(int h_, int w_, T fill = T{}) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill) {}

    T& at(int i, int j) { return v[static_cast<std::size_t>(i) * w + j]; }
    const T& at(int i, int j) const { return v[static_cast<std::size_t>(i) * w + j]; }
    std::size_t size() const { return v.size(); }
    bool same_shape(const Plane& o) const { return h == o.h && w == o.w; }
};

using Image = Plane<float>;
using Mask = Plane<std::uint8_t>;

// One 3D scan of a patient at a timepoint, plane-major: voxel (i,j,k) at
// data[k*h*w + i*w + j]. Intensities are dimensionless, in [0,1] after
// normalization.
struct Volume {
    std::string patient_id;
    int timepoint = 1;  // t >= 1
    int h = 0, w = 0, c = 0;
    std::vector<float> data;
    std::optional<std::array<double, 3>> spacing;  // mm, metadata only

    float& at(int i, int j, int k) {
        return data[static_cast<std::size_t>(k) * h * w + static_cast<std::size_t>(i) * w + j];
    }
    float at(int i, int j, int k) const {
        return data[static_cast<std::size_t>(k) * h * w + static_cast<std::size_t>(i) * w + j];
    }
    std::size_t voxel_count() const { return static_cast<std::size_t>(h) * w * c; }

    void validate() const {
        if (h < 1 || w < 1 || c < 1) fail(ErrorCode::DimensionMismatch, "volume dims must be >= 1");
        if (data.size() != voxel_count())
            fail(ErrorCode::DimensionMismatch, "volume data length != h*w*c");
        if (timepoint < 1) fail(ErrorCode::DimensionMismatch, "timepoint must be >= 1");
    }
};

struct Slice {
    std::string patient_id;
    int timepoint = 1;
    int slice_index = 0;  // k in [0, c)
    Image pixels;
};

// Identity of a slice pair: same patient, same slice index, two timepoints
// with t' > t. Canonical pool order is (patient_id, slice_index, t, t').
struct PairKey {
    std::string patient_id;
    int slice_index = 0;
    int t = 1;
    int t_follow = 2;

    auto tie() const { return std::tie(patient_id, slice_index, t, t_follow); }
    bool operator<(const PairKey& o) const { return tie() < o.tie(); }
    bool operator==(const PairKey& o) const { return tie() == o.tie(); }

    // string form used in logs and CSV: <patient_id>/k<k>/t<t>-t<t'>
    std::string str() const;
    static PairKey parse(const std::string& s);
};

struct SlicePair {
    PairKey key;
    Image baseline;    // slice at t
    Image followup;    // slice at t'
    Image difference;  // followup - baseline, signed, in [-1,1]
};

struct ChangeLabel {
    PairKey key;
    Mask mask;  // 1 = new-lesion pixel
};

// followup - baseline, elementwise
Image image_difference(const Image& baseline, const Image& followup);

SlicePair make_slice_pair(const Slice& baseline, const Slice& followup);

// The pool D_S with its labeled/unlabeled partition. Pairs are stored in
// canonical order; indices into `pairs` double as tie-break ranks.
struct PairPool {
    std::vector<SlicePair> pairs;                // D_S, sorted canonically
    std::set<PairKey> labeled;                   // D_L membership
    std::map<PairKey, ChangeLabel> labels;       // one label per labeled key
    std::map<PairKey, std::size_t> index_of;     // key -> position in pairs

    std::size_t size() const { return pairs.size(); }
    bool is_labeled(const PairKey& k) const { return labeled.count(k) != 0; }

    // moves a key from D_U to D_L, attaching its label
    void mark_labeled(const PairKey& k, ChangeLabel label);

    std::vector<const SlicePair*> unlabeled_pairs() const;
    std::vector<const SlicePair*> labeled_pairs() const;
};

struct ChangeMap {
    std::string patient_id;
    int t = 1, t_follow = 2;
    int h = 0, w = 0, c = 0;
    std::vector<std::uint8_t> voxels;  // plane-major, values in {0,1}

    std::uint8_t& at(int i, int j, int k) {
        return voxels[static_cast<std::size_t>(k) * h * w + static_cast<std::size_t>(i) * w + j];
    }
    std::uint8_t at(int i, int j, int k) const {
        return voxels[static_cast<std::size_t>(k) * h * w + static_cast<std::size_t>(i) * w + j];
    }
};

// 3-channel model input, channel-major: [baseline | followup | difference].
struct ModelInput {
    int h = 0, w = 0;
    std::vector<float> data;  // 3*h*w

    const float* channel(int ch) const { return data.data() + static_cast<std::size_t>(ch) * h * w; }
    float* channel(int ch) { return data.data() + static_cast<std::size_t>(ch) * h * w; }
};

}  // namespace longal
