#include "longal/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "longal/error.hpp"
#include "longal/kernels.hpp"
#include "longal/pairing.hpp"

namespace longal {

CropBox foreground_union_bbox(const std::vector<const Volume*>& series) {
    int i0 = -1, i1 = -1, j0 = -1, j1 = -1;
    for (const Volume* v : series) {
        for (int k = 0; k < v->c; ++k) {
            for (int i = 0; i < v->h; ++i) {
                for (int j = 0; j < v->w; ++j) {
                    if (v->at(i, j, k) > 0.0f) {
                        if (i0 < 0 || i < i0) i0 = i;
                        if (i1 < 0 || i > i1) i1 = i;
                        if (j0 < 0 || j < j0) j0 = j;
                        if (j1 < 0 || j > j1) j1 = j;
                    }
                }
            }
        }
    }
    if (i0 < 0) {
        // no foreground at all: keep full extent
        const Volume* v = series.front();
        return CropBox{0, v->h, 0, v->w};
    }
    return CropBox{i0, i1 + 1, j0, j1 + 1};
}

NormRange volume_range(const Volume& v, const CropBox& box) {
    float lo = 0.0f, hi = 0.0f;
    bool first = true;
    for (int k = 0; k < v.c; ++k) {
        for (int i = box.i0; i < box.i1; ++i) {
            for (int j = box.j0; j < box.j1; ++j) {
                float x = v.at(i, j, k);
                if (first) {
                    lo = hi = x;
                    first = false;
                } else {
                    lo = std::min(lo, x);
                    hi = std::max(hi, x);
                }
            }
        }
    }
    return NormRange{lo, hi};
}

namespace {

Image crop_image(const Image& img, const CropBox& box) {
    Image out(box.height(), box.width());
    for (int i = 0; i < out.h; ++i)
        for (int j = 0; j < out.w; ++j) out.at(i, j) = img.at(box.i0 + i, box.j0 + j);
    return out;
}

Mask crop_mask(const Mask& m, const CropBox& box) {
    Mask out(box.height(), box.width());
    for (int i = 0; i < out.h; ++i)
        for (int j = 0; j < out.w; ++j) out.at(i, j) = m.at(box.i0 + i, box.j0 + j);
    return out;
}

}  // namespace

Slice preprocess_slice(const Slice& s, int th, int tw, const CropBox& box, const NormRange& range) {
    if (s.pixels.size() == 0) fail(ErrorCode::ShapeMismatch, "empty slice");
    Image cropped = crop_image(s.pixels, box);
    if (th <= 0) th = cropped.h;
    if (tw <= 0) tw = cropped.w;

    Slice out;
    out.patient_id = s.patient_id;
    out.timepoint = s.timepoint;
    out.slice_index = s.slice_index;

    if (!(range.hi > range.lo)) {
        // degenerate intensity range: warn and emit zeros
        std::fprintf(stderr, "[longal] warning: degenerate intensity range for %s t%d k%d\n",
                     s.patient_id.c_str(), s.timepoint, s.slice_index);
        out.pixels = Image(th, tw, 0.0f);
        return out;
    }
    const float span = range.hi - range.lo;
    for (float& px : cropped.v) px = (px - range.lo) / span;

    out.pixels = Image(th, tw);
    kernels::resize_bilinear(cropped.v.data(), cropped.h, cropped.w, out.pixels.v.data(), th, tw);
    // bilinear interpolation of [0,1] data stays in [0,1] up to rounding
    for (float& px : out.pixels.v) px = std::clamp(px, 0.0f, 1.0f);
    return out;
}

Slice preprocess_slice(const Slice& s, int th, int tw) {
    CropBox box{0, s.pixels.h, 0, s.pixels.w};
    NormRange range{0.0f, 0.0f};
    bool first = true;
    for (float px : s.pixels.v) {
        if (first) {
            range.lo = range.hi = px;
            first = false;
        } else {
            range.lo = std::min(range.lo, px);
            range.hi = std::max(range.hi, px);
        }
    }
    return preprocess_slice(s, th, tw, box, range);
}

Mask preprocess_mask(const Mask& m, int th, int tw, const CropBox& box) {
    Mask cropped = crop_mask(m, box);
    if (th <= 0) th = cropped.h;
    if (tw <= 0) tw = cropped.w;
    Mask out(th, tw);
    kernels::resize_nearest_u8(cropped.v.data(), cropped.h, cropped.w, out.v.data(), th, tw);
    return out;
}

Dataset preprocess_dataset(const Dataset& d, int th, int tw) {
    Dataset out;
    out.split_tag = d.split_tag;
    out.patients.resize(d.patients.size());
    for (std::size_t pi = 0; pi < d.patients.size(); ++pi) {
        const PatientRecord& rec = d.patients[pi];
        PatientRecord& orec = out.patients[pi];
        orec.patient_id = rec.patient_id;

        std::vector<const Volume*> series;
        for (const auto& v : rec.volumes) series.push_back(&v);
        const CropBox box = foreground_union_bbox(series);

        for (const Volume& v : rec.volumes) {
            const NormRange range = volume_range(v, box);
            Volume nv;
            nv.patient_id = v.patient_id;
            nv.timepoint = v.timepoint;
            nv.spacing = v.spacing;
            int oh = th > 0 ? th : box.height();
            int ow = tw > 0 ? tw : box.width();
            nv.h = oh;
            nv.w = ow;
            nv.c = v.c;
            nv.data.resize(static_cast<std::size_t>(oh) * ow * v.c);
            auto slices = slice_volume(v);
            for (int k = 0; k < v.c; ++k) {
                Slice ps = preprocess_slice(slices[k], oh, ow, box, range);
                std::copy(ps.pixels.v.begin(), ps.pixels.v.end(),
                          nv.data.begin() + static_cast<std::size_t>(k) * oh * ow);
            }
            orec.volumes.push_back(std::move(nv));
        }
        for (const auto& [key, mask] : rec.truth) {
            orec.truth.emplace(key, preprocess_mask(mask, th, tw, box));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// augmentation
// ---------------------------------------------------------------------------

namespace {

Image flip_h(const Image& img) {
    Image out(img.h, img.w);
    for (int i = 0; i < img.h; ++i)
        for (int j = 0; j < img.w; ++j) out.at(i, j) = img.at(i, img.w - 1 - j);
    return out;
}

Mask flip_h(const Mask& m) {
    Mask out(m.h, m.w);
    for (int i = 0; i < m.h; ++i)
        for (int j = 0; j < m.w; ++j) out.at(i, j) = m.at(i, m.w - 1 - j);
    return out;
}

// one counter-clockwise quarter turn: out(i,j) = in(j, w-1-i); square only
template <typename P>
P rot90_once(const P& img) {
    P out(img.w, img.h);
    for (int i = 0; i < out.h; ++i)
        for (int j = 0; j < out.w; ++j) out.at(i, j) = img.at(j, img.w - 1 - i);
    return out;
}

template <typename P>
P rotate_quarters(const P& img, int quarters) {
    P out = img;
    for (int q = 0; q < quarters; ++q) out = rot90_once(out);
    return out;
}

Image blur_image(const Image& img, double sigma) {
    Image out(img.h, img.w);
    kernels::gaussian_blur(img.v.data(), img.h, img.w, sigma, out.v.data());
    return out;
}

}  // namespace

AugmentPlan draw_augment_plan(Rng& rng) {
    AugmentPlan plan;
    plan.hflip = rng.uniform() < 0.5;
    plan.rotate = rng.uniform() < 0.5;
    if (plan.rotate) plan.rot_quarters = rng.range_int(1, 3);
    plan.blur = rng.uniform() < 0.5;
    if (plan.blur) plan.blur_sigma = rng.uniform(0.5, 1.5);
    return plan;
}

std::pair<SlicePair, ChangeLabel> apply_augment(const SlicePair& pair, const ChangeLabel& label,
                                                const AugmentPlan& plan) {
    if (!pair.baseline.same_shape(pair.followup) ||
        pair.baseline.h != label.mask.h || pair.baseline.w != label.mask.w)
        fail(ErrorCode::ShapeMismatch, "pair and mask shapes differ");
    if (plan.rotate && (plan.rot_quarters == 1 || plan.rot_quarters == 3) &&
        pair.baseline.h != pair.baseline.w)
        fail(ErrorCode::ShapeMismatch, "quarter-turn rotation requires square slices");

    SlicePair out;
    out.key = pair.key;
    out.baseline = pair.baseline;
    out.followup = pair.followup;
    ChangeLabel olabel;
    olabel.key = label.key;
    olabel.mask = label.mask;

    if (plan.hflip) {
        out.baseline = flip_h(out.baseline);
        out.followup = flip_h(out.followup);
        olabel.mask = flip_h(olabel.mask);
    }
    if (plan.rotate && plan.rot_quarters > 0) {
        out.baseline = rotate_quarters(out.baseline, plan.rot_quarters);
        out.followup = rotate_quarters(out.followup, plan.rot_quarters);
        olabel.mask = rotate_quarters(olabel.mask, plan.rot_quarters);
    }
    if (plan.blur) {
        out.baseline = blur_image(out.baseline, plan.blur_sigma);
        out.followup = blur_image(out.followup, plan.blur_sigma);
        // the mask is never blurred
    }
    out.difference = image_difference(out.baseline, out.followup);
    return {std::move(out), std::move(olabel)};
}

std::pair<SlicePair, ChangeLabel> augment(const SlicePair& pair, const ChangeLabel& label, Rng& rng) {
    return apply_augment(pair, label, draw_augment_plan(rng));
}

}  // namespace longal
