#pragma once

#include <utility>

#include "longal/dataset.hpp"
#include "longal/rng.hpp"
#include "longal/types.hpp"

namespace longal {

// Half-open crop window [i0,i1) x [j0,j1).
struct CropBox {
    int i0 = 0, i1 = 0, j0 = 0, j1 = 0;
    int height() const { return i1 - i0; }
    int width() const { return j1 - j0; }
    bool empty() const { return i1 <= i0 || j1 <= j0; }
};

struct NormRange {
    float lo = 0.0f;
    float hi = 1.0f;
};

// Union bounding box of strictly positive voxels across a patient's whole
// series; full extent if everything is zero.
CropBox foreground_union_bbox(const std::vector<const Volume*>& series);

NormRange volume_range(const Volume& v, const CropBox& box);

// Crop, min-max normalize with the given range, bilinear-resize to
// (th, tw). A degenerate range (hi == lo) yields an all-zero slice and a
// warning on stderr rather than an error.
Slice preprocess_slice(const Slice& s, int th, int tw, const CropBox& box, const NormRange& range);

// Convenience form using the slice's own extent and range.
Slice preprocess_slice(const Slice& s, int th, int tw);

// Masks are cropped with the same box and resized nearest-neighbour.
Mask preprocess_mask(const Mask& m, int th, int tw, const CropBox& box);

// Whole-dataset pipeline: per-patient union crop, per-volume normalization,
// resize of every slice and mask to (th, tw). th = tw = 0 keeps the cropped
// native size.
Dataset preprocess_dataset(const Dataset& d, int th, int tw);

// ---------------------------------------------------------------------------
// training-time augmentation
// ---------------------------------------------------------------------------

struct AugmentPlan {
    bool hflip = false;
    bool rotate = false;
    int rot_quarters = 0;  // 1..3 counter-clockwise quarter turns
    bool blur = false;
    double blur_sigma = 1.0;
};

// Each transform independently with probability 0.5; rotation angle uniform
// over {90, 180, 270}, blur sigma uniform in [0.5, 1.5].
AugmentPlan draw_augment_plan(Rng& rng);

// Geometric transforms apply identically to baseline, follow-up and mask;
// blur touches images only. The difference channel is recomputed afterward.
std::pair<SlicePair, ChangeLabel> apply_augment(const SlicePair& pair, const ChangeLabel& label,
                                                const AugmentPlan& plan);

std::pair<SlicePair, ChangeLabel> augment(const SlicePair& pair, const ChangeLabel& label, Rng& rng);

}  // namespace longal
