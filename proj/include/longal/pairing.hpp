#pragma once

#include <utility>
#include <vector>

#include "longal/types.hpp"

namespace longal {

// Splits a volume into its c axial planes, ascending slice index.
std::vector<Slice> slice_volume(const Volume& v);

// Builds D_S: for every patient, every slice index k and every ordered
// timepoint combination (t, t') with t' > t, one SlicePair carrying its
// difference channel. Pool order is canonical (patient_id, k, t, t').
// Throws DimensionMismatch / InsufficientTimepoints.
PairPool build_pair_pool(const std::vector<Volume>& volumes);

// Number of pairs build_pair_pool would produce: sum over patients of
// C(T_n,2) * c_n.
std::size_t pair_pool_size(const std::vector<Volume>& volumes);

ModelInput assemble_input(const SlicePair& p);

// Stacks per-slice probability maps into a binary change map. Exactly one
// prediction per slice index in [0,c) is required; voxel = 1 iff
// prob >= threshold. Throws MissingSlice / DuplicateSlice.
ChangeMap assemble_change_map(const std::vector<std::pair<int, Image>>& preds,
                              double threshold = 0.5);

}  // namespace longal
