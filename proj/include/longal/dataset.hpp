#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "longal/rng.hpp"
#include "longal/types.hpp"

namespace longal {

// One patient's longitudinal series plus the ground-truth change masks for
// every implied slice pair.
struct PatientRecord {
    std::string patient_id;
    std::vector<Volume> volumes;      // ascending timepoint
    std::map<PairKey, Mask> truth;    // change mask per (k, t, t')
};

struct Dataset {
    std::vector<PatientRecord> patients;  // sorted by patient_id
    std::string split_tag;                // "", "train", "val" or "test"

    std::vector<Volume> all_volumes() const;
    const PatientRecord* find(const std::string& patient_id) const;
};

// ---------------------------------------------------------------------------
// synthetic longitudinal volumes
// ---------------------------------------------------------------------------

struct SynthParams {
    int n_patients = 1;
    int timepoints_per_patient = 2;
    int h = 64, w = 64, c = 6;
    int lesion_count_min = 1;      // lesions introduced per timepoint
    int lesion_count_max = 3;
    int lesion_diameter_min = 3;   // voxels
    int lesion_diameter_max = 10;
    double noise_sigma = 0.0;
    int misalignment_px = 0;       // integer translation of follow-ups
    std::uint64_t seed = 0;

    void validate() const;
};

struct LesionRecord {
    std::string patient_id;
    int intro_timepoint = 1;                      // 1 = present from baseline
    std::vector<std::array<int, 3>> voxels;       // canonical (i, j, k)
    float intensity = 0.9f;
};

struct SynthBookkeeping {
    std::vector<LesionRecord> lesions;
    // patient_id -> per-timepoint (dy, dx) shift, index 0 unused
    std::map<std::string, std::vector<std::array<int, 2>>> shifts;
};

// Deterministic function of params.seed. Each patient gets an elliptical
// foreground with smooth texture, persistent baseline lesions, and new
// bright lesions per follow-up timepoint; the change mask of pair (t, t')
// is the union of lesions introduced after t, in the follow-up's frame.
// Throws GeometryError if a lesion cannot be placed in 100 attempts.
Dataset generate_synthetic(const SynthParams& p, SynthBookkeeping* book = nullptr);

// ---------------------------------------------------------------------------
// on-disk format: one directory per patient, raw little-endian f32 volumes
// with JSON sidecar headers, masks as raw u8 keyed by pair
// ---------------------------------------------------------------------------

void save_dataset(const Dataset& d, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// FNV-1a over file names and contents, for run manifests.
std::uint64_t dataset_content_hash(const std::string& dir);

// ---------------------------------------------------------------------------
// patient-level split
// ---------------------------------------------------------------------------

// Disjoint patient-level split, deterministic per seed. Ratios must sum to 1
// within 1e-9; each nonzero ratio must receive at least one patient.
std::array<Dataset, 3> split_patients(const Dataset& d, const std::array<double, 3>& ratios,
                                      std::uint64_t seed);

}  // namespace longal
