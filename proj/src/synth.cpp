#include <algorithm>
#include <cmath>
#include <cstdio>

#include "longal/dataset.hpp"
#include "longal/error.hpp"

namespace longal {

std::vector<Volume> Dataset::all_volumes() const {
    std::vector<Volume> out;
    for (const auto& p : patients)
        for (const auto& v : p.volumes) out.push_back(v);
    return out;
}

const PatientRecord* Dataset::find(const std::string& patient_id) const {
    for (const auto& p : patients)
        if (p.patient_id == patient_id) return &p;
    return nullptr;
}

void SynthParams::validate() const {
    if (n_patients < 1) fail(ErrorCode::InvalidConfig, "n_patients must be >= 1");
    if (timepoints_per_patient < 2) fail(ErrorCode::InvalidConfig, "need at least 2 timepoints");
    if (h < 1 || w < 1 || c < 1) fail(ErrorCode::InvalidConfig, "volume dims must be >= 1");
    if (lesion_count_min < 0 || lesion_count_max < lesion_count_min)
        fail(ErrorCode::InvalidConfig, "bad lesion count range");
    int lim = h < w ? h : w;
    if (lesion_diameter_min < 1 || lesion_diameter_max < lesion_diameter_min ||
        lesion_diameter_max > lim)
        fail(ErrorCode::InvalidConfig, "lesion diameter range must lie in [1, min(h,w)]");
    if (noise_sigma < 0.0) fail(ErrorCode::InvalidConfig, "noise_sigma must be >= 0");
    if (misalignment_px < 0) fail(ErrorCode::InvalidConfig, "misalignment_px must be >= 0");
}

namespace {

struct Ellipsoid {
    double ci, cj, ck;  // center
    double ri, rj, rk;  // semi-axes

    bool contains(int i, int j, int k) const {
        double di = (i - ci) / ri, dj = (j - cj) / rj, dk = (k - ck) / rk;
        return di * di + dj * dj + dk * dk <= 1.0;
    }
};

struct Blob {
    int intro_t;
    float intensity;
    std::vector<std::array<int, 3>> voxels;
};

// smooth low-frequency texture from a few random cosine modes, in [-1, 1]
struct Texture {
    struct Mode {
        double fi, fj, fk, phase, amp;
    };
    std::vector<Mode> modes;
    double norm = 1.0;

    static Texture draw(Rng& rng) {
        Texture t;
        double total = 0.0;
        for (int m = 0; m < 4; ++m) {
            Mode mo;
            mo.fi = rng.uniform(0.5, 2.0);
            mo.fj = rng.uniform(0.5, 2.0);
            mo.fk = rng.uniform(0.5, 1.5);
            mo.phase = rng.uniform(0.0, 6.283185307179586);
            mo.amp = rng.uniform(0.5, 1.0);
            total += mo.amp;
            t.modes.push_back(mo);
        }
        t.norm = total;
        return t;
    }

    double at(double u, double v, double s) const {
        double acc = 0.0;
        for (const auto& m : modes)
            acc += m.amp * std::cos(6.283185307179586 * (m.fi * u + m.fj * v + m.fk * s) + m.phase);
        return acc / norm;
    }
};

bool blob_voxels(const Ellipsoid& blob, const Ellipsoid& brain, int h, int w, int c,
                 const std::vector<std::uint8_t>& occupied,
                 std::vector<std::array<int, 3>>& voxels_out) {
    voxels_out.clear();
    int i0 = std::max(0, static_cast<int>(std::floor(blob.ci - blob.ri)));
    int i1 = std::min(h - 1, static_cast<int>(std::ceil(blob.ci + blob.ri)));
    int j0 = std::max(0, static_cast<int>(std::floor(blob.cj - blob.rj)));
    int j1 = std::min(w - 1, static_cast<int>(std::ceil(blob.cj + blob.rj)));
    int k0 = std::max(0, static_cast<int>(std::floor(blob.ck - blob.rk)));
    int k1 = std::min(c - 1, static_cast<int>(std::ceil(blob.ck + blob.rk)));
    for (int k = k0; k <= k1; ++k) {
        for (int i = i0; i <= i1; ++i) {
            for (int j = j0; j <= j1; ++j) {
                if (!blob.contains(i, j, k)) continue;
                if (!brain.contains(i, j, k)) return false;  // must stay inside foreground
                std::size_t idx = (static_cast<std::size_t>(k) * h + i) * w + j;
                if (occupied[idx]) return false;  // keep lesions disjoint
                voxels_out.push_back({i, j, k});
            }
        }
    }
    return !voxels_out.empty();
}

// places `count` disjoint lesions inside the brain, 100 attempts each
void place_lesions(int count, int intro_t, const SynthParams& p, const Ellipsoid& brain,
                   Rng& rng, std::vector<std::uint8_t>& occupied, std::vector<Blob>& blobs) {
    std::vector<std::array<int, 3>> voxels;
    for (int l = 0; l < count; ++l) {
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            Ellipsoid e;
            double di = rng.range_int(p.lesion_diameter_min, p.lesion_diameter_max);
            double dj = rng.range_int(p.lesion_diameter_min, p.lesion_diameter_max);
            int dk_max = std::min(p.lesion_diameter_max, p.c);
            double dk = rng.range_int(std::min(p.lesion_diameter_min, dk_max), dk_max);
            e.ri = di / 2.0;
            e.rj = dj / 2.0;
            e.rk = std::max(0.5, dk / 2.0);
            // propose the center inside the shrunken foreground ellipsoid;
            // the voxel-level check below still has the final say
            double ux, uy, uz;
            do {
                ux = rng.uniform(-1.0, 1.0);
                uy = rng.uniform(-1.0, 1.0);
                uz = rng.uniform(-1.0, 1.0);
            } while (ux * ux + uy * uy + uz * uz > 1.0);
            e.ci = brain.ci + ux * std::max(0.0, brain.ri - e.ri);
            e.cj = brain.cj + uy * std::max(0.0, brain.rj - e.rj);
            e.ck = brain.ck + uz * std::max(0.0, brain.rk - e.rk);
            if (!blob_voxels(e, brain, p.h, p.w, p.c, occupied, voxels)) continue;
            Blob b;
            b.intro_t = intro_t;
            b.intensity = static_cast<float>(rng.uniform(0.85, 0.98));
            b.voxels = voxels;
            for (const auto& v : voxels)
                occupied[(static_cast<std::size_t>(v[2]) * p.h + v[0]) * p.w + v[1]] = 1;
            blobs.push_back(std::move(b));
            placed = true;
        }
        if (!placed)
            fail(ErrorCode::GeometryError,
                 "could not place a lesion inside the foreground after 100 attempts");
    }
}

// integer translation with zero fill, applied plane by plane
void translate_volume(std::vector<float>& data, int h, int w, int c, int dy, int dx) {
    if (dy == 0 && dx == 0) return;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<float> tmp(plane);
    for (int k = 0; k < c; ++k) {
        float* pl = data.data() + k * plane;
        std::fill(tmp.begin(), tmp.end(), 0.0f);
        for (int i = 0; i < h; ++i) {
            int si = i - dy;
            if (si < 0 || si >= h) continue;
            for (int j = 0; j < w; ++j) {
                int sj = j - dx;
                if (sj < 0 || sj >= w) continue;
                tmp[static_cast<std::size_t>(i) * w + j] = pl[static_cast<std::size_t>(si) * w + sj];
            }
        }
        std::copy(tmp.begin(), tmp.end(), pl);
    }
}

}  // namespace

Dataset generate_synthetic(const SynthParams& p, SynthBookkeeping* book) {
    p.validate();
    const int T = p.timepoints_per_patient;
    const std::size_t plane = static_cast<std::size_t>(p.h) * p.w;
    const std::size_t nvox = plane * p.c;

    Dataset out;
    out.patients.resize(p.n_patients);
    if (book) {
        book->lesions.clear();
        book->shifts.clear();
    }

    for (int n = 0; n < p.n_patients; ++n) {
        char pid_buf[16];
        std::snprintf(pid_buf, sizeof(pid_buf), "p%03d", n);
        const std::string pid = pid_buf;
        Rng rng(seed_combine(p.seed, static_cast<std::uint64_t>(n)));

        PatientRecord& rec = out.patients[n];
        rec.patient_id = pid;

        // elliptical brain foreground, generous z extent so every slice has
        // a nonzero cross-section
        Ellipsoid brain;
        brain.ci = p.h / 2.0 + rng.uniform(-0.03, 0.03) * p.h;
        brain.cj = p.w / 2.0 + rng.uniform(-0.03, 0.03) * p.w;
        brain.ck = (p.c - 1) / 2.0;
        brain.ri = rng.uniform(0.32, 0.42) * p.h;
        brain.rj = rng.uniform(0.32, 0.42) * p.w;
        brain.rk = 0.75 * p.c;

        Texture tex = Texture::draw(rng);

        // lesions: intro_t = 1 for persistent baseline findings, >= 2 for
        // new lesions that define the change masks
        std::vector<std::uint8_t> occupied(nvox, 0);
        std::vector<Blob> blobs;
        for (int t = 1; t <= T; ++t) {
            int count = rng.range_int(p.lesion_count_min, p.lesion_count_max);
            place_lesions(count, t, p, brain, rng, occupied, blobs);
        }

        // per-timepoint acquisition shift; baseline stays in the canonical frame
        std::vector<std::array<int, 2>> shifts(static_cast<std::size_t>(T) + 1, {0, 0});
        for (int t = 2; t <= T; ++t) {
            if (p.misalignment_px > 0) {
                shifts[t][0] = rng.range_int(-p.misalignment_px, p.misalignment_px);
                shifts[t][1] = rng.range_int(-p.misalignment_px, p.misalignment_px);
            }
        }

        // canonical anatomy shared by all timepoints
        std::vector<float> anatomy(nvox);
        for (int k = 0; k < p.c; ++k) {
            for (int i = 0; i < p.h; ++i) {
                for (int j = 0; j < p.w; ++j) {
                    float v = 0.0f;
                    if (brain.contains(i, j, k)) {
                        double u = static_cast<double>(i) / p.h;
                        double vv = static_cast<double>(j) / p.w;
                        double s = static_cast<double>(k) / p.c;
                        v = static_cast<float>(0.45 + 0.2 * tex.at(u, vv, s));
                    }
                    anatomy[(static_cast<std::size_t>(k) * p.h + i) * p.w + j] = v;
                }
            }
        }

        // compose each timepoint: anatomy + lesions introduced so far, then
        // shift, then independent noise, clamped to [0,1]
        rec.volumes.resize(T);
        for (int t = 1; t <= T; ++t) {
            Volume& vol = rec.volumes[t - 1];
            vol.patient_id = pid;
            vol.timepoint = t;
            vol.h = p.h;
            vol.w = p.w;
            vol.c = p.c;
            vol.data = anatomy;
            for (const Blob& b : blobs) {
                if (b.intro_t > t) continue;
                for (const auto& v : b.voxels) {
                    float& px = vol.data[(static_cast<std::size_t>(v[2]) * p.h + v[0]) * p.w + v[1]];
                    px = std::max(px, b.intensity);
                }
            }
            translate_volume(vol.data, p.h, p.w, p.c, shifts[t][0], shifts[t][1]);
            if (p.noise_sigma > 0.0) {
                Rng noise_rng(seed_combine(p.seed, static_cast<std::uint64_t>(n), 0x6e6f697365ULL,
                                           static_cast<std::uint64_t>(t)));
                for (std::size_t i = 0; i < nvox; ++i) {
                    vol.data[i] = static_cast<float>(vol.data[i] + noise_rng.normal(0.0, p.noise_sigma));
                }
            }
            for (float& px : vol.data) px = std::clamp(px, 0.0f, 1.0f);
        }

        // change masks: union of lesions with t < intro <= t', in the
        // follow-up's frame
        for (int t = 1; t <= T; ++t) {
            for (int tf = t + 1; tf <= T; ++tf) {
                std::vector<std::uint8_t> changed(nvox, 0);
                for (const Blob& b : blobs) {
                    if (b.intro_t <= t || b.intro_t > tf) continue;
                    for (const auto& v : b.voxels) {
                        int i = v[0] + shifts[tf][0];
                        int j = v[1] + shifts[tf][1];
                        if (i < 0 || i >= p.h || j < 0 || j >= p.w) continue;
                        changed[(static_cast<std::size_t>(v[2]) * p.h + i) * p.w + j] = 1;
                    }
                }
                for (int k = 0; k < p.c; ++k) {
                    PairKey key{pid, k, t, tf};
                    Mask m(p.h, p.w);
                    std::copy_n(changed.data() + k * plane, plane, m.v.data());
                    rec.truth.emplace(key, std::move(m));
                }
            }
        }

        if (book) {
            for (const Blob& b : blobs) {
                LesionRecord lr;
                lr.patient_id = pid;
                lr.intro_timepoint = b.intro_t;
                lr.voxels = b.voxels;
                lr.intensity = b.intensity;
                book->lesions.push_back(std::move(lr));
            }
            book->shifts[pid] = shifts;
        }
    }

    return out;
}

}  // namespace longal
