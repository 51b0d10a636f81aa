#include <doctest.h>

#include <set>

#include "longal/pairing.hpp"
#include "longal/rng.hpp"
#include "longal/types.hpp"

using namespace longal;

namespace {

Volume make_volume(const std::string& pid, int t, int h, int w, int c, float fill = 0.0f) {
    Volume v;
    v.patient_id = pid;
    v.timepoint = t;
    v.h = h;
    v.w = w;
    v.c = c;
    v.data.assign(static_cast<std::size_t>(h) * w * c, fill);
    return v;
}

// independent oracle: enumerate every (patient, k, t, t') with t' > t
std::size_t exhaustive_pair_count(const std::vector<Volume>& vols) {
    std::size_t count = 0;
    for (const auto& a : vols) {
        for (const auto& b : vols) {
            if (a.patient_id != b.patient_id) continue;
            if (!(b.timepoint > a.timepoint)) continue;
            for (int k = 0; k < a.c; ++k) ++count;
        }
    }
    return count;
}

}  // namespace

TEST_CASE("slice_volume splits into c planes in ascending order") {
    Volume v = make_volume("p0", 1, 2, 2, 3);
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) v.at(i, j, k) = static_cast<float>(k);
    auto slices = slice_volume(v);
    REQUIRE(slices.size() == 3);
    for (int k = 0; k < 3; ++k) {
        CHECK(slices[k].slice_index == k);
        CHECK(slices[k].pixels.h == 2);
        CHECK(slices[k].pixels.w == 2);
        for (float px : slices[k].pixels.v) CHECK(px == static_cast<float>(k));
    }
}

TEST_CASE("slice_volume degenerate c=1") {
    Volume v = make_volume("p0", 1, 4, 5, 1, 0.25f);
    auto slices = slice_volume(v);
    REQUIRE(slices.size() == 1);
    CHECK(slices[0].pixels.h == 4);
    CHECK(slices[0].pixels.w == 5);
}

TEST_CASE("slice_volume extracts constant planes exactly") {
    Volume v = make_volume("p0", 2, 3, 3, 4);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) v.at(i, j, 2) = 0.7f;
    auto slices = slice_volume(v);
    for (float px : slices[2].pixels.v) CHECK(px == 0.7f);
}

TEST_CASE("build_pair_pool: one patient, T=2, c=5 gives 5 pairs") {
    std::vector<Volume> vols = {make_volume("p0", 1, 4, 4, 5), make_volume("p0", 2, 4, 4, 5)};
    PairPool pool = build_pair_pool(vols);
    CHECK(pool.size() == 5);
}

TEST_CASE("build_pair_pool: T=3, c=4 gives 12 pairs, matching the enumerator") {
    std::vector<Volume> vols = {make_volume("p0", 1, 4, 4, 4), make_volume("p0", 2, 4, 4, 4),
                                make_volume("p0", 3, 4, 4, 4)};
    PairPool pool = build_pair_pool(vols);
    CHECK(pool.size() == 12);
    CHECK(pool.size() == exhaustive_pair_count(vols));
}

TEST_CASE("pool-size law on randomized shapes vs exhaustive enumeration") {
    Rng rng(99);
    for (int trial = 0; trial < 25; ++trial) {
        int n_patients = rng.range_int(1, 5);
        std::vector<Volume> vols;
        for (int p = 0; p < n_patients; ++p) {
            int T = rng.range_int(2, 4);
            int c = rng.range_int(1, 6);
            for (int t = 1; t <= T; ++t)
                vols.push_back(make_volume("p" + std::to_string(p), t, 2, 2, c));
        }
        PairPool pool = build_pair_pool(vols);
        CHECK(pool.size() == exhaustive_pair_count(vols));
        CHECK(pool.size() == pair_pool_size(vols));
    }
}

TEST_CASE("build_pair_pool rejects dimension mismatches and single timepoints") {
    std::vector<Volume> bad_dims = {make_volume("p0", 1, 4, 4, 3), make_volume("p0", 2, 4, 5, 3)};
    CHECK_THROWS_AS(build_pair_pool(bad_dims), Error);
    std::vector<Volume> single = {make_volume("p0", 1, 4, 4, 3)};
    CHECK_THROWS_AS(build_pair_pool(single), Error);
}

TEST_CASE("pool ordering is canonical and deterministic") {
    std::vector<Volume> vols = {make_volume("p1", 2, 2, 2, 2), make_volume("p0", 1, 2, 2, 3),
                                make_volume("p0", 2, 2, 2, 3), make_volume("p1", 1, 2, 2, 2),
                                make_volume("p1", 3, 2, 2, 2)};
    PairPool pool = build_pair_pool(vols);
    for (std::size_t i = 1; i < pool.pairs.size(); ++i)
        CHECK(pool.pairs[i - 1].key < pool.pairs[i].key);
    CHECK(pool.index_of.at(pool.pairs.front().key) == 0);
}

TEST_CASE("difference antisymmetry: diff(a,b) = -diff(b,a)") {
    Rng rng(5);
    Image a(6, 7), b(6, 7);
    for (auto& x : a.v) x = rng.uniform_float();
    for (auto& x : b.v) x = rng.uniform_float();
    Image d1 = image_difference(a, b);
    Image d2 = image_difference(b, a);
    for (std::size_t i = 0; i < d1.size(); ++i) CHECK(d1.v[i] == -d2.v[i]);
}

TEST_CASE("pair difference is followup minus baseline, exactly") {
    std::vector<Volume> vols = {make_volume("p0", 1, 2, 2, 1, 0.25f),
                                make_volume("p0", 2, 2, 2, 1, 0.75f)};
    PairPool pool = build_pair_pool(vols);
    REQUIRE(pool.size() == 1);
    const SlicePair& p = pool.pairs[0];
    CHECK(p.key.t == 1);
    CHECK(p.key.t_follow == 2);
    for (float d : p.difference.v) CHECK(d == 0.5f);
}

TEST_CASE("labeled/unlabeled partition holds under labeling sequences") {
    std::vector<Volume> vols = {make_volume("p0", 1, 2, 2, 4), make_volume("p0", 2, 2, 2, 4),
                                make_volume("p0", 3, 2, 2, 4)};
    PairPool pool = build_pair_pool(vols);
    Rng rng(7);
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::size_t labeled_count = 0;
    for (std::size_t i : order) {
        const PairKey& key = pool.pairs[i].key;
        ChangeLabel lbl;
        lbl.key = key;
        lbl.mask = Mask(2, 2);
        pool.mark_labeled(key, lbl);
        ++labeled_count;
        CHECK(pool.labeled.size() == labeled_count);
        CHECK(pool.unlabeled_pairs().size() == pool.size() - labeled_count);
        CHECK(pool.labels.size() == labeled_count);
    }
}

TEST_CASE("pair key string form") {
    PairKey k{"p007", 12, 1, 2};
    CHECK(k.str() == "p007/k12/t1-t2");
    PairKey parsed = PairKey::parse("p007/k12/t1-t2");
    CHECK(parsed == k);
}

TEST_CASE("assemble_input stacks channels in channel-major order") {
    std::vector<Volume> vols = {make_volume("p0", 1, 2, 2, 1, 0.0f),
                                make_volume("p0", 2, 2, 2, 1, 1.0f)};
    PairPool pool = build_pair_pool(vols);
    ModelInput in = assemble_input(pool.pairs[0]);
    CHECK(in.data.size() == 12);
    for (int i = 0; i < 4; ++i) {
        CHECK(in.channel(0)[i] == 0.0f);
        CHECK(in.channel(1)[i] == 1.0f);
        CHECK(in.channel(2)[i] == 1.0f);
    }
}

TEST_CASE("assemble_input zero difference when baseline equals followup") {
    std::vector<Volume> vols = {make_volume("p0", 1, 2, 2, 1, 0.4f),
                                make_volume("p0", 2, 2, 2, 1, 0.4f)};
    PairPool pool = build_pair_pool(vols);
    ModelInput in = assemble_input(pool.pairs[0]);
    for (int i = 0; i < 4; ++i) CHECK(in.channel(2)[i] == 0.0f);
}

TEST_CASE("make_slice_pair rejects reversed timepoints") {
    Slice a, b;
    a.patient_id = b.patient_id = "p0";
    a.slice_index = b.slice_index = 0;
    a.timepoint = 2;
    b.timepoint = 1;
    a.pixels = Image(2, 2);
    b.pixels = Image(2, 2);
    CHECK_THROWS_AS(make_slice_pair(a, b), Error);
}

TEST_CASE("assemble_change_map thresholds per voxel") {
    Image p0(2, 2, 0.0f), p1(2, 2, 0.0f);
    p1.at(0, 1) = 0.9f;
    ChangeMap m = assemble_change_map({{0, p0}, {1, p1}}, 0.5);
    CHECK(m.c == 2);
    std::size_t positives = 0;
    for (auto v : m.voxels) positives += v;
    CHECK(positives == 1);
    CHECK(m.at(0, 1, 1) == 1);
}

TEST_CASE("assemble_change_map all-zero probabilities give an empty map") {
    Image p(3, 3, 0.0f);
    ChangeMap m = assemble_change_map({{0, p}}, 0.5);
    for (auto v : m.voxels) CHECK(v == 0);
}

TEST_CASE("threshold sweep gives monotonically non-increasing positive counts") {
    Rng rng(11);
    std::vector<std::pair<int, Image>> preds;
    for (int k = 0; k < 3; ++k) {
        Image img(4, 4);
        for (auto& x : img.v) x = rng.uniform_float();
        preds.emplace_back(k, img);
    }
    // oracle: direct scan per threshold
    std::size_t prev = SIZE_MAX;
    for (double thr : {0.3, 0.5, 0.7}) {
        ChangeMap m = assemble_change_map(preds, thr);
        std::size_t count = 0;
        for (auto v : m.voxels) count += v;
        std::size_t expect = 0;
        for (const auto& [k, img] : preds)
            for (float px : img.v) expect += static_cast<double>(px) >= thr ? 1 : 0;
        CHECK(count == expect);
        CHECK(count <= prev);
        prev = count;
    }
}

TEST_CASE("assemble_change_map rejects missing and duplicate slices") {
    Image p(2, 2, 0.0f);
    CHECK_THROWS_AS(assemble_change_map({{0, p}, {0, p}}, 0.5), Error);
    CHECK_THROWS_AS(assemble_change_map({{0, p}, {2, p}}, 0.5), Error);
}

TEST_CASE("binary masks round-trip through assemble_change_map at 0.5") {
    Rng rng(3);
    std::vector<std::pair<int, Image>> preds;
    for (int k = 0; k < 2; ++k) {
        Image img(4, 4);
        for (auto& x : img.v) x = rng.uniform() < 0.3 ? 1.0f : 0.0f;
        preds.emplace_back(k, img);
    }
    ChangeMap m = assemble_change_map(preds, 0.5);
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                CHECK(static_cast<float>(m.at(i, j, k)) == preds[k].second.at(i, j));
}
