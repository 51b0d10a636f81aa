#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "longal/dataset.hpp"
#include "longal/error.hpp"
#include "longal/pairing.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace longal {

namespace {

void write_bytes(const fs::path& path, const void* data, std::size_t n) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!f) fail(ErrorCode::IoError, "short write to " + path.string());
}

std::vector<char> read_bytes(const fs::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::streamsize n = f.tellg();
    f.seekg(0);
    std::vector<char> buf(static_cast<std::size_t>(n));
    f.read(buf.data(), n);
    if (!f) fail(ErrorCode::IoError, "short read from " + path.string());
    return buf;
}

std::string mask_filename(const PairKey& k) {
    return "k" + std::to_string(k.slice_index) + "_t" + std::to_string(k.t) + "-t" +
           std::to_string(k.t_follow) + ".bin";
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& dir) {
    fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + dir);

    json manifest;
    manifest["format"] = "longal-dataset";
    manifest["version"] = 1;
    json plist = json::array();
    for (const auto& p : d.patients) plist.push_back(p.patient_id);
    manifest["patients"] = plist;
    if (!d.split_tag.empty()) manifest["split"] = d.split_tag;
    std::string mtext = manifest.dump(2) + "\n";
    write_bytes(root / "dataset.json", mtext.data(), mtext.size());

    for (const auto& p : d.patients) {
        fs::path pdir = root / p.patient_id;
        fs::create_directories(pdir / "masks", ec);
        if (ec) fail(ErrorCode::IoError, "cannot create " + pdir.string());
        for (const auto& v : p.volumes) {
            json header;
            header["patient_id"] = v.patient_id;
            header["timepoint"] = v.timepoint;
            header["h"] = v.h;
            header["w"] = v.w;
            header["c"] = v.c;
            if (v.spacing) header["spacing"] = {(*v.spacing)[0], (*v.spacing)[1], (*v.spacing)[2]};
            std::string htext = header.dump(2) + "\n";
            std::string stem = "t" + std::to_string(v.timepoint);
            write_bytes(pdir / (stem + ".json"), htext.data(), htext.size());
            write_bytes(pdir / (stem + ".bin"), v.data.data(), v.data.size() * sizeof(float));
        }
        for (const auto& [key, mask] : p.truth) {
            write_bytes(pdir / "masks" / mask_filename(key), mask.v.data(), mask.v.size());
        }
    }
}

Dataset load_dataset(const std::string& dir) {
    fs::path root(dir);
    auto mbytes = read_bytes(root / "dataset.json");
    json manifest = json::parse(mbytes.begin(), mbytes.end(), nullptr, false);
    if (manifest.is_discarded() || manifest.value("format", "") != "longal-dataset")
        fail(ErrorCode::IoError, dir + " is not a dataset directory");

    Dataset d;
    if (manifest.contains("split")) d.split_tag = manifest["split"].get<std::string>();

    for (const auto& pid_json : manifest["patients"]) {
        std::string pid = pid_json.get<std::string>();
        fs::path pdir = root / pid;
        PatientRecord rec;
        rec.patient_id = pid;

        // volume headers, ascending timepoint
        std::vector<fs::path> headers;
        for (const auto& entry : fs::directory_iterator(pdir)) {
            if (entry.path().extension() == ".json") headers.push_back(entry.path());
        }
        std::sort(headers.begin(), headers.end());
        for (const auto& hpath : headers) {
            auto hbytes = read_bytes(hpath);
            json header = json::parse(hbytes.begin(), hbytes.end(), nullptr, false);
            if (header.is_discarded()) fail(ErrorCode::IoError, "bad header " + hpath.string());
            Volume v;
            v.patient_id = header.at("patient_id").get<std::string>();
            v.timepoint = header.at("timepoint").get<int>();
            v.h = header.at("h").get<int>();
            v.w = header.at("w").get<int>();
            v.c = header.at("c").get<int>();
            if (v.patient_id != pid)
                fail(ErrorCode::DimensionMismatch, "header patient mismatch in " + hpath.string());
            if (header.contains("spacing")) {
                auto sp = header["spacing"];
                v.spacing = std::array<double, 3>{sp[0].get<double>(), sp[1].get<double>(),
                                                  sp[2].get<double>()};
            }
            fs::path bpath = hpath;
            bpath.replace_extension(".bin");
            auto bytes = read_bytes(bpath);
            if (bytes.size() != v.voxel_count() * sizeof(float))
                fail(ErrorCode::DimensionMismatch,
                     bpath.string() + " size does not match header dims");
            v.data.resize(v.voxel_count());
            std::memcpy(v.data.data(), bytes.data(), bytes.size());
            v.validate();
            rec.volumes.push_back(std::move(v));
        }
        std::sort(rec.volumes.begin(), rec.volumes.end(),
                  [](const Volume& a, const Volume& b) { return a.timepoint < b.timepoint; });
        if (rec.volumes.size() < 2)
            fail(ErrorCode::InsufficientTimepoints, pid + " has fewer than 2 volumes");
        for (std::size_t i = 1; i < rec.volumes.size(); ++i) {
            if (rec.volumes[i].h != rec.volumes[0].h || rec.volumes[i].w != rec.volumes[0].w ||
                rec.volumes[i].c != rec.volumes[0].c)
                fail(ErrorCode::DimensionMismatch, pid + " volumes differ in (h,w,c)");
        }

        // every implied pair must have a ground-truth mask of the right size
        const int h = rec.volumes[0].h, w = rec.volumes[0].w, c = rec.volumes[0].c;
        for (std::size_t a = 0; a < rec.volumes.size(); ++a) {
            for (std::size_t b = a + 1; b < rec.volumes.size(); ++b) {
                for (int k = 0; k < c; ++k) {
                    PairKey key{pid, k, rec.volumes[a].timepoint, rec.volumes[b].timepoint};
                    fs::path mpath = pdir / "masks" / mask_filename(key);
                    if (!fs::exists(mpath))
                        fail(ErrorCode::MissingGroundTruth, "missing mask " + mpath.string());
                    auto bytes = read_bytes(mpath);
                    if (bytes.size() != static_cast<std::size_t>(h) * w)
                        fail(ErrorCode::DimensionMismatch, mpath.string() + " size mismatch");
                    Mask m(h, w);
                    std::memcpy(m.v.data(), bytes.data(), bytes.size());
                    rec.truth.emplace(key, std::move(m));
                }
            }
        }
        d.patients.push_back(std::move(rec));
    }
    std::sort(d.patients.begin(), d.patients.end(),
              [](const PatientRecord& a, const PatientRecord& b) {
                  return a.patient_id < b.patient_id;
              });
    return d;
}

std::uint64_t dataset_content_hash(const std::string& dir) {
    fs::path root(dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const char* data, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(data[i]);
            h *= 0x00000100000001b3ULL;
        }
    };
    for (const auto& f : files) {
        std::string rel = fs::relative(f, root).generic_string();
        mix(rel.data(), rel.size());
        auto bytes = read_bytes(f);
        mix(bytes.data(), bytes.size());
    }
    return h;
}

std::array<Dataset, 3> split_patients(const Dataset& d, const std::array<double, 3>& ratios,
                                      std::uint64_t seed) {
    double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) fail(ErrorCode::InvalidConfig, "split ratios must sum to 1");
    const std::size_t n = d.patients.size();

    std::size_t n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
    std::size_t n_val = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
    if (n_train + n_val > n) n_val = n - n_train;
    std::size_t n_test = n - n_train - n_val;
    if ((ratios[0] > 0 && n_train == 0) || (ratios[1] > 0 && n_val == 0) ||
        (ratios[2] > 0 && n_test == 0))
        fail(ErrorCode::TooFewPatients, "not enough patients for nonempty splits");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    std::array<Dataset, 3> out;
    out[0].split_tag = "train";
    out[1].split_tag = "val";
    out[2].split_tag = "test";
    for (std::size_t i = 0; i < n; ++i) {
        int bucket = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
        out[bucket].patients.push_back(d.patients[order[i]]);
    }
    for (auto& ds : out) {
        std::sort(ds.patients.begin(), ds.patients.end(),
                  [](const PatientRecord& a, const PatientRecord& b) {
                      return a.patient_id < b.patient_id;
                  });
    }
    return out;
}

}  // namespace longal
