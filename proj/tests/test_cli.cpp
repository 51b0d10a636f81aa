#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "longal/dataset.hpp"

using namespace longal;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("LONGAL_CLI");
    REQUIRE_MESSAGE(p != nullptr, "LONGAL_CLI must point at the built binary");
    return p;
}

struct CliResult {
    int exit_code = -1;
    std::string out;
};

CliResult run_cli(const std::string& args) {
    fs::path out_file = fs::temp_directory_path() / "longal_cli_stdout.txt";
    std::string cmd = cli_path() + " " + args + " > " + out_file.string() + " 2>/dev/null";
    int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WEXITSTATUS(status);
    std::ifstream f(out_file);
    std::ostringstream ss;
    ss << f.rdbuf();
    r.out = ss.str();
    return r;
}

std::map<std::string, std::string> parse_kv_output(const std::string& out) {
    std::map<std::string, std::string> kv;
    std::istringstream ss(out);
    std::string line;
    while (std::getline(ss, line)) {
        std::size_t eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

fs::path temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("longal_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// log.csv lines with the wall_ms column stripped
std::vector<std::string> log_without_wall(const fs::path& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        std::size_t cut = line.rfind(',');
        lines.push_back(line.substr(0, cut));
    }
    return lines;
}

void write_run_config(const fs::path& path, const fs::path& data_dir, const fs::path& out_dir,
                      const std::string& strategy, double budget, int q0, int q, int repeats) {
    std::ofstream f(path);
    f << "data_dir = " << data_dir.string() << "\n";
    f << "out_dir = " << out_dir.string() << "\n";
    f << "strategy = " << strategy << "\n";
    f << "budget = " << budget << "\n";
    f << "q0 = " << q0 << "\n";
    f << "q = " << q << "\n";
    f << "repeats = " << repeats << "\n";
    f << "base_channels = 2\n";
    f << "max_epochs = 2\n";
    f << "patience = 1\n";
    f << "lr = 0.01\n";
    f << "batch_size = 4\n";
    f << "augment = false\n";
    f << "n_drop = 2\n";
}

}  // namespace

TEST_CASE("synth reports the pool-size law and is byte-reproducible") {
    fs::path d1 = temp_dir("synth_a");
    fs::path d2 = temp_dir("synth_b");
    std::string flags = "--patients 6 --timepoints 3 --hw 64 --slices 4 --seed 7 ";

    CliResult r1 = run_cli("synth " + flags + "--out " + d1.string());
    REQUIRE(r1.exit_code == 0);
    auto kv = parse_kv_output(r1.out);
    CHECK(kv["pairs"] == "72");  // 6 * C(3,2) * 4

    CliResult r2 = run_cli("synth " + flags + "--out " + d2.string());
    REQUIRE(r2.exit_code == 0);
    CHECK(dataset_content_hash(d1.string()) == dataset_content_hash(d2.string()));
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("synth with zero lesions writes empty ground-truth masks") {
    fs::path dir = temp_dir("synth_zero");
    CliResult r = run_cli(
        "synth --patients 2 --timepoints 2 --hw 16 --slices 2 --seed 3 "
        "--lesions-min 0 --lesions-max 0 --out " +
        dir.string());
    REQUIRE(r.exit_code == 0);
    Dataset d = load_dataset(dir.string());
    for (const auto& rec : d.patients)
        for (const auto& [key, mask] : rec.truth)
            for (auto v : mask.v) CHECK(v == 0);
    fs::remove_all(dir);
}

TEST_CASE("synth rejects invalid parameters with exit 2") {
    fs::path dir = temp_dir("synth_bad");
    CliResult r = run_cli(
        "synth --patients 1 --timepoints 2 --hw 16 --slices 2 "
        "--diameter-max 99 --out " +
        dir.string());
    CHECK(r.exit_code == 2);
    fs::remove_all(dir);
}

TEST_CASE("run: budget trace, determinism, eval consistency, report") {
    fs::path data = temp_dir("run_data");
    CliResult synth = run_cli(
        "synth --patients 6 --timepoints 3 --hw 64 --slices 4 --seed 7 --noise 0.01 --out " +
        data.string());
    REQUIRE(synth.exit_code == 0);

    fs::path out1 = temp_dir("run_out1");
    fs::path cfg1 = out1 / "exp.conf";
    write_run_config(cfg1, data, out1, "random", 24.0, 12, 6, 1);

    CliResult r1 = run_cli("run --config " + cfg1.string());
    REQUIRE(r1.exit_code == 0);
    auto kv = parse_kv_output(r1.out);
    CHECK(kv["budget"] == "24");

    // CSV trace: labeled counts 12, 18, 24
    auto lines = log_without_wall(out1 / "log.csv");
    REQUIRE(lines.size() == 4);
    CHECK(lines[1].rfind("0,0,12,", 0) == 0);
    CHECK(lines[2].rfind("0,1,18,", 0) == 0);
    CHECK(lines[3].rfind("0,2,24,", 0) == 0);
    CHECK(fs::exists(out1 / "manifest.json"));
    CHECK(fs::exists(out1 / "selection_r0.csv"));
    CHECK(fs::exists(out1 / "model_r0.ckpt"));

    // identical reruns give identical logs modulo the wall column
    fs::path out2 = temp_dir("run_out2");
    fs::path cfg2 = out2 / "exp.conf";
    write_run_config(cfg2, data, out2, "entropy", 24.0, 12, 6, 1);
    CliResult e1 = run_cli("run --config " + cfg2.string());
    REQUIRE(e1.exit_code == 0);
    auto entropy_log1 = log_without_wall(out2 / "log.csv");
    fs::path out3 = temp_dir("run_out3");
    fs::path cfg3 = out3 / "exp.conf";
    write_run_config(cfg3, data, out3, "entropy", 24.0, 12, 6, 1);
    CliResult e2 = run_cli("run --config " + cfg3.string());
    REQUIRE(e2.exit_code == 0);
    CHECK(entropy_log1 == log_without_wall(out3 / "log.csv"));

    // eval of the written checkpoint reproduces the final log row
    CliResult ev = run_cli("eval --checkpoint " + (out1 / "model_r0.ckpt").string() +
                           " --config " + cfg1.string() + " --split test");
    REQUIRE(ev.exit_code == 0);
    auto ekv = parse_kv_output(ev.out);
    {
        std::istringstream last(lines[3]);
        std::string tok;
        std::vector<std::string> cols;
        while (std::getline(last, tok, ',')) cols.push_back(tok);
        REQUIRE(cols.size() >= 7);
        CHECK(ekv["dice"] == cols[3]);
        CHECK(ekv["recall"] == cols[4]);
        CHECK(ekv["precision"] == cols[5]);
    }

    // report merges runs and averages repeats correctly
    fs::path rep_out = temp_dir("report_out");
    CliResult rep = run_cli("report " + out1.string() + " " + out2.string() + " --out " +
                            rep_out.string());
    REQUIRE(rep.exit_code == 0);
    CHECK(fs::exists(rep_out / "comparison.csv"));
    CHECK(fs::exists(rep_out / ("curve_" + out1.filename().string() + ".csv")));

    fs::remove_all(data);
    fs::remove_all(out1);
    fs::remove_all(out2);
    fs::remove_all(out3);
    fs::remove_all(rep_out);
}

TEST_CASE("report averages repeat rows arithmetically") {
    // hand-built run directory with two repeats
    fs::path dir = temp_dir("report_mean");
    {
        std::ofstream f(dir / "log.csv");
        f << "repeat,iteration,labeled_count,dice,recall,precision,epochs,wall_ms\n";
        f << "0,0,4,0.2000,0.3000,0.4000,2,10\n";
        f << "0,1,6,0.4000,0.5000,0.6000,2,10\n";
        f << "1,0,4,0.4000,0.5000,0.6000,2,12\n";
        f << "1,1,6,0.8000,0.7000,0.8000,2,12\n";
    }
    fs::path out = temp_dir("report_mean_out");
    CliResult r = run_cli("report " + dir.string() + " --out " + out.string());
    REQUIRE(r.exit_code == 0);

    std::ifstream curve(out / ("curve_" + dir.filename().string() + ".csv"));
    std::string header, row0, row1;
    std::getline(curve, header);
    std::getline(curve, row0);
    std::getline(curve, row1);
    CHECK(row0 == "0,4,0.3000,0.4000,0.5000");
    CHECK(row1 == "1,6,0.6000,0.6000,0.7000");

    std::ifstream cmp(out / "comparison.csv");
    std::getline(cmp, header);
    std::string crow;
    std::getline(cmp, crow);
    CHECK(crow.find(",0.6000,0.6000,0.7000,0.6000") != std::string::npos);

    fs::remove_all(dir);
    fs::remove_all(out);
}

TEST_CASE("report on a missing directory exits 3") {
    CliResult r = run_cli("report /nonexistent_longal_dir --out /tmp/longal_report_missing");
    CHECK(r.exit_code == 3);
}

TEST_CASE("run rejects unknown config keys with exit 2") {
    fs::path dir = temp_dir("run_badcfg");
    fs::path cfg = dir / "exp.conf";
    {
        std::ofstream f(cfg);
        f << "data_dir = /tmp\nout_dir = " << dir.string() << "\nbogus_key = 1\n";
    }
    CliResult r = run_cli("run --config " + cfg.string());
    CHECK(r.exit_code == 2);
    fs::remove_all(dir);
}

TEST_CASE("sweep emits combined and summary tables with shared iteration-0 metrics") {
    fs::path data = temp_dir("sweep_data");
    CliResult synth = run_cli(
        "synth --patients 6 --timepoints 2 --hw 16 --slices 3 --seed 9 --noise 0.01 "
        "--lesions-max 1 --diameter-max 4 --out " +
        data.string());
    REQUIRE(synth.exit_code == 0);

    fs::path out = temp_dir("sweep_out");
    fs::path cfg = out / "exp.conf";
    write_run_config(cfg, data, out, "random", 6.0, 3, 1, 1);

    CliResult r = run_cli("sweep --config " + cfg.string() + " --strategies random,entropy");
    REQUIRE(r.exit_code == 0);
    REQUIRE(fs::exists(out / "sweep.csv"));
    REQUIRE(fs::exists(out / "sweep_summary.csv"));

    // identical pool-init seeds: iteration 0 rows agree across strategies
    std::ifstream f(out / "sweep.csv");
    std::string line, random_it0, entropy_it0;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
        if (line.rfind("random,6,0,0,", 0) == 0) random_it0 = line;
        if (line.rfind("entropy,6,0,0,", 0) == 0) entropy_it0 = line;
    }
    REQUIRE(!random_it0.empty());
    REQUIRE(!entropy_it0.empty());
    // strip strategy name and wall column before comparing
    auto strip = [](const std::string& s) {
        std::size_t first = s.find(',');
        std::size_t last = s.rfind(',');
        return s.substr(first, last - first);
    };
    CHECK(strip(random_it0) == strip(entropy_it0));

    std::ifstream sf(out / "sweep_summary.csv");
    std::getline(sf, line);
    CHECK(line == "strategy,budget,status,final_dice,final_recall,final_precision,highest_dice");
    int ok_rows = 0;
    while (std::getline(sf, line))
        if (line.find(",ok,") != std::string::npos) ++ok_rows;
    CHECK(ok_rows == 2);

    fs::remove_all(data);
    fs::remove_all(out);
}
