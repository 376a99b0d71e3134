#include "loadnet/csv.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;
using loadnet::csv::read_file;

namespace {

const std::string kBin = CLI_BIN;
const std::string kFixtures = FIXTURES_DIR;
const std::string kSample = SAMPLE_DIR;

struct Scratch {
    fs::path dir;
    Scratch() : dir("cli_scratch") {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args, const std::string& log = "cli_scratch/log.txt") {
    const std::string cmd = kBin + " " + args + " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string strip_time_rows(const std::string& text) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        if (line.find(",time_s,") == std::string::npos) out += line + "\n";
        pos = end + 1;
    }
    return out;
}

} // namespace

TEST_CASE("estimate pipeline end to end") {
    Scratch scratch;
    const auto out_csv = scratch.path("loads.csv");
    const int code = run("estimate --intensity " + kFixtures + "/ref_intensity.csv" +
                         " --intensity-config " + kFixtures + "/ref_intensity.cfg" +
                         " --activity " + kFixtures + "/ref_activity.csv" + " --out " + out_csv);
    CHECK(code == 0);

    const auto rows = read_file(out_csv);
    REQUIRE(rows.size() == 1 + 9 * 8); // 9 activity rows x 8 pollutants
    CHECK(rows[0].fields[0] == "sector");

    // loads must equal the spreadsheet oracle values
    const auto expected = read_file(kFixtures + "/ref_expected_loads.csv");
    REQUIRE(expected.size() == rows.size());
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].fields[0] == expected[i].fields[0]);
        CHECK(rows[i].fields[2] == expected[i].fields[2]);
        const double got = loadnet::csv::parse_double(rows[i].fields[4], "load", 0);
        const double want = loadnet::csv::parse_double(expected[i].fields[3], "load", 0);
        CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("estimate rejects unknown sector tokens with exit 2") {
    Scratch scratch;
    const auto bad = scratch.path("bad_activity.csv");
    std::ofstream(bad) << "sector,year,employment,output_value\nZZZ,1999,10,0\n";
    const auto log = scratch.path("log.txt");
    const int code = run("estimate --intensity " + kFixtures + "/ref_intensity.csv" +
                             " --intensity-config " + kFixtures + "/ref_intensity.cfg" +
                             " --activity " + bad + " --out " + scratch.path("x.csv"),
                         log);
    CHECK(code == 2);
    const auto text = slurp(log);
    CHECK(text.find("ZZZ") != std::string::npos);
    CHECK(text.find("line 2") != std::string::npos);
}

TEST_CASE("prepare writes normalizer and split artifacts") {
    Scratch scratch;
    const int code = run("prepare --data " + kSample + "/dataset.csv --seed 7 --out " + scratch.path("prep"));
    CHECK(code == 0);
    CHECK(fs::exists(scratch.dir / "prep" / "normalizer.txt"));
    CHECK(fs::exists(scratch.dir / "prep" / "split.csv"));
    const auto split_rows = read_file(scratch.path("prep/split.csv"));
    CHECK(split_rows.size() == 91); // header + 90 rows
}

TEST_CASE("train then predict round trip") {
    Scratch scratch;
    std::ofstream(scratch.path("train.cfg")) << "epochs=30\nrestarts=1\npatience=0\ntopology=MLP\n"
                                                "hidden_layers=1\nnodes_per_hidden=6\nstep_size=0.05\n"
                                                "curve_control=0\n";
    int code = run("train --data " + kSample + "/dataset.csv --seed 3 --config " + scratch.path("train.cfg") +
                   " --out " + scratch.path("model"));
    CHECK(code == 0);
    REQUIRE(fs::exists(scratch.dir / "model" / "model.bundle"));
    CHECK(fs::exists(scratch.dir / "model" / "curve.csv"));

    code = run("predict --model " + scratch.path("model/model.bundle") + " --rows " + kSample +
               "/dataset.csv --out " + scratch.path("pred.csv"));
    CHECK(code == 0);
    const auto rows = read_file(scratch.path("pred.csv"));
    REQUIRE(rows.size() == 1 + 90 * 14);
    CHECK(rows[0].fields == std::vector<std::string>{"pollutant", "desired", "actual", "trend_pct"});

    // corrupted model file fails with exit 4
    std::ofstream(scratch.path("broken.model")) << "not a bundle";
    code = run("predict --model " + scratch.path("broken.model") + " --rows " + kSample +
               "/dataset.csv --out " + scratch.path("x.csv"));
    CHECK(code == 4);
}

TEST_CASE("sweep produces reports and the champion; regeneration matches") {
    Scratch scratch;
    std::ofstream(scratch.path("sweep.cfg")) << "epochs=6\nrestarts=2\npatience=0\ntopologies=MLP,RBF\n"
                                                "hidden_range=0,1\nnodes_per_hidden=4\nrbf_centers=8\n"
                                                "step_size=0.05\ncurve_control=0\n";
    const std::string common = " --data " + kSample + "/dataset.csv --seed 11 --config " +
                               scratch.path("sweep.cfg");

    int code = run("sweep" + common + " --out " + scratch.path("out1"));
    CHECK(code == 0);
    REQUIRE(fs::exists(scratch.dir / "out1" / "bench.csv"));
    CHECK(fs::exists(scratch.dir / "out1" / "bench.txt"));
    CHECK(fs::exists(scratch.dir / "out1" / "champion.model"));
    CHECK(fs::exists(scratch.dir / "out1" / "runs" / "index.csv"));

    // same seed reruns identically apart from measured wall time
    code = run("sweep" + common + " --out " + scratch.path("out2"));
    CHECK(code == 0);
    CHECK(strip_time_rows(slurp(scratch.path("out1/bench.csv"))) ==
          strip_time_rows(slurp(scratch.path("out2/bench.csv"))));

    // regeneration from the archive is byte-identical, time row included
    code = run("report --runs " + scratch.path("out1/runs") + " --out " + scratch.path("regen"));
    CHECK(code == 0);
    CHECK(slurp(scratch.path("regen/bench.csv")) == slurp(scratch.path("out1/bench.csv")));
    CHECK(slurp(scratch.path("regen/bench.txt")) == slurp(scratch.path("out1/bench.txt")));
}
