#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "sess/cli_main.hpp"

using namespace sess;
using namespace sess::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("sess_test_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    os << content;
}

const std::string kSmallConfig =
    R"({"n": 60, "p": 40, "q": 40, "sparsity": 0.9, "scheme": {"type": "equal", "size": 20},)"
    R"( "ar_rho": 0.5, "seed": 7})";

}  // namespace

TEST_CASE("simulate writes the full artifact set at benchmark scale") {
    TempDir dir("simulate");
    write(dir / "cfg.json",
          R"({"n": 150, "p": 200, "q": 200, "sparsity": 0.95,)"
          R"( "scheme": {"type": "equal", "size": 20}, "seed": 3})");
    REQUIRE(run_cli({"sess", "simulate", "--config", dir / "cfg.json", "--out", dir / "out"}) ==
            kExitOk);
    const Matrix x = read_matrix_csv(dir.path / "out" / "X.csv");
    const Matrix y = read_matrix_csv(dir.path / "out" / "Y.csv");
    const Matrix b = read_matrix_csv(dir.path / "out" / "B_true.csv");
    REQUIRE(x.rows() == 150);
    REQUIRE(x.cols() == 200);
    REQUIRE(y.rows() == 150);
    REQUIRE(y.cols() == 200);
    REQUIRE(b.rows() == 200);
    REQUIRE(b.cols() == 200);
    REQUIRE(fs::exists(dir.path / "out" / "manifest.json"));
    const GroupSpec groups = read_groups_file(dir.path / "out" / "groups.txt");
    REQUIRE(groups.predictor_group_count() == 10);
}

TEST_CASE("simulate with sparsity 1 emits an all-zero coefficient file") {
    TempDir dir("simulate_zero");
    write(dir / "cfg.json",
          R"({"n": 20, "p": 20, "q": 20, "sparsity": 1.0,)"
          R"( "scheme": {"type": "equal", "size": 20}, "seed": 9})");
    REQUIRE(run_cli({"sess", "simulate", "--config", dir / "cfg.json", "--out", dir / "out"}) ==
            kExitOk);
    REQUIRE(read_matrix_csv(dir.path / "out" / "B_true.csv").cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("simulate output is byte-identical for a fixed seed") {
    TempDir dir("simulate_det");
    write(dir / "cfg.json", kSmallConfig);
    REQUIRE(run_cli({"sess", "simulate", "--config", dir / "cfg.json", "--out", dir / "a"}) == 0);
    REQUIRE(run_cli({"sess", "simulate", "--config", dir / "cfg.json", "--out", dir / "b"}) == 0);
    for (const char* f : {"X.csv", "Y.csv", "B_true.csv", "groups.txt"}) {
        REQUIRE(read_file(dir.path / "a" / f) == read_file(dir.path / "b" / f));
    }
}

TEST_CASE("simulate -> fit -> eval round trip without manual edits") {
    TempDir dir("roundtrip");
    write(dir / "cfg.json", kSmallConfig);
    REQUIRE(run_cli({"sess", "simulate", "--config", dir / "cfg.json", "--out", dir / "d"}) == 0);
    REQUIRE(run_cli({"sess", "fit", "--x", dir / "d/X.csv", "--y", dir / "d/Y.csv", "--groups",
                     dir / "d/groups.txt", "--out", dir / "f"}) == 0);
    REQUIRE(fs::exists(dir.path / "f" / "trace.txt"));
    const auto triplets = triplets_from_csv(read_file(dir.path / "f" / "estimate.csv"));
    REQUIRE(!triplets.empty());

    REQUIRE(run_cli({"sess", "eval", "--estimate", dir / "f/estimate.csv", "--truth",
                     dir / "d/B_true.csv", "--groups", dir / "d/groups.txt", "--sparsity", "0.9",
                     "--out", dir / "m.csv"}) == 0);
    const std::string metrics = read_file(dir / "m.csv");
    REQUIRE(metrics.rfind(metrics_csv_header() + "\n", 0) == 0);
    // A row with a healthy discovery rate on this easy problem.
    const auto row = metrics.substr(metrics.find('\n') + 1);
    REQUIRE(row.rfind("sess,0.9,", 0) == 0);
}

TEST_CASE("fit with a prohibitive rho writes a header-only estimate") {
    TempDir dir("empty_fit");
    write(dir / "cfg.json", kSmallConfig);
    REQUIRE(run_cli({"sess", "simulate", "--config", dir / "cfg.json", "--out", dir / "d"}) == 0);
    REQUIRE(run_cli({"sess", "fit", "--x", dir / "d/X.csv", "--y", dir / "d/Y.csv", "--groups",
                     dir / "d/groups.txt", "--out", dir / "f", "--rho", "1e12"}) == 0);
    REQUIRE(read_file(dir.path / "f" / "estimate.csv") == "row_index,col_index,value\n");
}

TEST_CASE("cli exit codes distinguish failure classes") {
    TempDir dir("exit_codes");
    write(dir / "bad.csv", "a,b\n1.0,oops\n");
    write(dir / "ok.csv", "a,b\n1.0,2.0\n2.0,1.0\n0.5,0.25\n");
    write(dir / "groups.txt", "[predictors]\ng1: 1-2\n[responses]\nr1: 1-2\n");

    SECTION("malformed CSV cell -> 2") {
        REQUIRE(run_cli({"sess", "fit", "--x", dir / "bad.csv", "--y", dir / "ok.csv", "--groups",
                         dir / "groups.txt", "--out", dir / "f"}) == kExitParse);
    }
    SECTION("missing file -> 3") {
        REQUIRE(run_cli({"sess", "fit", "--x", dir / "nope.csv", "--y", dir / "ok.csv",
                         "--groups", dir / "groups.txt", "--out", dir / "f"}) == kExitIo);
    }
    SECTION("group/data shape mismatch -> 4") {
        write(dir / "wide_groups.txt", "[predictors]\ng1: 1-5\n[responses]\nr1: 1-2\n");
        REQUIRE(run_cli({"sess", "fit", "--x", dir / "ok.csv", "--y", dir / "ok.csv", "--groups",
                         dir / "wide_groups.txt", "--out", dir / "f"}) == kExitDimension);
    }
    SECTION("unknown flag -> 2") {
        REQUIRE(run_cli({"sess", "fit", "--bogus"}) == kExitParse);
    }
    SECTION("bad config json -> 2") {
        write(dir / "bad.json", "{");
        REQUIRE(run_cli({"sess", "simulate", "--config", dir / "bad.json", "--out", dir / "o"}) ==
                kExitParse);
    }
}

TEST_CASE("eval scores a perfect estimate and the 3-4-5 fixture") {
    TempDir dir("eval_fixtures");
    write(dir / "groups.txt", "[predictors]\ng1: 1-2\n[responses]\nr1: 1-2\n");

    SECTION("perfect estimate") {
        write(dir / "truth.csv", "y1,y2\n3,0\n0,-4\n");
        write(dir / "est.csv", "row_index,col_index,value\n1,1,3\n2,2,-4\n");
        REQUIRE(run_cli({"sess", "eval", "--estimate", dir / "est.csv", "--truth",
                         dir / "truth.csv", "--groups", dir / "groups.txt", "--out",
                         dir / "m.csv"}) == 0);
        const std::string row = read_file(dir / "m.csv");
        REQUIRE(row.find("sess,,1,0,2,2,0,0,,,2,") != std::string::npos);
    }
    SECTION("3-4-5 error norms") {
        write(dir / "truth.csv", "y1,y2\n3,0\n0,-4\n");
        write(dir / "est.csv", "row_index,col_index,value\n");
        REQUIRE(run_cli({"sess", "eval", "--estimate", dir / "est.csv", "--truth",
                         dir / "truth.csv", "--groups", dir / "groups.txt", "--out",
                         dir / "m.csv"}) == 0);
        const std::string row = read_file(dir / "m.csv");
        // pdr=0, fdr=0, dr=1, bdr=1, l1=7, l2=5
        REQUIRE(row.find(",0,0,1,1,7,5,") != std::string::npos);
    }
}

TEST_CASE("split_rows produces the requested train/test sizes") {
    const auto [train, test] = split_rows(118, 100, 42);
    REQUIRE(train.size() == 100);
    REQUIRE(test.size() == 18);
    std::set<int> all(train.begin(), train.end());
    all.insert(test.begin(), test.end());
    REQUIRE(all.size() == 118);
    REQUIRE(*all.begin() == 0);
    REQUIRE(*all.rbegin() == 117);
    REQUIRE(std::is_sorted(train.begin(), train.end()));
    const auto [train2, test2] = split_rows(118, 100, 42);
    REQUIRE(train == train2);
    const auto [train3, test3] = split_rows(118, 70, 42);
    REQUIRE(train3.size() == 70);
    REQUIRE(test3.size() == 48);
}

TEST_CASE("eval --split fits on the training rows and reports both errors") {
    TempDir dir("eval_split");
    write(dir / "cfg.json", kSmallConfig);
    REQUIRE(run_cli({"sess", "simulate", "--config", dir / "cfg.json", "--out", dir / "d"}) == 0);
    REQUIRE(run_cli({"sess", "eval", "--x", dir / "d/X.csv", "--y", dir / "d/Y.csv", "--groups",
                     dir / "d/groups.txt", "--truth", dir / "d/B_true.csv", "--split", "n0=40",
                     "--seed", "11", "--out", dir / "m.csv"}) == 0);
    const std::string text = read_file(dir / "m.csv");
    const auto row = text.substr(text.find('\n') + 1);
    // mse and mspe fields populated (not empty between commas)
    std::vector<std::string> fields;
    std::istringstream rs(row);
    std::string f;
    while (std::getline(rs, f, ',')) fields.push_back(f);
    REQUIRE(fields.size() == 12);
    REQUIRE(!fields[8].empty());   // mse
    REQUIRE(!fields[9].empty());   // mspe
    REQUIRE(std::stod(fields[9]) >= std::stod(fields[8]) * 0.1);
    // identical invocation is byte-identical apart from timing
    REQUIRE(run_cli({"sess", "eval", "--x", dir / "d/X.csv", "--y", dir / "d/Y.csv", "--groups",
                     dir / "d/groups.txt", "--truth", dir / "d/B_true.csv", "--split", "n0=40",
                     "--seed", "11", "--out", dir / "m2.csv"}) == 0);
    auto strip_time = [](std::string s) { return s.substr(0, s.rfind(',')); };
    REQUIRE(strip_time(read_file(dir / "m.csv")) == strip_time(read_file(dir / "m2.csv")));
}

TEST_CASE("bench aggregates deterministically") {
    TempDir dir("bench");
    write(dir / "grid.json",
          R"({"base_seed": 30, "cells": [{"n": 60, "p": 40, "q": 40, "sparsity": 0.9,)"
          R"( "scheme": {"type": "equal", "size": 20}}]})");

    SECTION("thread count does not change the aggregate") {
        REQUIRE(run_cli({"sess", "bench", "--grid", dir / "grid.json", "--reps", "3", "--out",
                         dir / "b1", "--threads", "1"}) == 0);
        REQUIRE(run_cli({"sess", "bench", "--grid", dir / "grid.json", "--reps", "3", "--out",
                         dir / "b4", "--threads", "4"}) == 0);
        REQUIRE(read_file(dir.path / "b1" / "aggregate.csv") ==
                read_file(dir.path / "b4" / "aggregate.csv"));
        REQUIRE(fs::exists(dir.path / "b1" / "replicates.csv"));
        REQUIRE(fs::exists(dir.path / "b1" / "aggregate.txt"));
    }
    SECTION("SESS_SINGLE_THREAD forces one worker without changing results") {
        setenv("SESS_SINGLE_THREAD", "1", 1);
        REQUIRE(run_cli({"sess", "bench", "--grid", dir / "grid.json", "--reps", "2", "--out",
                         dir / "env1", "--threads", "8"}) == 0);
        unsetenv("SESS_SINGLE_THREAD");
        REQUIRE(run_cli({"sess", "bench", "--grid", dir / "grid.json", "--reps", "2", "--out",
                         dir / "env0", "--threads", "8"}) == 0);
        REQUIRE(read_file(dir.path / "env1" / "aggregate.csv") ==
                read_file(dir.path / "env0" / "aggregate.csv"));
    }
    SECTION("replicate failures mark the cell but do not sink the run") {
        write(dir / "mixed.json",
              R"({"base_seed": 30, "cells": [)"
              R"({"n": 60, "p": 40, "q": 40, "sparsity": 0.9, "scheme": {"type": "equal", "size": 20}},)"
              R"({"n": 60, "p": 25, "q": 40, "sparsity": 0.9, "scheme": {"type": "equal", "size": 20}}]})");
        REQUIRE(run_cli({"sess", "bench", "--grid", dir / "mixed.json", "--reps", "2", "--out",
                         dir / "mixed"}) == 0);
        const std::string agg = read_file(dir.path / "mixed" / "aggregate.csv");
        REQUIRE(agg.find(",ok\n") != std::string::npos);
        REQUIRE(agg.find(",failed\n") != std::string::npos);
        const std::string reps = read_file(dir.path / "mixed" / "replicates.csv");
        REQUIRE(reps.find(",error,") != std::string::npos);
    }
    SECTION("a grid whose every replicate fails exits nonzero") {
        write(dir / "allbad.json",
              R"({"cells": [{"n": 60, "p": 25, "q": 40, "sparsity": 0.9,)"
              R"( "scheme": {"type": "equal", "size": 20}}]})");
        REQUIRE(run_cli({"sess", "bench", "--grid", dir / "allbad.json", "--reps", "2", "--out",
                         dir / "allbad"}) == kExitEngine);
    }
    SECTION("single replicate reports zero standard deviations") {
        REQUIRE(run_cli({"sess", "bench", "--grid", dir / "grid.json", "--reps", "1", "--out",
                         dir / "b"}) == 0);
        const std::string agg = read_file(dir.path / "b" / "aggregate.csv");
        auto row = agg.substr(agg.find('\n') + 1);
        while (!row.empty() && row.back() == '\n') row.pop_back();
        std::vector<std::string> fields;
        std::istringstream rs(row);
        std::string f;
        while (std::getline(rs, f, ',')) fields.push_back(f);
        REQUIRE(fields[7] == "1");   // reps_ok
        REQUIRE(fields[9] == "0");   // pdr_sd
        REQUIRE(fields[11] == "0");  // fdr_sd
        REQUIRE(fields.back() == "ok");
    }
}

TEST_CASE("version flag reports the tool version") {
    REQUIRE(run_cli({"sess", "--version"}) == 0);
}
