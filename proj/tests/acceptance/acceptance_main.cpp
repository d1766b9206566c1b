// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Every tolerance is pinned here; seeds are fixed so reruns are identical.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <vector>

#include "../oracles.hpp"
#include "sess/cli_main.hpp"
#include "sess/engine.hpp"
#include "sess/metrics.hpp"
#include "sess/simgen.hpp"

using namespace sess;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& details) {
    std::printf("criterion %2d: %s  %s\n", criterion, pass ? "PASS" : "FAIL", details.c_str());
    if (!pass) ++failures;
}

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct CellStats {
    std::vector<double> pdr, fdr, dr, bdr, secs;
    bool traces_ok = true;
    std::string trace_error;
};

/// Simulate/fit/eval replicates of one Table-1 cell at (n, q, p) = (150, 200, 200),
/// validating every selection trace along the way.
CellStats run_cell(double sparsity, int reps, std::uint64_t seed_base) {
    CellStats stats;
    for (int r = 1; r <= reps; ++r) {
        SimConfig sim;
        sim.n = 150;
        sim.p = 200;
        sim.q = 200;
        sim.sparsity = sparsity;
        sim.seed = seed_base + r;
        const SimDataset ds = generate(sim);
        const auto t0 = std::chrono::steady_clock::now();
        const cli::PipelineResult res = cli::fit_pipeline(ds.x, ds.y, ds.groups, SessConfig{});
        stats.secs.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        try {
            validate_trace(res.fit.trace, ds.groups);
        } catch (const std::exception& e) {
            stats.traces_ok = false;
            stats.trace_error = e.what();
        }
        auto [pdr, fdr, dr] = support_metrics(res.b_original, ds.b_true);
        stats.pdr.push_back(pdr);
        stats.fdr.push_back(fdr);
        stats.dr.push_back(dr);
        stats.bdr.push_back(block_metrics(res.b_original, ds.b_true, ds.groups));
    }
    return stats;
}

std::string fmt(const char* pattern, double a, double b, double c, double d) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c, d);
    return buf;
}

}  // namespace

// --- criterion 8 fixture -----------------------------------------------------

namespace {

struct TinyOutcome {
    int exact = 0;
    int oracle_match = 0;
};

/// Single 5x5 block, n = 100, three planted entries with |beta| in [3, 5].
/// The EBIC runs with gamma = 3: the auto formula targets p >> n and is
/// negative at p = 5.
TinyOutcome run_tiny(int seeds) {
    TinyOutcome out;
    for (int seed = 1; seed <= seeds; ++seed) {
        Rng coef = Rng::stream(seed, "tiny-coef");
        Matrix b = Matrix::Zero(5, 5);
        std::vector<int> cells(25);
        for (int i = 0; i < 25; ++i) cells[i] = i;
        for (int t = 0; t < 3; ++t) {
            const int pick = t + static_cast<int>(coef.below(cells.size() - t));
            std::swap(cells[t], cells[pick]);
            const double mag = coef.uniform(3.0, 5.0);
            b(cells[t] % 5, cells[t] / 5) = (coef.uniform() < 0.5 ? -1.0 : 1.0) * mag;
        }
        Rng des = Rng::stream(seed, "tiny-design");
        const Matrix x = gen_design(100, 5, 0.5, des);
        Rng noi = Rng::stream(seed, "tiny-noise");
        auto [y, sigma2] = gen_noise_and_response(x, b, noi);
        GroupSpec g;
        g.predictor_groups = {{0, 1, 2, 3, 4}};
        g.response_groups = {{0, 1, 2, 3, 4}};
        const auto data = expand(x, standardize_columns(y).values, g);
        SessConfig cfg;
        cfg.ebic.gamma = 3.0;
        const auto res = fit(data, g, cfg);

        std::set<std::pair<int, int>> truth, est;
        for (int i = 0; i < 5; ++i)
            for (int l = 0; l < 5; ++l)
                if (b(i, l) != 0.0) truth.insert({i, l});
        for (const auto& [c, v] : res.estimate.entries) est.insert({c.row_a, c.col_m});
        const auto oracle = oracles::single_block_ebic_argmin(data, cfg.ebic);
        out.exact += (est == truth);
        out.oracle_match += (est == oracle);
    }
    return out;
}

}  // namespace

int main() {
    std::printf("SeSS acceptance suite (fixed seeds, pinned tolerances)\n");

    // Criteria 1-3 share the Table-1 cell geometry.
    const CellStats c95 = run_cell(0.95, 20, 20250000);
    const CellStats c90 = run_cell(0.90, 20, 20260000);
    const CellStats c70 = run_cell(0.70, 10, 20270000);

    {
        const double pdr = mean(c95.pdr), fdr = mean(c95.fdr), dr = mean(c95.dr),
                     bdr = mean(c95.bdr);
        const double max_sec = *std::max_element(c95.secs.begin(), c95.secs.end());
        const bool pass = pdr >= 0.90 && pdr <= 1.0 && fdr <= 0.03 && dr >= 1.88 && bdr >= 1.75 &&
                          max_sec <= 90.0;
        report(1, pass,
               fmt("sparsity 0.95, 20 reps: PDR=%.3f FDR=%.3f DR=%.3f BDR=%.3f", pdr, fdr, dr,
                   bdr) +
                   fmt(" (bounds: PDR in [0.90,1], FDR<=0.03, DR>=1.88, BDR>=1.75); max %.1fs/rep",
                       max_sec, 0, 0, 0));
    }
    {
        const double pdr = mean(c90.pdr), fdr = mean(c90.fdr), dr = mean(c90.dr);
        const double max_sec = *std::max_element(c90.secs.begin(), c90.secs.end());
        const bool pass = pdr >= 0.85 && pdr <= 1.0 && fdr <= 0.05 && dr >= 1.85 && max_sec <= 90.0;
        report(2, pass,
               fmt("sparsity 0.90, 20 reps: PDR=%.3f FDR=%.3f DR=%.3f", pdr, fdr, dr, 0) +
                   fmt(" (bounds: PDR in [0.85,1], FDR<=0.05, DR>=1.85); max %.1fs/rep", max_sec,
                       0, 0, 0));
    }
    {
        const double drop = mean(c95.dr) - mean(c70.dr);
        report(3, drop >= 0.1,
               fmt("DR degrades at low sparsity: DR(0.95)=%.3f DR(0.70)=%.3f drop=%.3f (>=0.1)",
                   mean(c95.dr), mean(c70.dr), drop, 0));
    }
    {
        // Canonical-correlation trace vs the whitened-SVD oracle.
        const auto t0 = std::chrono::steady_clock::now();
        Rng rng(4040);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const int n = 10 + static_cast<int>(rng.below(41));
            const Matrix a = oracles::random_matrix(rng, n, 1 + static_cast<int>(rng.below(5)));
            const Matrix b = oracles::random_matrix(rng, n, 1 + static_cast<int>(rng.below(5)));
            worst = std::max(worst,
                             std::abs(cc_trace(a, b).value - oracles::cc_sum_squared_svd(a, b)));
        }
        const double sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report(4, worst <= 1e-8 && sec <= 10.0,
               fmt("1000 random instances: max |cc_trace - svd oracle| = %.2e (<=1e-8) in %.1fs",
                   worst, sec, 0, 0));
    }
    {
        // EBIC against the independently assembled term-by-term oracle.
        Rng rng(5050);
        Matrix x = oracles::random_matrix(rng, 20, 5);
        Matrix y = oracles::random_matrix(rng, 20, 4);
        y.col(0) += 2.0 * x.col(0);
        GroupSpec g;
        g.predictor_groups = {{0, 1}, {2, 3, 4}};
        g.response_groups = {{0, 1}, {2, 3}};
        const auto data = expand(standardize_columns(x).values, standardize_columns(y).values, g);
        const EbicParams params{1.0, 1.0, std::nullopt};
        double worst = 0.0;
        int states = 0;
        for (int k = 0; k < 2 && states < 50; ++k)
            for (int j = 0; j < 2 && states < 50; ++j)
                for (int a = 0; a < data.x_block_size(k) && states < 50; ++a)
                    for (int m = 0; m < data.y_block_size(j) && states < 50; ++m) {
                        ModelState s;
                        s.selected.insert({k, j, a, m});
                        worst = std::max(worst, std::abs(ebic(s, data, params) -
                                                         oracles::ebic_oracle(s, data, params)));
                        ++states;
                    }
        while (states < 50) {
            ModelState s;
            for (int t = 0; t < 2 + static_cast<int>(rng.below(5)); ++t) {
                const int k = static_cast<int>(rng.below(2));
                const int j = static_cast<int>(rng.below(2));
                s.selected.insert({k, j, static_cast<int>(rng.below(data.x_block_size(k))),
                                   static_cast<int>(rng.below(data.y_block_size(j)))});
            }
            worst = std::max(worst, std::abs(ebic(s, data, params) -
                                             oracles::ebic_oracle(s, data, params)));
            ++states;
        }
        report(5, worst <= 1e-9,
               fmt("50 enumerated states: max |ebic - oracle| = %.2e (<=1e-9)", worst, 0, 0, 0));
    }
    {
        const bool pass = c95.traces_ok && c90.traces_ok && c70.traces_ok;
        report(6, pass,
               pass ? "all 50 benchmark traces pass decrease/nesting/no-reuse/termination checks"
                    : ("trace violation: " + c95.trace_error + c90.trace_error + c70.trace_error));
    }
    {
        // Null calibration: B = 0, Y pure noise.
        long total_nne = 0;
        for (int seed = 1; seed <= 100; ++seed) {
            Rng des = Rng::stream(7000 + seed, "design");
            const Matrix x = gen_design(150, 200, 0.5, des);
            Rng noi = Rng::stream(7000 + seed, "noise");
            Matrix y(150, 200);
            for (int c = 0; c < 200; ++c)
                for (int r = 0; r < 150; ++r) y(r, c) = noi.normal();
            Rng grng = Rng::stream(7000 + seed, "groups");
            const GroupSpec g = gen_groups(GroupScheme{}, 200, 200, grng);
            const auto data = expand(x, standardize_columns(y).values, g);
            total_nne += fit(data, g).estimate.support_size();
        }
        const double mean_nne = total_nne / 100.0;
        report(7, mean_nne <= 200.0,
               fmt("null model, 100 seeds: mean NNE = %.2f (<= 200, i.e. 0.5%% of 40000 cells)",
                   mean_nne, 0, 0, 0));
    }
    {
        const TinyOutcome tiny = run_tiny(100);
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "tiny 5x5 problems: exact support %d/100 (>=95), "
                      "matches all-subsets EBIC argmin %d/100 (>=90)",
                      tiny.exact, tiny.oracle_match);
        report(8, tiny.exact >= 95 && tiny.oracle_match >= 90, buf);
    }
    {
        // cmd_bench determinism across worker counts.
        const fs::path dir = fs::temp_directory_path() / "sess_acceptance_bench";
        fs::remove_all(dir);
        fs::create_directories(dir);
        {
            std::ofstream grid(dir / "grid.json");
            grid << R"({"base_seed": 900, "cells": [{"n": 150, "p": 200, "q": 200,)"
                 << R"( "sparsity": 0.95, "scheme": {"type": "equal", "size": 20}}]})";
        }
        std::ostringstream sink;  // keep the bench tables out of the criterion lines
        auto* cout_buf = std::cout.rdbuf(sink.rdbuf());
        const int rc1 = cli::run_cli({"sess", "bench", "--grid", (dir / "grid.json").string(),
                                      "--reps", "2", "--out", (dir / "t1").string(), "--threads",
                                      "1"});
        const int rc8 = cli::run_cli({"sess", "bench", "--grid", (dir / "grid.json").string(),
                                      "--reps", "2", "--out", (dir / "t8").string(), "--threads",
                                      "8"});
        std::cout.rdbuf(cout_buf);
        const std::string a = read_file(dir / "t1" / "aggregate.csv");
        const std::string b = read_file(dir / "t8" / "aggregate.csv");
        fs::remove_all(dir);
        report(9, rc1 == 0 && rc8 == 0 && a == b,
               a == b ? "bench aggregate CSVs byte-identical for --threads 1 and --threads 8"
                      : "aggregates differ between thread counts");
    }
    {
        // Absolute wall-times and external-dataset error values are not
        // asserted (hardware-dependent; dataset not bundled); the split
        // protocol itself must still be deterministic.
        const auto [tr1, te1] = cli::split_rows(118, 100, 31);
        const auto [tr2, te2] = cli::split_rows(118, 100, 31);
        const bool pass = tr1 == tr2 && te1 == te2 && tr1.size() == 100 && te1.size() == 18;
        report(10, pass,
               "absolute runtimes and external-dataset values excluded by design "
               "(hardware/data not bundled); split protocol deterministic, "
               "118 -> 100 train + 18 test");
    }

    if (failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
}
