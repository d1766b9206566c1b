#pragma once

#include <CLI11.hpp>

#include "sess/cli.hpp"

namespace sess {
namespace cli {

/// Parse "n0=K" (or a bare integer) from the --split flag.
inline int parse_split_n0(const std::string& s) {
    std::string v = s;
    if (v.rfind("n0=", 0) == 0) v = v.substr(3);
    int n0 = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), n0);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size() || n0 < 1) {
        throw ParseError("bad --split value '" + s + "', expected n0=K", 1);
    }
    return n0;
}

inline void add_fit_flags(CLI::App* app, FitOptions& fit) {
    app->add_option("--lambda1", fit.lambda1, "EBIC entry penalty weight");
    app->add_option("--lambda2", fit.lambda2, "EBIC combinatorial penalty weight");
    double gamma_val = 0.0;
    auto* g = app->add_option("--gamma", gamma_val,
                              "EBIC gamma (default: 1 - ln n / (2 ln p))");
    g->each([&fit](const std::string& s) { fit.gamma = std::stod(s); });
    app->add_option("--rho", fit.rho, "threshold rho: 'auto' or a number");
    app->add_option("--rho-mult", fit.rho_multiplier, "multiplier on the auto threshold");
    app->add_option("--rule", fit.rule, "auto-threshold rule: se | sd")
        ->check(CLI::IsMember({"se", "sd"}));
    int max_entries = 0;
    auto* me = app->add_option("--max-entries", max_entries,
                               "cap on selected predictors per response (default n-1)");
    me->each([&fit](const std::string& s) { fit.max_entries = std::stoi(s); });
}

/// Full command-line surface; returns a process exit code.
inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"SeSS: sequential stepwise screening for grouped multiresponse regression"};
    app.set_version_flag("--version", std::string("sess ") + kVersion);
    app.require_subcommand(1);

    SimulateOptions sim_opts;
    std::uint64_t sim_seed = 0;
    auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
    sim->add_option("--config", sim_opts.config_path, "simulation config JSON")->required();
    sim->add_option("--out", sim_opts.out_dir, "output directory")->required();
    auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "override the config seed");

    FitCmdOptions fit_opts;
    auto* fitc = app.add_subcommand("fit", "run the selection on CSV data");
    fitc->add_option("--x", fit_opts.x_path, "predictor CSV")->required();
    fitc->add_option("--y", fit_opts.y_path, "response CSV")->required();
    fitc->add_option("--groups", fit_opts.groups_path, "groups file")->required();
    fitc->add_option("--out", fit_opts.out_dir, "output directory")->required();
    add_fit_flags(fitc, fit_opts.fit);

    EvalOptions eval_opts;
    std::string split_arg;
    std::filesystem::path est_path, truth_path, ex_path, ey_path, eout_path;
    double eval_sparsity = 0.0;
    auto* eval = app.add_subcommand("eval", "score an estimate or a train/test split");
    auto* est_opt = eval->add_option("--estimate", est_path, "estimate triplet CSV");
    auto* truth_opt = eval->add_option("--truth", truth_path, "true coefficient CSV");
    eval->add_option("--groups", eval_opts.groups_path, "groups file")->required();
    auto* ex_opt = eval->add_option("--x", ex_path, "predictor CSV");
    auto* ey_opt = eval->add_option("--y", ey_path, "response CSV");
    auto* split_opt =
        eval->add_option("--split", split_arg, "train/test split, e.g. n0=100 (fits on train)");
    eval->add_option("--seed", eval_opts.seed, "split seed");
    auto* eout_opt = eval->add_option("--out", eout_path, "also write the metrics row here");
    eval->add_option("--method", eval_opts.method, "method label for the CSV row");
    auto* spars_opt = eval->add_option("--sparsity", eval_sparsity, "sparsity label for the row");
    add_fit_flags(eval, eval_opts.fit);

    BenchOptions bench_opts;
    std::uint64_t bench_seed = 0;
    auto* bench = app.add_subcommand("bench", "simulate/fit/eval over a grid of cells");
    bench->add_option("--grid", bench_opts.grid_path, "grid JSON")->required();
    bench->add_option("--out", bench_opts.out_dir, "output directory")->required();
    bench->add_option("--reps", bench_opts.reps, "replicates per cell");
    auto* bench_seed_opt = bench->add_option("--seed", bench_seed, "override grid base seed");
    bench->add_option("--threads", bench_opts.threads, "parallel replicate workers");
    add_fit_flags(bench, bench_opts.fit);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitParse;
    }

    try {
        if (sim->parsed()) {
            if (*sim_seed_opt) sim_opts.seed = sim_seed;
            return cmd_simulate(sim_opts);
        }
        if (fitc->parsed()) return cmd_fit(fit_opts);
        if (eval->parsed()) {
            if (*est_opt) eval_opts.estimate_path = est_path;
            if (*truth_opt) eval_opts.truth_path = truth_path;
            if (*ex_opt) eval_opts.x_path = ex_path;
            if (*ey_opt) eval_opts.y_path = ey_path;
            if (*split_opt) eval_opts.split_n0 = parse_split_n0(split_arg);
            if (*eout_opt) eval_opts.out_path = eout_path;
            if (*spars_opt) eval_opts.sparsity = eval_sparsity;
            return cmd_eval(eval_opts);
        }
        if (bench->parsed()) {
            if (*bench_seed_opt) bench_opts.seed = bench_seed;
            return cmd_bench(bench_opts);
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const InvalidConfig& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const DimensionMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDimension;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEngine;
    }
    return kExitParse;
}

/// Convenience overload for in-process invocation.
inline int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cli
}  // namespace sess
