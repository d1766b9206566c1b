#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sess/engine.hpp"
#include "sess/io.hpp"
#include "sess/metrics.hpp"
#include "sess/simgen.hpp"
#include "sess/version.hpp"

namespace sess {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitParse = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDimension = 4;
inline constexpr int kExitEngine = 5;

namespace cli {

using nlohmann::json;

inline std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

// ---------------------------------------------------------------------------
// Config documents
// ---------------------------------------------------------------------------

inline GroupScheme scheme_from_json(const json& js) {
    GroupScheme scheme;
    if (js.is_string()) {
        const std::string s = js.get<std::string>();
        if (s == "equal" || s == "equal20") {
            scheme.kind = GroupScheme::Kind::Equal;
        } else if (s == "unequal" || s == "unequal2030") {
            scheme.kind = GroupScheme::Kind::Unequal;
        } else {
            throw ParseError("unknown group scheme '" + s + "'", 1);
        }
        return scheme;
    }
    const std::string type = js.at("type").get<std::string>();
    if (type == "equal") {
        scheme.kind = GroupScheme::Kind::Equal;
        if (js.contains("size")) scheme.equal_size = js.at("size").get<int>();
    } else if (type == "unequal") {
        scheme.kind = GroupScheme::Kind::Unequal;
        if (js.contains("sizes")) {
            const auto sizes = js.at("sizes").get<std::vector<int>>();
            if (sizes.size() != 2) throw ParseError("unequal scheme needs two sizes", 1);
            scheme.unequal_small = sizes[0];
            scheme.unequal_large = sizes[1];
        }
    } else {
        throw ParseError("unknown group scheme type '" + type + "'", 1);
    }
    return scheme;
}

inline json scheme_to_json(const GroupScheme& scheme) {
    if (scheme.kind == GroupScheme::Kind::Equal) {
        return json{{"type", "equal"}, {"size", scheme.equal_size}};
    }
    return json{{"type", "unequal"}, {"sizes", {scheme.unequal_small, scheme.unequal_large}}};
}

inline SimConfig sim_config_from_json(const json& js) {
    SimConfig cfg;
    try {
        cfg.n = js.at("n").get<int>();
        cfg.p = js.at("p").get<int>();
        cfg.q = js.at("q").get<int>();
        cfg.sparsity = js.at("sparsity").get<double>();
        if (js.contains("scheme")) cfg.scheme = scheme_from_json(js.at("scheme"));
        if (js.contains("ar_rho")) cfg.ar_rho = js.at("ar_rho").get<double>();
        if (js.contains("seed")) cfg.seed = js.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad simulation config: ") + e.what(), 1);
    }
    if (cfg.sparsity < 0.0 || cfg.sparsity > 1.0) {
        throw ParseError("sparsity must lie in [0, 1]", 1);
    }
    return cfg;
}

inline json sim_config_to_json(const SimConfig& cfg) {
    return json{{"n", cfg.n},           {"p", cfg.p},
                {"q", cfg.q},           {"sparsity", cfg.sparsity},
                {"scheme", scheme_to_json(cfg.scheme)}, {"ar_rho", cfg.ar_rho},
                {"seed", cfg.seed}};
}

inline json parse_json_file(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    json js = json::parse(text, nullptr, false);
    if (js.is_discarded()) throw ParseError("invalid JSON in " + path.string(), 1);
    return js;
}

// ---------------------------------------------------------------------------
// Fit options shared by fit/eval/bench
// ---------------------------------------------------------------------------

struct FitOptions {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    std::optional<double> gamma;
    std::string rho = "auto";  ///< "auto" or a number
    double rho_multiplier = 2.0;
    std::string rule = "se";  ///< "se" or "sd"
    std::optional<int> max_entries;

    SessConfig to_config() const {
        SessConfig cfg;
        cfg.ebic.lambda1 = lambda1;
        cfg.ebic.lambda2 = lambda2;
        cfg.ebic.gamma = gamma;
        cfg.threshold_multiplier = rho_multiplier;
        if (rule == "sd") {
            cfg.threshold_rule = ThresholdRule::CoefficientSd;
        } else if (rule == "se") {
            cfg.threshold_rule = ThresholdRule::OlsStandardError;
        } else {
            throw InvalidConfig("unknown threshold rule '" + rule + "'");
        }
        if (rho != "auto") {
            cfg.threshold_rho = parse_double(rho, 1, 1);
        }
        cfg.max_entries_per_response = max_entries;
        return cfg;
    }

    json to_json() const {
        json js{{"lambda1", lambda1}, {"lambda2", lambda2},       {"rho", rho},
                {"rho_multiplier", rho_multiplier}, {"rule", rule}};
        if (gamma) js["gamma"] = *gamma;
        if (max_entries) js["max_entries"] = *max_entries;
        return js;
    }
};

// ---------------------------------------------------------------------------
// Standardize -> expand -> fit -> map back, shared by every fitting path
// ---------------------------------------------------------------------------

struct PipelineResult {
    FitResult fit;               ///< standardized units
    Matrix b_original;           ///< original units, p_orig x q_orig
    std::vector<EstimateTriplet> triplets;  ///< b_original as sorted triplets
    Vector x_center, x_scale, y_center, y_scale;
};

inline PipelineResult fit_pipeline(const Matrix& x_raw, const Matrix& y_raw,
                                   const GroupSpec& groups, const SessConfig& config) {
    if (x_raw.rows() != y_raw.rows()) {
        throw DimensionMismatch("X has " + std::to_string(x_raw.rows()) + " rows, Y has " +
                                std::to_string(y_raw.rows()));
    }
    PipelineResult out;
    auto xs = standardize_columns(x_raw);
    auto ys = standardize_columns(y_raw);
    out.x_center = std::move(xs.center);
    out.x_scale = std::move(xs.scale);
    out.y_center = std::move(ys.center);
    out.y_scale = std::move(ys.scale);
    const ExpandedDataset data = expand(xs.values, ys.values, groups);
    out.fit = fit(data, groups, config);

    out.b_original = Matrix::Zero(groups.predictor_span(), groups.response_span());
    for (const auto& [coord, value] : out.fit.estimate.entries) {
        const int i = groups.predictor_groups[coord.k][coord.row_a];
        const int l = groups.response_groups[coord.j][coord.col_m];
        out.b_original(i, l) += value * out.y_scale[l] / out.x_scale[i];
    }
    for (Eigen::Index c = 0; c < out.b_original.cols(); ++c) {
        for (Eigen::Index r = 0; r < out.b_original.rows(); ++r) {
            if (out.b_original(r, c) != 0.0) {
                out.triplets.push_back({static_cast<int>(r), static_cast<int>(c),
                                        out.b_original(r, c)});
            }
        }
    }
    std::sort(out.triplets.begin(), out.triplets.end(), [](const auto& a, const auto& b) {
        return std::pair{a.row, a.col} < std::pair{b.row, b.col};
    });
    return out;
}

// ---------------------------------------------------------------------------
// Metrics CSV (fixed row schema)
// ---------------------------------------------------------------------------

inline std::string metrics_csv_header() {
    return "method,sparsity,pdr,fdr,dr,bdr,l1,l2,mse,mspe,nne,time_s";
}

inline std::string metrics_csv_row(const std::string& method, std::optional<double> sparsity,
                                   const MetricsReport& r) {
    std::string out = method + ",";
    out += sparsity ? format_double(*sparsity) : std::string();
    auto add = [&out](const std::string& s) {
        out += ',';
        out += s;
    };
    add(format_double(r.pdr));
    add(format_double(r.fdr));
    add(format_double(r.dr));
    add(format_double(r.bdr));
    add(format_double(r.l1_err));
    add(format_double(r.l2_err));
    add(r.mse ? format_double(*r.mse) : std::string());
    add(r.mspe ? format_double(*r.mspe) : std::string());
    add(std::to_string(r.nne));
    add(format_double(r.wall_time_s));
    return out;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOptions {
    std::filesystem::path config_path;
    std::filesystem::path out_dir;
    std::optional<std::uint64_t> seed;  ///< overrides the config seed
};

inline int cmd_simulate(const SimulateOptions& opts) {
    SimConfig cfg = sim_config_from_json(parse_json_file(opts.config_path));
    if (opts.seed) cfg.seed = *opts.seed;

    std::filesystem::create_directories(opts.out_dir);
    json manifest{{"command", "simulate"},
                  {"version", kVersion},
                  {"timestamp", timestamp_utc()},
                  {"seed", cfg.seed},
                  {"config", sim_config_to_json(cfg)},
                  {"outputs",
                   {{"x", "X.csv"}, {"y", "Y.csv"}, {"b_true", "B_true.csv"},
                    {"groups", "groups.txt"}}}};
    atomic_write(opts.out_dir / "manifest.json", manifest.dump(2) + "\n");

    const SimDataset ds = generate(cfg);
    write_matrix_csv(opts.out_dir / "X.csv", ds.x, "x");
    write_matrix_csv(opts.out_dir / "Y.csv", ds.y, "y");
    write_matrix_csv(opts.out_dir / "B_true.csv", ds.b_true, "y");
    write_groups_file(opts.out_dir / "groups.txt", ds.groups);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitCmdOptions {
    std::filesystem::path x_path, y_path, groups_path, out_dir;
    FitOptions fit;
};

inline int cmd_fit(const FitCmdOptions& opts) {
    const Matrix x = read_matrix_csv(opts.x_path);
    const Matrix y = read_matrix_csv(opts.y_path);
    const GroupSpec groups = read_groups_file(opts.groups_path);
    if (groups.predictor_span() != x.cols() || groups.response_span() != y.cols()) {
        throw DimensionMismatch("groups cover " + std::to_string(groups.predictor_span()) + "x" +
                                std::to_string(groups.response_span()) + " but data is " +
                                std::to_string(x.cols()) + "x" + std::to_string(y.cols()));
    }

    std::filesystem::create_directories(opts.out_dir);
    json manifest{{"command", "fit"},
                  {"version", kVersion},
                  {"timestamp", timestamp_utc()},
                  {"inputs",
                   {{"x", opts.x_path.string()}, {"y", opts.y_path.string()},
                    {"groups", opts.groups_path.string()}}},
                  {"params", opts.fit.to_json()},
                  {"outputs", {{"estimate", "estimate.csv"}, {"trace", "trace.txt"}}}};
    atomic_write(opts.out_dir / "manifest.json", manifest.dump(2) + "\n");

    const PipelineResult res = fit_pipeline(x, y, groups, opts.fit.to_config());
    atomic_write(opts.out_dir / "estimate.csv", triplets_to_csv(res.triplets));
    atomic_write(opts.out_dir / "trace.txt", res.fit.trace.to_string());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOptions {
    std::optional<std::filesystem::path> estimate_path;
    std::optional<std::filesystem::path> truth_path;
    std::filesystem::path groups_path;
    std::optional<std::filesystem::path> x_path, y_path;
    std::optional<int> split_n0;  ///< --split n0=K: fit on K rows, test on the rest
    std::uint64_t seed = 1;
    std::optional<std::filesystem::path> out_path;
    std::string method = "sess";
    std::optional<double> sparsity;
    FitOptions fit;
};

inline Matrix center_columns(const Matrix& m, const Vector& center) {
    Matrix out = m;
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.col(c).array() -= center[c];
    return out;
}

/// Random n0-row training subset and its complement, both sorted ascending.
/// Deterministic in (n, n0, seed).
inline std::pair<std::vector<int>, std::vector<int>> split_rows(int n, int n0,
                                                               std::uint64_t seed) {
    if (n0 < 1 || n0 >= n) throw InvalidConfig("split n0 must lie in [1, rows)");
    std::vector<int> rows(n);
    for (int i = 0; i < n; ++i) rows[i] = i;
    Rng rng = Rng::stream(seed, "split");
    for (int i = 0; i < n0; ++i) {
        const int pick = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(rows[i], rows[pick]);
    }
    std::vector<int> train(rows.begin(), rows.begin() + n0);
    std::vector<int> test(rows.begin() + n0, rows.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {std::move(train), std::move(test)};
}

inline int cmd_eval(const EvalOptions& opts) {
    const GroupSpec groups = read_groups_file(opts.groups_path);
    const int p = groups.predictor_span();
    const int q = groups.response_span();
    MetricsReport report;

    if (opts.split_n0) {
        // Random train/test split, fit on the training rows, error on both.
        if (!opts.x_path || !opts.y_path) {
            throw InvalidConfig("--split requires --x and --y");
        }
        const Matrix x = read_matrix_csv(*opts.x_path);
        const Matrix y = read_matrix_csv(*opts.y_path);
        if (x.rows() != y.rows()) throw DimensionMismatch("X/Y row counts differ");
        const int n = static_cast<int>(x.rows());
        const int n0 = *opts.split_n0;
        if (n0 < 2) throw InvalidConfig("split n0 must be at least 2");
        auto [train, test] = split_rows(n, n0, opts.seed);
        Matrix x_train(n0, x.cols()), y_train(n0, y.cols());
        Matrix x_test(n - n0, x.cols()), y_test(n - n0, y.cols());
        for (int i = 0; i < n0; ++i) {
            x_train.row(i) = x.row(train[i]);
            y_train.row(i) = y.row(train[i]);
        }
        for (int i = 0; i < n - n0; ++i) {
            x_test.row(i) = x.row(test[i]);
            y_test.row(i) = y.row(test[i]);
        }

        const auto t0 = std::chrono::steady_clock::now();
        const PipelineResult res = fit_pipeline(x_train, y_train, groups, opts.fit.to_config());
        report.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        // Centered by the training means; the intercept is handled implicitly.
        auto [mse, mspe, nne] = prediction_metrics(
            res.b_original, center_columns(x_train, res.x_center),
            center_columns(y_train, res.y_center), center_columns(x_test, res.x_center),
            center_columns(y_test, res.y_center));
        report.mse = mse;
        report.mspe = mspe;
        report.nne = nne;
        if (opts.truth_path) {
            const Matrix b_true = read_matrix_csv(*opts.truth_path);
            auto [pdr, fdr, dr] = support_metrics(res.b_original, b_true);
            report.pdr = pdr;
            report.fdr = fdr;
            report.dr = dr;
            report.bdr = block_metrics(res.b_original, b_true, groups);
            auto [l1, l2] = error_norms(res.b_original, b_true);
            report.l1_err = l1;
            report.l2_err = l2;
        }
    } else {
        if (!opts.estimate_path || !opts.truth_path) {
            throw InvalidConfig("eval needs --estimate and --truth (or --split with --x/--y)");
        }
        const auto triplets = triplets_from_csv(read_file(*opts.estimate_path));
        const Matrix b_hat = triplets_to_dense(triplets, p, q);
        const Matrix b_true = read_matrix_csv(*opts.truth_path);
        if (b_true.rows() != p || b_true.cols() != q) {
            throw DimensionMismatch("truth matrix is " + std::to_string(b_true.rows()) + "x" +
                                    std::to_string(b_true.cols()) + ", groups define " +
                                    std::to_string(p) + "x" + std::to_string(q));
        }
        auto [pdr, fdr, dr] = support_metrics(b_hat, b_true);
        report.pdr = pdr;
        report.fdr = fdr;
        report.dr = dr;
        report.bdr = block_metrics(b_hat, b_true, groups);
        auto [l1, l2] = error_norms(b_hat, b_true);
        report.l1_err = l1;
        report.l2_err = l2;
        report.nne = static_cast<long>((b_hat.array() != 0.0).count());
        if (opts.x_path && opts.y_path) {
            const Matrix x = read_matrix_csv(*opts.x_path);
            const Matrix y = read_matrix_csv(*opts.y_path);
            Vector xc = x.colwise().mean(), yc = y.colwise().mean();
            auto [mse, mspe, nne2] = prediction_metrics(b_hat, center_columns(x, xc),
                                                        center_columns(y, yc),
                                                        center_columns(x, xc),
                                                        center_columns(y, yc));
            report.mse = mse;
            (void)mspe;
            (void)nne2;
        }
    }

    const std::string row = metrics_csv_row(opts.method, opts.sparsity, report);
    std::cout << metrics_csv_header() << "\n" << row << "\n";
    if (opts.out_path) {
        atomic_write(*opts.out_path, metrics_csv_header() + "\n" + row + "\n");
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchOptions {
    std::filesystem::path grid_path;
    std::filesystem::path out_dir;
    int reps = 1;
    std::optional<std::uint64_t> seed;  ///< overrides the grid's base_seed
    int threads = 1;
    FitOptions fit;
};

struct BenchCell {
    SimConfig sim;  ///< seed field unused; per-replicate seeds are base + rep
    std::string scheme_label;
};

struct RepOutcome {
    bool ok = false;
    std::string error;
    MetricsReport report;
};

/// One simulate -> fit -> eval replicate; trace invariants are checked on
/// every run. Returned metrics compare against the generated truth in
/// original units.
inline RepOutcome run_replicate(SimConfig sim, std::uint64_t seed, const SessConfig& fit_cfg) {
    RepOutcome out;
    try {
        sim.seed = seed;
        const SimDataset ds = generate(sim);
        const auto t0 = std::chrono::steady_clock::now();
        const PipelineResult res = fit_pipeline(ds.x, ds.y, ds.groups, fit_cfg);
        out.report.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        validate_trace(res.fit.trace, ds.groups);
        auto [pdr, fdr, dr] = support_metrics(res.b_original, ds.b_true);
        out.report.pdr = pdr;
        out.report.fdr = fdr;
        out.report.dr = dr;
        out.report.bdr = block_metrics(res.b_original, ds.b_true, ds.groups);
        auto [l1, l2] = error_norms(res.b_original, ds.b_true);
        out.report.l1_err = l1;
        out.report.l2_err = l2;
        out.report.nne = res.fit.estimate.support_size();
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

inline std::vector<BenchCell> parse_grid(const json& js) {
    std::vector<BenchCell> cells;
    try {
        for (const auto& c : js.at("cells")) {
            BenchCell cell;
            cell.sim = sim_config_from_json(c);
            cell.scheme_label =
                cell.sim.scheme.kind == GroupScheme::Kind::Equal ? "equal" : "unequal";
            cells.push_back(cell);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad grid document: ") + e.what(), 1);
    }
    if (cells.empty()) throw ParseError("grid has no cells", 1);
    return cells;
}

namespace detail {

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline std::string fixed3(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << v;
    return os.str();
}

}  // namespace detail

inline int cmd_bench(const BenchOptions& opts) {
    const json grid_js = parse_json_file(opts.grid_path);
    const std::vector<BenchCell> cells = parse_grid(grid_js);
    std::uint64_t base_seed = 1;
    if (grid_js.contains("base_seed")) base_seed = grid_js.at("base_seed").get<std::uint64_t>();
    if (opts.seed) base_seed = *opts.seed;
    if (opts.reps < 1) throw InvalidConfig("reps must be >= 1");

    int threads = std::max(1, opts.threads);
    if (const char* env = std::getenv("SESS_SINGLE_THREAD"); env && env[0] == '1') threads = 1;

    std::filesystem::create_directories(opts.out_dir);
    json manifest{{"command", "bench"},
                  {"version", kVersion},
                  {"timestamp", timestamp_utc()},
                  {"grid", grid_js},
                  {"base_seed", base_seed},
                  {"reps", opts.reps},
                  {"params", opts.fit.to_json()},
                  {"seed_policy", "replicate r (1-based) uses seed base_seed + r"},
                  {"outputs",
                   {{"replicates", "replicates.csv"}, {"aggregate", "aggregate.csv"},
                    {"table", "aggregate.txt"}}}};
    atomic_write(opts.out_dir / "manifest.json", manifest.dump(2) + "\n");

    const SessConfig fit_cfg = opts.fit.to_config();
    const std::size_t total = cells.size() * static_cast<std::size_t>(opts.reps);
    std::vector<RepOutcome> outcomes(total);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= total) return;
            const std::size_t cell = i / opts.reps;
            const int rep = static_cast<int>(i % opts.reps) + 1;
            outcomes[i] = run_replicate(cells[cell].sim, base_seed + rep, fit_cfg);
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    // Per-replicate rows (includes wall time, so not byte-stable run to run).
    std::string reps_csv =
        "cell,scheme,n,p,q,rep,seed,status," + metrics_csv_header() + ",error\n";
    for (std::size_t i = 0; i < total; ++i) {
        const std::size_t cell = i / opts.reps;
        const int rep = static_cast<int>(i % opts.reps) + 1;
        const auto& sim = cells[cell].sim;
        const auto& o = outcomes[i];
        reps_csv += std::to_string(cell + 1) + "," + cells[cell].scheme_label + "," +
                    std::to_string(sim.n) + "," + std::to_string(sim.p) + "," +
                    std::to_string(sim.q) + "," + std::to_string(rep) + "," +
                    std::to_string(base_seed + rep) + "," + (o.ok ? "ok" : "error") + "," +
                    metrics_csv_row("sess", sim.sparsity, o.report) + "," +
                    (o.ok ? std::string() : o.error) + "\n";
    }
    atomic_write(opts.out_dir / "replicates.csv", reps_csv);

    // Deterministic aggregate (no timing columns).
    std::string agg_csv =
        "method,scheme,sparsity,n,p,q,reps,reps_ok,pdr_mean,pdr_sd,fdr_mean,fdr_sd,dr_mean,dr_sd,"
        "bdr_mean,bdr_sd,l1_mean,l1_sd,l2_mean,l2_sd,nne_mean,nne_sd,status\n";
    std::string table;
    {
        std::ostringstream ts;
        ts << std::left << std::setw(8) << "method" << std::setw(9) << "scheme" << std::setw(10)
           << "sparsity" << std::setw(6) << "n" << std::setw(6) << "p" << std::setw(6) << "q"
           << std::setw(15) << "PDR" << std::setw(15) << "FDR" << std::setw(15) << "DR"
           << std::setw(15) << "BDR" << std::setw(20) << "L1" << std::setw(20) << "L2"
           << std::setw(16) << "time_s" << '\n';
        table = ts.str();
    }
    std::size_t total_ok = 0;
    for (std::size_t cell = 0; cell < cells.size(); ++cell) {
        std::vector<double> pdr, fdr, dr, bdr, l1, l2, nne, time_s;
        for (int rep = 0; rep < opts.reps; ++rep) {
            const auto& o = outcomes[cell * opts.reps + rep];
            if (!o.ok) continue;
            pdr.push_back(o.report.pdr);
            fdr.push_back(o.report.fdr);
            dr.push_back(o.report.dr);
            bdr.push_back(o.report.bdr);
            l1.push_back(o.report.l1_err);
            l2.push_back(o.report.l2_err);
            nne.push_back(static_cast<double>(o.report.nne));
            time_s.push_back(o.report.wall_time_s);
        }
        total_ok += pdr.size();
        const auto& sim = cells[cell].sim;
        using detail::mean_of;
        using detail::sd_of;
        const std::string status = pdr.empty()             ? "failed"
                                   : static_cast<int>(pdr.size()) < opts.reps ? "incomplete"
                                                                              : "ok";
        agg_csv += "sess," + cells[cell].scheme_label + "," + format_double(sim.sparsity) + "," +
                   std::to_string(sim.n) + "," + std::to_string(sim.p) + "," +
                   std::to_string(sim.q) + "," + std::to_string(opts.reps) + "," +
                   std::to_string(pdr.size()) + "," + format_double(mean_of(pdr)) + "," +
                   format_double(sd_of(pdr)) + "," + format_double(mean_of(fdr)) + "," +
                   format_double(sd_of(fdr)) + "," + format_double(mean_of(dr)) + "," +
                   format_double(sd_of(dr)) + "," + format_double(mean_of(bdr)) + "," +
                   format_double(sd_of(bdr)) + "," + format_double(mean_of(l1)) + "," +
                   format_double(sd_of(l1)) + "," + format_double(mean_of(l2)) + "," +
                   format_double(sd_of(l2)) + "," + format_double(mean_of(nne)) + "," +
                   format_double(sd_of(nne)) + "," + status + "\n";

        using detail::fixed3;
        auto cell_fmt = [](const std::vector<double>& v) {
            return detail::fixed3(detail::mean_of(v)) + "(" + detail::fixed3(detail::sd_of(v)) +
                   ")";
        };
        std::ostringstream ts;
        ts << std::left << std::setw(8) << "sess" << std::setw(9) << cells[cell].scheme_label
           << std::setw(10) << fixed3(sim.sparsity) << std::setw(6) << sim.n << std::setw(6)
           << sim.p << std::setw(6) << sim.q << std::setw(15) << cell_fmt(pdr) << std::setw(15)
           << cell_fmt(fdr) << std::setw(15) << cell_fmt(dr) << std::setw(15) << cell_fmt(bdr)
           << std::setw(20) << cell_fmt(l1) << std::setw(20) << cell_fmt(l2) << std::setw(16)
           << cell_fmt(time_s) << '\n';
        table += ts.str();
    }
    atomic_write(opts.out_dir / "aggregate.csv", agg_csv);
    atomic_write(opts.out_dir / "aggregate.txt", table);
    std::cout << table;
    return total_ok == 0 ? kExitEngine : kExitOk;
}

}  // namespace cli
}  // namespace sess
