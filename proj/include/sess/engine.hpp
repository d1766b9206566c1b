#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sess/criterion.hpp"
#include "sess/groups.hpp"
#include "sess/numerics.hpp"
#include "sess/screening.hpp"

namespace sess {

// ---------------------------------------------------------------------------
// Selection trace
// ---------------------------------------------------------------------------

enum class TraceEventKind {
    BlockChosen,
    RowChosen,
    EntryAccepted,
    RowAbandoned,
    BlockClosed,
    Terminated,
};

struct TraceEvent {
    TraceEventKind kind;
    int k = -1;
    int j = -1;
    int row_a = -1;
    int col_m = -1;
    double score = 0.0;
    double ebic_before = 0.0;
    double ebic_after = 0.0;
    std::string reason;
};

/// Ordered log of every decision the driver makes, one event per line when
/// serialized. Indices are 1-based in the text form.
struct SelectionTrace {
    std::vector<TraceEvent> events;

    void serialize(std::ostream& os) const {
        os << std::setprecision(17);
        for (const auto& e : events) {
            switch (e.kind) {
                case TraceEventKind::BlockChosen:
                    os << "block_chosen k=" << e.k + 1 << " j=" << e.j + 1 << " score=" << e.score;
                    break;
                case TraceEventKind::RowChosen:
                    os << "row_chosen k=" << e.k + 1 << " j=" << e.j + 1 << " a=" << e.row_a + 1
                       << " score=" << e.score;
                    break;
                case TraceEventKind::EntryAccepted:
                    os << "entry_accepted k=" << e.k + 1 << " j=" << e.j + 1 << " a=" << e.row_a + 1
                       << " m=" << e.col_m + 1 << " ebic_before=" << e.ebic_before
                       << " ebic_after=" << e.ebic_after;
                    break;
                case TraceEventKind::RowAbandoned:
                    os << "row_abandoned k=" << e.k + 1 << " j=" << e.j + 1 << " a=" << e.row_a + 1;
                    break;
                case TraceEventKind::BlockClosed:
                    os << "block_closed k=" << e.k + 1 << " j=" << e.j + 1;
                    break;
                case TraceEventKind::Terminated:
                    os << "terminated reason=" << e.reason;
                    break;
            }
            os << '\n';
        }
    }

    std::string to_string() const {
        std::ostringstream os;
        serialize(os);
        return os.str();
    }
};

/// Structural audit of a trace: well-nested events, strictly decreasing
/// EBIC across acceptances, no reuse of closed blocks or exhausted rows,
/// and the acceptance-count bound. Throws Error on the first violation.
inline void validate_trace(const SelectionTrace& trace, const GroupSpec& groups) {
    const int K = groups.predictor_group_count();
    const int J = groups.response_group_count();
    long long total_cells = 0;
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < J; ++j)
            total_cells += static_cast<long long>(groups.predictor_groups[k].size()) *
                           static_cast<long long>(groups.response_groups[j].size());

    auto fail = [](const std::string& msg) { throw Error("trace invariant violated: " + msg); };

    bool in_block = false, in_row = false, terminated = false;
    int cur_k = -1, cur_j = -1, cur_a = -1;
    int row_accepts = 0, block_accepts = 0;
    bool after_abandoned_row = false;
    std::set<std::pair<int, int>> visited_blocks;
    std::map<std::pair<int, int>, std::set<int>> used_rows;
    std::set<BlockCoordinate> accepted;
    std::optional<double> last_ebic;

    for (const auto& e : trace.events) {
        if (terminated) fail("event after termination");
        switch (e.kind) {
            case TraceEventKind::BlockChosen: {
                if (in_block) fail("block chosen while a block is open");
                if (e.k < 0 || e.k >= K || e.j < 0 || e.j >= J) fail("block index out of range");
                if (!visited_blocks.insert({e.k, e.j}).second) fail("block pair revisited");
                in_block = true;
                cur_k = e.k;
                cur_j = e.j;
                block_accepts = 0;
                after_abandoned_row = false;
                break;
            }
            case TraceEventKind::RowChosen: {
                if (!in_block) fail("row chosen outside a block");
                if (after_abandoned_row) fail("row chosen after the block's row search ended");
                if (in_row && row_accepts == 0) fail("row left without entries and without abandon");
                if (e.k != cur_k || e.j != cur_j) fail("row event does not match open block");
                if (e.row_a < 0 ||
                    e.row_a >= static_cast<int>(groups.predictor_groups[cur_k].size()))
                    fail("row index out of range");
                if (!used_rows[{cur_k, cur_j}].insert(e.row_a).second)
                    fail("exhausted row rechosen within its block");
                in_row = true;
                cur_a = e.row_a;
                row_accepts = 0;
                break;
            }
            case TraceEventKind::EntryAccepted: {
                if (!in_row) fail("entry accepted outside a row");
                if (e.k != cur_k || e.j != cur_j || e.row_a != cur_a)
                    fail("entry event does not match open row");
                if (e.col_m < 0 ||
                    e.col_m >= static_cast<int>(groups.response_groups[cur_j].size()))
                    fail("entry column out of range");
                if (!accepted.insert({e.k, e.j, e.row_a, e.col_m}).second)
                    fail("coefficient accepted twice");
                if (!(e.ebic_after < e.ebic_before)) fail("EBIC did not strictly decrease");
                if (last_ebic && e.ebic_before != *last_ebic)
                    fail("EBIC chain broken between acceptances");
                last_ebic = e.ebic_after;
                ++row_accepts;
                ++block_accepts;
                break;
            }
            case TraceEventKind::RowAbandoned: {
                if (!in_row) fail("row abandoned while no row is open");
                if (e.k != cur_k || e.j != cur_j || e.row_a != cur_a)
                    fail("abandon event does not match open row");
                if (row_accepts != 0) fail("contributing row marked abandoned");
                in_row = false;
                after_abandoned_row = true;
                break;
            }
            case TraceEventKind::BlockClosed: {
                if (!in_block) fail("block closed while no block is open");
                if (e.k != cur_k || e.j != cur_j) fail("close event does not match open block");
                if (in_row && row_accepts == 0) fail("block closed over an unresolved empty row");
                if (block_accepts < 1) fail("block without entries closed instead of terminating");
                in_block = false;
                in_row = false;
                break;
            }
            case TraceEventKind::Terminated: {
                if (in_row && row_accepts == 0) fail("terminated over an unresolved empty row");
                if (in_block && block_accepts > 0) fail("terminated inside a contributing block");
                terminated = true;
                break;
            }
        }
    }
    if (!terminated) fail("trace does not end with a termination event");
    if (static_cast<long long>(accepted.size()) > total_cells)
        fail("more acceptances than coefficient cells");
}

// ---------------------------------------------------------------------------
// Fit configuration and result
// ---------------------------------------------------------------------------

/// Rule for auto-deriving the finalization threshold rho when no explicit
/// value is configured.
enum class ThresholdRule {
    /// rho = multiplier * sd(fitted values) * sqrt(2 ln p).
    CoefficientSd,
    /// rho = multiplier * mean OLS standard error of the fitted
    /// coefficients * sqrt(2 ln p).
    OlsStandardError,
};

struct SessConfig {
    EbicParams ebic;
    std::optional<double> threshold_rho;  ///< explicit rho; overrides the rule
    ThresholdRule threshold_rule = ThresholdRule::OlsStandardError;
    /// Adjustment factor on the auto-derived rho. The default of 2 was
    /// calibrated on the equal-size simulation grid: it removes the refit
    /// residue of proxy selections without touching genuine coefficients.
    double threshold_multiplier = 2.0;
    std::optional<int> max_entries_per_response;  ///< default n - 1
};

/// Sparse coefficient estimate in expanded block coordinates.
struct CoefficientEstimate {
    std::map<BlockCoordinate, double> entries;

    int support_size() const { return static_cast<int>(entries.size()); }
};

struct FitResult {
    CoefficientEstimate estimate;   ///< post-threshold, standardized units
    SelectionTrace trace;
    ModelState selection;           ///< raw selected set, before OLS + threshold
    double threshold_rho = 0.0;
};

/// Threshold from the dispersion of the fitted values themselves:
/// rho = multiplier * sample_sd(values) * sqrt(2 ln p). Zero when fewer than
/// two entries are fitted.
inline double derive_threshold(std::span<const double> fitted_values, int n, int p,
                               double multiplier = 1.0) {
    (void)n;
    if (fitted_values.empty() || p < 1) return 0.0;
    if (fitted_values.size() == 1) return 0.0;
    double mean = 0.0;
    for (double v : fitted_values) mean += v;
    mean /= static_cast<double>(fitted_values.size());
    double ss = 0.0;
    for (double v : fitted_values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(fitted_values.size() - 1));
    return multiplier * sd * std::sqrt(2.0 * std::log(static_cast<double>(p)));
}

/// Dense original-coordinate view of an estimate (overlapped copies summed).
inline Matrix collapse_estimate(const CoefficientEstimate& estimate, const GroupSpec& groups) {
    return collapse_to_original(estimate.entries, groups);
}

/// x_new * collapsed(estimate); x_new must use the training standardization.
inline Matrix predict(const CoefficientEstimate& estimate, const Matrix& x_new,
                      const GroupSpec& groups) {
    if (x_new.cols() != groups.predictor_span()) {
        throw DimensionMismatch("predict: x has " + std::to_string(x_new.cols()) +
                                " columns, groups define " +
                                std::to_string(groups.predictor_span()));
    }
    return x_new * collapse_estimate(estimate, groups);
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

namespace detail {

class SessDriver {
public:
    SessDriver(const ExpandedDataset& data, const GroupSpec& groups, const SessConfig& config)
        : data_(data),
          groups_(groups),
          cfg_(config),
          n_(data.n()),
          K_(data.predictor_group_count()),
          J_(data.response_group_count()),
          p_exp_(static_cast<int>(data.x.cols())),
          q_exp_(static_cast<int>(data.y.cols())) {
        if (n_ < 2) throw InvalidConfig("fit: need at least 2 rows");
        if (cfg_.threshold_rho && *cfg_.threshold_rho < 0.0)
            throw InvalidConfig("fit: threshold rho must be nonnegative");
        cap_ = cfg_.max_entries_per_response.value_or(n_ - 1);
        if (cap_ < 1 || cap_ > n_ - 1) cap_ = n_ - 1;
        gamma_ = cfg_.ebic.gamma ? *cfg_.ebic.gamma : derive_gamma(n_, p_exp_);
        x_sizes_.resize(K_);
        y_sizes_.resize(J_);
        for (int k = 0; k < K_; ++k) x_sizes_[k] = data.x_block_size(k);
        for (int j = 0; j < J_; ++j) y_sizes_[j] = data.y_block_size(j);
    }

    FitResult run() {
        resid_ = data_.y;
        rss_.resize(q_exp_);
        for (int c = 0; c < q_exp_; ++c) rss_[c] = data_.y.col(c).squaredNorm();
        col_support_.assign(q_exp_, {});
        ebic_cur_ = ebic_from(rss_, block_counts_);

        while (true) {
            if (static_cast<int>(closed_.size()) == K_ * J_) {
                terminate("all_blocks_closed");
                break;
            }
            const CCScore block = pick_block();
            trace_.events.push_back({TraceEventKind::BlockChosen, block.k, block.j, -1, -1,
                                     block.value, 0.0, 0.0, {}});
            const int block_accepts = visit_block(block.k, block.j);
            if (block_accepts >= 1) {
                closed_.insert({block.k, block.j});
                trace_.events.push_back(
                    {TraceEventKind::BlockClosed, block.k, block.j, -1, -1, 0.0, 0.0, 0.0, {}});
            } else {
                terminate("block_without_entries");
                break;
            }
        }
        return finalize();
    }

private:
    CCScore pick_block() {
        std::vector<Matrix> residuals;
        residuals.reserve(J_);
        for (int j = 0; j < J_; ++j)
            residuals.push_back(resid_.middleCols(data_.y_offsets[j], y_sizes_[j]));
        return score_all_blocks(data_, residuals, closed_);
    }

    /// Step 2/3 loop for one selected block; returns entries accepted in it.
    int visit_block(int k, int j) {
        auto& exhausted = exhausted_rows_[{k, j}];
        int block_accepts = 0;
        while (true) {
            // Step 2: best remaining row by single-column canonical correlation.
            const Matrix y_resid_block = resid_.middleCols(data_.y_offsets[j], y_sizes_[j]);
            int best_a = -1;
            double best_score = 0.0;
            for (int a = 0; a < x_sizes_[k]; ++a) {
                if (exhausted.count(a)) continue;
                const double s =
                    row_cc(data_.x.col(data_.x_offsets[k] + a), y_resid_block).value;
                if (best_a == -1 || s > best_score) {
                    best_a = a;
                    best_score = s;
                }
            }
            if (best_a == -1) break;  // every row of this block already contributed
            trace_.events.push_back(
                {TraceEventKind::RowChosen, k, j, best_a, -1, best_score, 0.0, 0.0, {}});

            const int row_accepts = scan_row(k, j, best_a);
            block_accepts += row_accepts;
            if (row_accepts >= 1) {
                exhausted.insert(best_a);
            } else {
                trace_.events.push_back(
                    {TraceEventKind::RowAbandoned, k, j, best_a, -1, 0.0, 0.0, 0.0, {}});
                break;
            }
        }
        return block_accepts;
    }

    /// Step 3: repeatedly accept the EBIC-argmin entry of row a while it
    /// strictly improves on the current model.
    int scan_row(int k, int j, int a) {
        const int pred = data_.x_offsets[k] + a;
        std::vector<int> remaining;
        for (int m = 0; m < y_sizes_[j]; ++m) {
            if (!selected_.count({k, j, a, m})) remaining.push_back(m);
        }
        int accepts = 0;
        while (!remaining.empty()) {
            int best_m = -1;
            double best_ebic = 0.0;
            double best_rss = 0.0;
            Vector best_resid;
            for (int m : remaining) {
                const int col = data_.y_offsets[j] + m;
                if (static_cast<int>(col_support_[col].size()) + 1 > cap_) continue;
                Vector cand_resid;
                const double cand_rss = column_rss_with(col, pred, &cand_resid);
                std::vector<double> rss_cand = rss_;
                rss_cand[col] = cand_rss;
                auto counts_cand = block_counts_;
                ++counts_cand[{k, j}];
                double e;
                try {
                    e = ebic_from(rss_cand, counts_cand);
                } catch (const PerfectFit&) {
                    continue;  // degenerate candidate: log of a vanished residual
                }
                if (best_m == -1 || e < best_ebic) {
                    best_m = m;
                    best_ebic = e;
                    best_rss = cand_rss;
                    best_resid = std::move(cand_resid);
                }
            }
            if (best_m == -1 || best_ebic >= ebic_cur_) break;

            const int col = data_.y_offsets[j] + best_m;
            auto& sup = col_support_[col];
            sup.insert(std::lower_bound(sup.begin(), sup.end(), pred), pred);
            rss_[col] = best_rss;
            resid_.col(col) = best_resid;
            ++block_counts_[{k, j}];
            selected_.insert({k, j, a, best_m});
            const double before = ebic_cur_;
            ebic_cur_ = best_ebic;
            trace_.events.push_back({TraceEventKind::EntryAccepted, k, j, a, best_m, 0.0, before,
                                     ebic_cur_, {}});
            remaining.erase(std::find(remaining.begin(), remaining.end(), best_m));
            ++accepts;
        }
        return accepts;
    }

    /// Residual sum of squares (and residual vector) of response column
    /// `col` refit on its support plus predictor `extra`.
    double column_rss_with(int col, int extra, Vector* resid_out) const {
        const auto& sup = col_support_[col];
        std::vector<int> s(sup);
        s.insert(std::lower_bound(s.begin(), s.end(), extra), extra);
        Matrix design(n_, s.size());
        for (std::size_t i = 0; i < s.size(); ++i) design.col(i) = data_.x.col(s[i]);
        auto sol = least_squares(design, data_.y.col(col));
        if (resid_out) *resid_out = sol.residuals.col(0);
        return sol.residuals.squaredNorm();
    }

    /// EBIC from cached per-column residual norms and block entry counts.
    /// Matches criterion ebic() exactly: same least-squares path upstream,
    /// same summation order here.
    double ebic_from(const std::vector<double>& rss,
                     const std::map<std::pair<int, int>, int>& counts) const {
        double fit_term = 0.0;
        for (int c = 0; c < q_exp_; ++c) {
            if (rss[c] <= 1e-300)
                throw PerfectFit("fit: residual norm underflow in response column " +
                                 std::to_string(c));
            fit_term += std::log(rss[c] / n_);
        }
        fit_term *= n_;
        return fit_term +
               ebic_penalty(counts, n_, K_, J_, x_sizes_, y_sizes_, cfg_.ebic, gamma_);
    }

    void terminate(const std::string& reason) {
        trace_.events.push_back(
            {TraceEventKind::Terminated, -1, -1, -1, -1, 0.0, 0.0, 0.0, reason});
    }

    /// OLS refit per original response on the collapsed support, then
    /// threshold. Returns the finished estimate.
    FitResult finalize() {
        // Original cell -> representative coordinate (first in block order).
        std::map<std::pair<int, int>, BlockCoordinate> cells;
        for (const auto& coord : selected_) {
            const int i_orig = data_.x_origin[data_.x_offsets[coord.k] + coord.row_a];
            const int l_orig = data_.y_origin[data_.y_offsets[coord.j] + coord.col_m];
            cells.emplace(std::pair{i_orig, l_orig}, coord);
        }
        std::map<int, std::vector<int>> support_by_response;
        for (const auto& [cell, coord] : cells) support_by_response[cell.second].push_back(cell.first);

        // First expanded copy of each original column.
        std::vector<int> x_copy(data_.p_orig, -1), y_copy(data_.q_orig, -1);
        for (int c = 0; c < p_exp_; ++c)
            if (x_copy[data_.x_origin[c]] < 0) x_copy[data_.x_origin[c]] = c;
        for (int c = 0; c < q_exp_; ++c)
            if (y_copy[data_.y_origin[c]] < 0) y_copy[data_.y_origin[c]] = c;

        struct Fitted {
            std::pair<int, int> cell;
            double value;
            double se;
        };
        std::vector<Fitted> fitted;
        for (const auto& [l_orig, preds] : support_by_response) {
            Matrix design(n_, preds.size());
            for (std::size_t i = 0; i < preds.size(); ++i)
                design.col(i) = data_.x.col(x_copy[preds[i]]);
            const Vector y_col = data_.y.col(y_copy[l_orig]);
            auto sol = least_squares(design, y_col);
            const double rss = sol.residuals.squaredNorm();
            const int s = static_cast<int>(preds.size());
            const double sigma2 = (n_ > s) ? rss / static_cast<double>(n_ - s) : 0.0;
            const Matrix ginv = regularized_gram_inverse(design);
            for (std::size_t i = 0; i < preds.size(); ++i) {
                const double var = sigma2 * std::max(ginv(i, i), 0.0);
                fitted.push_back({{preds[i], l_orig}, sol.coefficients(i, 0), std::sqrt(var)});
            }
        }

        double rho = 0.0;
        if (cfg_.threshold_rho) {
            rho = *cfg_.threshold_rho;
        } else if (!fitted.empty()) {
            if (cfg_.threshold_rule == ThresholdRule::CoefficientSd) {
                std::vector<double> values;
                values.reserve(fitted.size());
                for (const auto& f : fitted) values.push_back(f.value);
                rho = derive_threshold(values, n_, p_exp_, cfg_.threshold_multiplier);
            } else {
                double mean_se = 0.0;
                for (const auto& f : fitted) mean_se += f.se;
                mean_se /= static_cast<double>(fitted.size());
                rho = cfg_.threshold_multiplier * mean_se *
                      std::sqrt(2.0 * std::log(static_cast<double>(p_exp_)));
            }
        }

        FitResult out;
        out.threshold_rho = rho;
        out.selection.selected = selected_;
        out.trace = std::move(trace_);
        for (const auto& f : fitted) {
            if (f.value != 0.0 && std::abs(f.value) >= rho) {
                out.estimate.entries.emplace(cells.at(f.cell), f.value);
            }
        }
        return out;
    }

    const ExpandedDataset& data_;
    const GroupSpec& groups_;
    SessConfig cfg_;
    int n_, K_, J_, p_exp_, q_exp_;
    int cap_ = 0;
    double gamma_ = 0.0;
    std::vector<int> x_sizes_, y_sizes_;

    Matrix resid_;
    std::vector<double> rss_;
    std::vector<std::vector<int>> col_support_;
    std::set<std::pair<int, int>> closed_;
    std::map<std::pair<int, int>, std::set<int>> exhausted_rows_;
    std::map<std::pair<int, int>, int> block_counts_;
    std::set<BlockCoordinate> selected_;
    double ebic_cur_ = 0.0;
    SelectionTrace trace_;
};

}  // namespace detail

/// Run the full sequential selection on standardized, expanded data:
/// block choice by canonical-correlation trace, row choice by single-column
/// CC, greedy entry acceptance under strict EBIC decrease, then OLS
/// refitting with thresholding. Deterministic for fixed inputs and config.
inline FitResult fit(const ExpandedDataset& data, const GroupSpec& groups,
                     const SessConfig& config = {}) {
    return detail::SessDriver(data, groups, config).run();
}

}  // namespace sess
