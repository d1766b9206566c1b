#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <tuple>
#include <utility>

#include "sess/groups.hpp"
#include "sess/numerics.hpp"

namespace sess {

/// All evaluation measures for one fit. Support measures use exact-zero
/// semantics: a cell counts as selected iff its value is not 0.0.
struct MetricsReport {
    double pdr = 0.0;
    double fdr = 0.0;
    double dr = 0.0;
    double bdr = 0.0;
    double l1_err = 0.0;
    double l2_err = 0.0;
    long nne = 0;
    std::optional<double> mse;
    std::optional<double> mspe;
    double wall_time_s = 0.0;
};

namespace detail {

inline void check_same_shape(const Matrix& a, const Matrix& b, const char* where) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionMismatch(std::string(where) + ": shapes differ");
    }
}

}  // namespace detail

/// Entry-level discovery rates. PDR = recovered true cells / true cells,
/// FDR = false cells / selected cells, DR = PDR + 1 - FDR. Conventions:
/// PDR = 1 when the true support is empty, FDR = 0 when nothing is selected.
inline std::tuple<double, double, double> support_metrics(const Matrix& b_hat,
                                                          const Matrix& b_true) {
    detail::check_same_shape(b_hat, b_true, "support_metrics");
    long true_cells = 0, selected = 0, hits = 0, false_sel = 0;
    for (Eigen::Index c = 0; c < b_true.cols(); ++c) {
        for (Eigen::Index r = 0; r < b_true.rows(); ++r) {
            const bool t = b_true(r, c) != 0.0;
            const bool s = b_hat(r, c) != 0.0;
            true_cells += t;
            selected += s;
            hits += (t && s);
            false_sel += (s && !t);
        }
    }
    const double pdr = (true_cells == 0) ? 1.0 : static_cast<double>(hits) / true_cells;
    const double fdr = (selected == 0) ? 0.0 : static_cast<double>(false_sel) / selected;
    return {pdr, fdr, pdr + 1.0 - fdr};
}

/// Block-level DR: a block counts as selected (or true) when it contains at
/// least one nonzero cell; each (k, j) pair counts once even under overlap.
inline double block_metrics(const Matrix& b_hat, const Matrix& b_true, const GroupSpec& groups) {
    detail::check_same_shape(b_hat, b_true, "block_metrics");
    std::set<std::pair<int, int>> true_blocks, sel_blocks;
    for (int k = 0; k < groups.predictor_group_count(); ++k) {
        for (int j = 0; j < groups.response_group_count(); ++j) {
            bool any_true = false, any_sel = false;
            for (int i : groups.predictor_groups[k]) {
                for (int l : groups.response_groups[j]) {
                    any_true = any_true || b_true(i, l) != 0.0;
                    any_sel = any_sel || b_hat(i, l) != 0.0;
                }
            }
            if (any_true) true_blocks.insert({k, j});
            if (any_sel) sel_blocks.insert({k, j});
        }
    }
    long hits = 0, false_sel = 0;
    for (const auto& b : sel_blocks) {
        if (true_blocks.count(b)) {
            ++hits;
        } else {
            ++false_sel;
        }
    }
    const double pdr =
        true_blocks.empty() ? 1.0 : static_cast<double>(hits) / true_blocks.size();
    const double fdr =
        sel_blocks.empty() ? 0.0 : static_cast<double>(false_sel) / sel_blocks.size();
    return pdr + 1.0 - fdr;
}

/// Entrywise l1 and Frobenius errors of b_hat - b_true.
inline std::pair<double, double> error_norms(const Matrix& b_hat, const Matrix& b_true) {
    detail::check_same_shape(b_hat, b_true, "error_norms");
    const Matrix diff = b_hat - b_true;
    return {diff.cwiseAbs().sum(), diff.norm()};
}

/// Training MSE, test MSPE (mean squared residual per response cell) and
/// support size of an original-coordinate estimate. Callers pass data in the
/// same (e.g. centered) convention the estimate was fit in.
inline std::tuple<double, double, long> prediction_metrics(const Matrix& b_hat,
                                                           const Matrix& x_train,
                                                           const Matrix& y_train,
                                                           const Matrix& x_test,
                                                           const Matrix& y_test) {
    if (x_train.cols() != b_hat.rows() || x_test.cols() != b_hat.rows()) {
        throw DimensionMismatch("prediction_metrics: predictor count != coefficient rows");
    }
    if (y_train.cols() != b_hat.cols() || y_test.cols() != b_hat.cols()) {
        throw DimensionMismatch("prediction_metrics: response count != coefficient cols");
    }
    if (x_train.rows() != y_train.rows() || x_test.rows() != y_test.rows()) {
        throw DimensionMismatch("prediction_metrics: X/Y row counts differ");
    }
    const double mse = (y_train - x_train * b_hat).squaredNorm() /
                       static_cast<double>(y_train.rows() * y_train.cols());
    const double mspe = (y_test - x_test * b_hat).squaredNorm() /
                        static_cast<double>(y_test.rows() * y_test.cols());
    const long nne = (b_hat.array() != 0.0).count();
    return {mse, mspe, nne};
}

}  // namespace sess
