#pragma once

#include <set>
#include <utility>
#include <vector>

#include "sess/groups.hpp"
#include "sess/numerics.hpp"

namespace sess {

/// Canonical-correlation score. `k`/`j` identify the block pair when the
/// score came from block scanning; `row_a` is set for row-level scores.
struct CCScore {
    double value = 0.0;
    int k = -1;
    int j = -1;
    int row_a = -1;
};

/// Trace of the sample canonical-correlation matrix between the columns of
/// x_block and the columns of y_resid: equals the sum of squared sample
/// canonical correlations, so 0 <= value <= min(cols(x), cols(y)).
///
/// Both Gram factors are inverted with the spectral-cutoff pseudo-inverse,
/// so rank-deficient residual matrices degrade gracefully.
inline CCScore cc_trace(const Matrix& x_block, const Matrix& y_resid) {
    if (x_block.rows() != y_resid.rows()) {
        throw DimensionMismatch("cc_trace: row counts differ");
    }
    const Matrix gx_inv = regularized_gram_inverse(x_block);
    const Matrix gy_inv = regularized_gram_inverse(y_resid);
    const Matrix cross = x_block.transpose() * y_resid;  // |Xk| x |Yj|
    // tr((X'X)^+ X'Y (Y'Y)^+ Y'X) = sum of (Gx^+ M Gy^+) .* M
    const Matrix t = gx_inv * cross * gy_inv;
    CCScore s;
    s.value = t.cwiseProduct(cross).sum();
    return s;
}

/// cc_trace specialized to a single predictor column:
/// x' Y (Y'Y)^+ Y' x / (x'x).
inline CCScore row_cc(const Matrix& x_col, const Matrix& y_resid) {
    if (x_col.cols() != 1) throw InvalidArgs("row_cc: x must have exactly one column");
    if (x_col.rows() != y_resid.rows()) throw DimensionMismatch("row_cc: row counts differ");
    const double xtx = x_col.squaredNorm();
    if (xtx == 0.0) throw ZeroColumn("row_cc: predictor column is identically zero");
    const Matrix gy_inv = regularized_gram_inverse(y_resid);
    const Vector v = y_resid.transpose() * x_col;
    CCScore s;
    s.value = v.dot(gy_inv * v) / xtx;
    return s;
}

/// Argmax of cc_trace over all (k, j) block pairs not in `excluded`,
/// scoring block k of data.x against residuals[j]. Ties break to the
/// smallest (k, then j), independent of evaluation schedule.
inline CCScore score_all_blocks(const ExpandedDataset& data, const std::vector<Matrix>& residuals,
                                const std::set<std::pair<int, int>>& excluded) {
    const int K = data.predictor_group_count();
    const int J = data.response_group_count();
    if (static_cast<int>(residuals.size()) != J) {
        throw DimensionMismatch("score_all_blocks: one residual matrix per response group required");
    }
    CCScore best;
    bool found = false;
    std::vector<Matrix> gy_inv(J);  // shared across k
    std::vector<bool> gy_done(J, false);
    for (int k = 0; k < K; ++k) {
        const auto xb = data.x_block(k);
        const Matrix gx_inv = regularized_gram_inverse(xb);
        for (int j = 0; j < J; ++j) {
            if (excluded.count({k, j})) continue;
            if (!gy_done[j]) {
                gy_inv[j] = regularized_gram_inverse(residuals[j]);
                gy_done[j] = true;
            }
            const Matrix cross = xb.transpose() * residuals[j];
            const double value = (gx_inv * cross * gy_inv[j]).cwiseProduct(cross).sum();
            if (!found || value > best.value) {
                best.value = value;
                best.k = k;
                best.j = j;
                found = true;
            }
        }
    }
    if (!found) throw AllBlocksExcluded("score_all_blocks: no block pair left to score");
    return best;
}

}  // namespace sess
