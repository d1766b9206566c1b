#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "sess/groups.hpp"
#include "sess/numerics.hpp"

namespace sess {

/// Tuning parameters of the extended BIC. When `gamma` is unset it is
/// derived from the data as derive_gamma(n, expanded predictor count).
struct EbicParams {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    std::optional<double> gamma;
};

/// gamma = 1 - ln n / (2 ln p). Returned as computed; small p relative to n
/// makes it negative, which weakens the combinatorial penalty.
inline double derive_gamma(int n, int p) {
    if (n < 2 || p < 2) throw InvalidArgs("derive_gamma: need n >= 2 and p >= 2");
    return 1.0 - std::log(static_cast<double>(n)) / (2.0 * std::log(static_cast<double>(p)));
}

/// A candidate model: the set of selected coefficient positions.
struct ModelState {
    std::set<BlockCoordinate> selected;

    /// Number of distinct nonzero blocks.
    int block_count() const { return static_cast<int>(entries_per_block().size()); }

    /// (k, j) -> number of selected entries in that block.
    std::map<std::pair<int, int>, int> entries_per_block() const {
        std::map<std::pair<int, int>, int> counts;
        for (const auto& c : selected) ++counts[{c.k, c.j}];
        return counts;
    }
};

namespace detail {

/// Model-complexity part of the EBIC, from block-level entry counts.
inline double ebic_penalty(const std::map<std::pair<int, int>, int>& block_counts, int n, int K,
                           int J, const std::vector<int>& x_sizes, const std::vector<int>& y_sizes,
                           const EbicParams& params, double gamma) {
    const double log_n = std::log(static_cast<double>(n));
    long long total_entries = 0;
    double block_binomials = 0.0;
    for (const auto& [kj, r] : block_counts) {
        total_entries += r;
        const long long block_cells =
            static_cast<long long>(x_sizes[kj.first]) * y_sizes[kj.second];
        block_binomials += log_binomial(block_cells, r);
    }
    const long long m = static_cast<long long>(block_counts.size());
    return params.lambda1 * static_cast<double>(total_entries) * log_n +
           2.0 * params.lambda2 * gamma *
               (log_binomial(static_cast<long long>(K) * J, m) + block_binomials);
}

}  // namespace detail

/// Extended BIC of a model state:
///
///   n * sum_c ln( rss_c / n )
///   + lambda1 * (total selected entries) * ln n
///   + 2 * lambda2 * gamma * ( ln C(K*J, m) + sum over blocks of ln C(|B_kj|, r_kj) )
///
/// where rss_c is the residual sum of squares of expanded response column c
/// after the least-squares fit on the predictors selected for it. The
/// goodness-of-fit term decomposes per response column (the per-column
/// Gaussian profile likelihood); a grouped variant that lumps whole response
/// groups into one log is so diluted by group width that no single entry
/// could ever be accepted at realistic dimensions.
///
/// Throws Overcapacity when some column's support reaches n, and PerfectFit
/// when a column residual norm underflows (the log is undefined there).
inline double ebic(const ModelState& state, const ExpandedDataset& data,
                   const EbicParams& params) {
    const int n = data.n();
    const int q_exp = static_cast<int>(data.y.cols());

    std::vector<std::vector<int>> support(q_exp);
    for (const auto& c : state.selected) {
        const int col = data.y_offsets[c.j] + c.col_m;
        const int pred = data.x_offsets[c.k] + c.row_a;
        support[col].push_back(pred);
    }

    std::vector<double> rss(q_exp);
    for (int c = 0; c < q_exp; ++c) {
        if (support[c].empty()) {
            rss[c] = data.y.col(c).squaredNorm();
            continue;
        }
        auto& s = support[c];
        std::sort(s.begin(), s.end());
        if (static_cast<int>(s.size()) >= n) {
            throw Overcapacity("ebic: response column " + std::to_string(c) + " has " +
                               std::to_string(s.size()) + " selected predictors for n=" +
                               std::to_string(n));
        }
        Matrix design(n, s.size());
        for (std::size_t i = 0; i < s.size(); ++i) design.col(i) = data.x.col(s[i]);
        rss[c] = least_squares(design, data.y.col(c)).residuals.squaredNorm();
    }

    double fit_term = 0.0;
    for (int c = 0; c < q_exp; ++c) {
        if (rss[c] <= 1e-300) {
            throw PerfectFit("ebic: residual norm underflow in response column " +
                             std::to_string(c));
        }
        fit_term += std::log(rss[c] / n);
    }
    fit_term *= n;

    std::vector<int> x_sizes(data.predictor_group_count());
    std::vector<int> y_sizes(data.response_group_count());
    for (int k = 0; k < data.predictor_group_count(); ++k) x_sizes[k] = data.x_block_size(k);
    for (int j = 0; j < data.response_group_count(); ++j) y_sizes[j] = data.y_block_size(j);

    const double gamma =
        params.gamma ? *params.gamma : derive_gamma(n, static_cast<int>(data.x.cols()));
    return fit_term + detail::ebic_penalty(state.entries_per_block(), n,
                                           data.predictor_group_count(),
                                           data.response_group_count(), x_sizes, y_sizes, params,
                                           gamma);
}

}  // namespace sess
