#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "sess/groups.hpp"
#include "sess/numerics.hpp"
#include "sess/rng.hpp"

namespace sess {

struct GroupScheme {
    enum class Kind { Equal, Unequal };
    Kind kind = Kind::Equal;
    int equal_size = 20;
    int unequal_small = 20;
    int unequal_large = 30;
};

struct SimConfig {
    int n = 150;
    int p = 200;
    int q = 200;
    double sparsity = 0.95;  ///< fraction of diagonal-block cells zeroed
    GroupScheme scheme;
    double ar_rho = 0.5;
    std::uint64_t seed = 1;
};

struct SimDataset {
    Matrix x;       ///< n x p, columns standardized
    Matrix y;       ///< n x q, x * b_true + noise (not re-standardized)
    Matrix b_true;  ///< p x q, zero off the diagonal blocks
    GroupSpec groups;
    double sigma2 = 0.0;
};

/// Rows i.i.d. N(0, Sigma) with Sigma_st = ar_rho^|s-t|, built by the AR(1)
/// recursion x_t = rho x_{t-1} + sqrt(1-rho^2) z_t (no p x p factorization).
/// Columns are standardized afterwards, which perturbs the correlation
/// structure by O(1/sqrt(n)).
inline Matrix gen_design(int n, int p, double ar_rho, Rng& rng) {
    if (n < 2 || p < 1) throw InvalidArgs("gen_design: need n >= 2 and p >= 1");
    Matrix x(n, p);
    const double innovation = std::sqrt(1.0 - ar_rho * ar_rho);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        for (int t = 1; t < p; ++t) x(i, t) = ar_rho * x(i, t - 1) + innovation * rng.normal();
    }
    return standardize_columns(x).values;
}

namespace detail {

/// Left-to-right sizes drawn from {small, large}; a draw that would leave an
/// unrepresentable remainder is flipped to the other size.
inline std::vector<int> draw_partition(int total, int small, int large, Rng& rng) {
    auto representable = [&](int r) {
        if (r == 0) return true;
        for (int a = 0; a * small <= r; ++a) {
            if ((r - a * small) % large == 0) return true;
        }
        return false;
    };
    if (!representable(total)) {
        throw InfeasiblePartition("no sequence of sizes {" + std::to_string(small) + "," +
                                  std::to_string(large) + "} sums to " + std::to_string(total));
    }
    std::vector<int> sizes;
    int remaining = total;
    while (remaining > 0) {
        int d = (rng.uniform() < 0.5) ? small : large;
        if (d > remaining || !representable(remaining - d)) d = (d == small) ? large : small;
        if (d > remaining || !representable(remaining - d)) {
            throw InfeasiblePartition("partition backtracking failed at remainder " +
                                      std::to_string(remaining));
        }
        sizes.push_back(d);
        remaining -= d;
    }
    return sizes;
}

inline std::vector<std::vector<int>> contiguous_groups(const std::vector<int>& sizes) {
    std::vector<std::vector<int>> groups;
    int next = 0;
    for (int s : sizes) {
        std::vector<int> g(s);
        for (int i = 0; i < s; ++i) g[i] = next++;
        groups.push_back(std::move(g));
    }
    return groups;
}

}  // namespace detail

/// Contiguous non-overlapping groups in index order. Equal scheme requires
/// the size to divide p (and q) exactly; the unequal scheme draws sizes from
/// {20, 30} at random. Predictor sizes are drawn before response sizes.
inline GroupSpec gen_groups(const GroupScheme& scheme, int p, int q, Rng& rng) {
    GroupSpec spec;
    if (scheme.kind == GroupScheme::Kind::Equal) {
        if (scheme.equal_size < 1 || p % scheme.equal_size != 0 || q % scheme.equal_size != 0) {
            throw InfeasiblePartition("equal group size " + std::to_string(scheme.equal_size) +
                                      " does not divide p=" + std::to_string(p) +
                                      " and q=" + std::to_string(q));
        }
        spec.predictor_groups =
            detail::contiguous_groups(std::vector<int>(p / scheme.equal_size, scheme.equal_size));
        spec.response_groups =
            detail::contiguous_groups(std::vector<int>(q / scheme.equal_size, scheme.equal_size));
    } else {
        spec.predictor_groups = detail::contiguous_groups(
            detail::draw_partition(p, scheme.unequal_small, scheme.unequal_large, rng));
        spec.response_groups = detail::contiguous_groups(
            detail::draw_partition(q, scheme.unequal_small, scheme.unequal_large, rng));
    }
    return spec;
}

/// Diagonal-block coefficients: blocks B_kk for k < min(K, J) are filled
/// with sign-symmetric draws of magnitude Uniform[1, 5], then
/// round(sparsity * cell count) of those cells are zeroed uniformly at
/// random. All other blocks are zero.
inline Matrix gen_coefficients(const GroupSpec& groups, double sparsity, int p, int q, Rng& rng) {
    if (sparsity < 0.0 || sparsity > 1.0) throw InvalidArgs("gen_coefficients: sparsity in [0,1]");
    Matrix b = Matrix::Zero(p, q);
    const int diag_blocks =
        std::min(groups.predictor_group_count(), groups.response_group_count());
    std::vector<std::pair<int, int>> diag_cells;
    for (int k = 0; k < diag_blocks; ++k) {
        for (int i : groups.predictor_groups[k]) {
            for (int l : groups.response_groups[k]) {
                const double magnitude = rng.uniform(1.0, 5.0);
                const double sign = (rng.uniform() < 0.5) ? -1.0 : 1.0;
                b(i, l) = sign * magnitude;
                diag_cells.emplace_back(i, l);
            }
        }
    }
    const auto n_zero = static_cast<std::size_t>(
        std::llround(sparsity * static_cast<double>(diag_cells.size())));
    // Partial Fisher-Yates: the first n_zero positions are the zeroed subset.
    for (std::size_t i = 0; i < n_zero && i < diag_cells.size(); ++i) {
        const std::size_t pick = i + static_cast<std::size_t>(rng.below(diag_cells.size() - i));
        std::swap(diag_cells[i], diag_cells[pick]);
        b(diag_cells[i].first, diag_cells[i].second) = 0.0;
    }
    return b;
}

/// Response matrix y = x * b + E with E i.i.d. N(0, sigma2) and
/// sigma2 = V1 / (5 q), V1 the sum of empirical (population) column
/// variances of x * b. Returns (y, sigma2). A zero coefficient matrix gives
/// zero noise and y = x * b exactly.
inline std::pair<Matrix, double> gen_noise_and_response(const Matrix& x, const Matrix& b_true,
                                                        Rng& rng) {
    if (x.cols() != b_true.rows()) {
        throw DimensionMismatch("gen_noise_and_response: x columns != coefficient rows");
    }
    const auto n = x.rows();
    const auto q = b_true.cols();
    Matrix signal = x * b_true;
    double v1 = 0.0;
    for (Eigen::Index l = 0; l < q; ++l) {
        const double mean = signal.col(l).mean();
        v1 += (signal.col(l).array() - mean).square().sum() / static_cast<double>(n);
    }
    const double sigma2 = v1 / (5.0 * static_cast<double>(q));
    if (sigma2 <= 0.0) return {std::move(signal), 0.0};
    const double sd = std::sqrt(sigma2);
    Matrix y = signal;
    for (Eigen::Index l = 0; l < q; ++l) {
        for (Eigen::Index i = 0; i < n; ++i) y(i, l) += rng.normal(0.0, sd);
    }
    return {std::move(y), sigma2};
}

/// Full dataset from one config. Each component draws from its own named
/// substream of the seed ("groups", "design", "coefficients", "noise"), so
/// changing one component's consumption leaves the others untouched.
inline SimDataset generate(const SimConfig& config) {
    if (config.n < 2) throw InvalidConfig("generate: n >= 2 required");
    if (config.p < 1 || config.q < 1) throw InvalidConfig("generate: p, q >= 1 required");
    SimDataset ds;
    {
        Rng rng = Rng::stream(config.seed, "groups");
        ds.groups = gen_groups(config.scheme, config.p, config.q, rng);
    }
    {
        Rng rng = Rng::stream(config.seed, "design");
        ds.x = gen_design(config.n, config.p, config.ar_rho, rng);
    }
    {
        Rng rng = Rng::stream(config.seed, "coefficients");
        ds.b_true = gen_coefficients(ds.groups, config.sparsity, config.p, config.q, rng);
    }
    {
        Rng rng = Rng::stream(config.seed, "noise");
        auto [y, sigma2] = gen_noise_and_response(ds.x, ds.b_true, rng);
        ds.y = std::move(y);
        ds.sigma2 = sigma2;
    }
    return ds;
}

}  // namespace sess
