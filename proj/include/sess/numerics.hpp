#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

#include "sess/errors.hpp"

namespace sess {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative spectral cutoff shared by the rank-deficiency handling below.
inline constexpr double kSpectralCutoff = 1e-10;

/// Standardized matrix plus the affine map back to original units:
/// original_col = values_col * scale[c] + center[c].
struct StandardizeResult {
    Matrix values;
    Vector center;
    Vector scale;
};

/// Center every column to mean zero and rescale so each column has
/// squared norm n (population variance 1).
///
/// Throws ConstantColumn when a column has zero sample variance.
inline StandardizeResult standardize_columns(const Matrix& m) {
    const auto n = m.rows();
    if (n < 2) throw InvalidArgs("standardize_columns: need at least 2 rows");
    StandardizeResult out;
    out.values.resize(n, m.cols());
    out.center.resize(m.cols());
    out.scale.resize(m.cols());
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double mean = m.col(c).mean();
        Vector centered = m.col(c).array() - mean;
        const double norm = centered.norm();
        // Constant columns leave only rounding residue after centering.
        if (norm / sqrt_n <= 1e-12 * (1.0 + std::abs(mean))) {
            throw ConstantColumn(static_cast<int>(c));
        }
        const double scale = norm / sqrt_n;
        out.values.col(c) = centered / scale;
        out.center[c] = mean;
        out.scale[c] = scale;
    }
    return out;
}

/// Least-squares solution of design * coefficients ~= rhs.
struct LstSqSolution {
    Matrix coefficients;  ///< (design cols) x (rhs cols)
    Matrix residuals;     ///< rhs - design * coefficients
    Eigen::Index rank;
};

/// Minimum-norm least squares via SVD with singular values below
/// sigma_max * 1e-10 treated as zero.
inline LstSqSolution least_squares(const Matrix& design, const Matrix& rhs) {
    if (design.rows() != rhs.rows()) {
        throw DimensionMismatch("least_squares: design has " + std::to_string(design.rows()) +
                                " rows, rhs has " + std::to_string(rhs.rows()));
    }
    LstSqSolution sol;
    if (design.cols() == 0) {
        sol.coefficients = Matrix::Zero(0, rhs.cols());
        sol.residuals = rhs;
        sol.rank = 0;
        return sol;
    }
    Eigen::BDCSVD<Matrix> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(kSpectralCutoff);
    sol.coefficients = svd.solve(rhs);
    sol.residuals = rhs - design * sol.coefficients;
    sol.rank = svd.rank();
    return sol;
}

/// Moore-Penrose pseudo-inverse of the Gram matrix m^T m, with eigenvalues
/// below lambda_max * 1e-10 dropped. Exact inverse when well conditioned.
inline Matrix regularized_gram_inverse(const Matrix& m) {
    const auto d = m.cols();
    if (d == 0) return Matrix(0, 0);
    const Matrix gram = m.transpose() * m;
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    const Vector& ev = es.eigenvalues();
    const double cutoff = ev.cwiseMax(0.0).maxCoeff() * kSpectralCutoff;
    Vector inv(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        inv[i] = (ev[i] > cutoff && ev[i] > 0.0) ? 1.0 / ev[i] : 0.0;
    }
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

/// ln C(n, k) via log-gamma. Exact symmetry log_binomial(n,k) == log_binomial(n,n-k).
inline double log_binomial(long long n, long long k) {
    if (k < 0 || n < 0 || k > n) {
        throw InvalidArgs("log_binomial: require 0 <= k <= n, got n=" + std::to_string(n) +
                          " k=" + std::to_string(k));
    }
    if (k == 0 || k == n) return 0.0;
    return std::lgamma(static_cast<double>(n) + 1.0) -
           (std::lgamma(static_cast<double>(k) + 1.0) +
            std::lgamma(static_cast<double>(n - k) + 1.0));
}

}  // namespace sess
