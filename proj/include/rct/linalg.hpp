#pragma once

#include <Eigen/Dense>

namespace rct {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative tolerance on |R_jj| / ||a_j|| below which column j of a design is
/// treated as linearly dependent on the columns before it.
inline constexpr double kRankTolerance = 1e-10;

/// Ordinary least-squares fit via Householder QR.
struct LeastSquaresFit {
    Vector coefficients;
    Vector fitted;
    Vector residuals;
    /// Thin orthonormal factor Q (n x q) with design = Q R.
    Matrix q_thin;
    /// R^{-1} (q x q, upper triangular), so (X'X)^{-1} = R^{-1} R^{-T}.
    Matrix r_inverse;
};

/// Fits `response` on `design` by least squares.
///
/// Throws InsufficientDataError when rows < columns, SingularityError naming
/// the first dependent column when the design is rank deficient, and
/// DimensionError on shape mismatch.
LeastSquaresFit fit_least_squares(const Matrix& design, const Vector& response);

/// Coefficients only.
Vector least_squares(const Matrix& design, const Vector& response);

/// HC0 sandwich covariance (X'X)^{-1} X' diag(e^2) X (X'X)^{-1} of a fit.
Matrix sandwich_hc0(const LeastSquaresFit& fit);

/// Classical homoskedastic covariance s^2 (X'X)^{-1} with s^2 = e'e / (n - q).
Matrix classical_covariance(const LeastSquaresFit& fit);

}  // namespace rct
