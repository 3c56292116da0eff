#include "rct/linalg.hpp"

#include <fmt/format.h>

#include "rct/error.hpp"

namespace rct {

LeastSquaresFit fit_least_squares(const Matrix& design, const Vector& response) {
    const auto n = design.rows();
    const auto q = design.cols();
    if (response.size() != n)
        throw DimensionError(fmt::format("least squares: design has {} rows but response has {}",
                                         n, response.size()));
    if (q == 0) throw DimensionError("least squares: design has no columns");
    if (n < q)
        throw InsufficientDataError(
            fmt::format("least squares: {} observations for {} coefficients", n, q));

    Eigen::HouseholderQR<Matrix> qr(design);
    const Matrix& packed = qr.matrixQR();
    for (Eigen::Index j = 0; j < q; ++j) {
        const double col_norm = design.col(j).norm();
        const double rjj = std::abs(packed(j, j));
        if (!(col_norm > 0.0) || !(rjj > kRankTolerance * col_norm))
            throw SingularityError(
                fmt::format("least squares: design column {} is linearly dependent on "
                            "preceding columns",
                            j),
                static_cast<std::size_t>(j));
    }

    LeastSquaresFit fit;
    const auto r = packed.topLeftCorner(q, q).triangularView<Eigen::Upper>();
    fit.q_thin = qr.householderQ() * Matrix::Identity(n, q);
    fit.coefficients = r.solve(fit.q_thin.transpose() * response);
    fit.r_inverse = r.solve(Matrix::Identity(q, q));
    fit.fitted = design * fit.coefficients;
    fit.residuals = response - fit.fitted;
    return fit;
}

Vector least_squares(const Matrix& design, const Vector& response) {
    return fit_least_squares(design, response).coefficients;
}

Matrix sandwich_hc0(const LeastSquaresFit& fit) {
    // X (X'X)^{-1} = Q R R^{-1} R^{-T} = Q R^{-T}, so the sandwich reduces to
    // R^{-1} (Q' diag(e^2) Q) R^{-T}.
    const Matrix weighted = fit.q_thin.array().colwise() * fit.residuals.array().square();
    const Matrix meat = fit.q_thin.transpose() * weighted;
    Matrix v = fit.r_inverse * meat * fit.r_inverse.transpose();
    return 0.5 * (v + v.transpose());
}

Matrix classical_covariance(const LeastSquaresFit& fit) {
    const auto n = fit.residuals.size();
    const auto q = fit.coefficients.size();
    if (n <= q) throw InsufficientDataError("classical covariance needs n > q");
    const double s2 = fit.residuals.squaredNorm() / static_cast<double>(n - q);
    return s2 * fit.r_inverse * fit.r_inverse.transpose();
}

}  // namespace rct
