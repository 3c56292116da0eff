#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rct/design.hpp"
#include "rct/linalg.hpp"

namespace rct {

/// Point estimate with an equal-tailed Wald interval at level 1 - alpha.
struct EstimateWithCI {
    double estimate = 0.0;
    double variance = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    double alpha = 0.05;

    /// estimate -/+ z_{alpha/2} sqrt(variance).
    static EstimateWithCI wald(double estimate, double variance, double alpha);
    double width() const noexcept { return ci_upper - ci_lower; }
    bool covers(double value) const noexcept { return ci_lower <= value && value <= ci_upper; }
};

/// Interacted regression of Y on W_i = [1, Z_i, X_i, Z_i (X_i - Xbar)].
/// X_i excludes the intercept column, so with p covariate columns the
/// design has 2p columns.
struct InteractionFit {
    Vector coeffs;
    Matrix sandwich_cov;
    Vector residuals;
    Vector fitted;
    Matrix design_rows;
    /// Scale applied to each non-intercept covariate before fitting (1 when
    /// not standardized).
    Vector covariate_scale;
};

struct InteractionResult {
    EstimateWithCI tau;
    /// One entry per non-intercept covariate (interaction coefficients).
    std::vector<EstimateWithCI> moderators;
    InteractionFit fit;
};

struct InteractionOptions {
    /// Divide each non-intercept covariate by its sample SD so moderator
    /// coefficients are per SD. The treatment coefficient is unaffected.
    bool standardize_covariates = true;
};

EstimateWithCI diff_in_means(const ObservedStudy& study, double alpha = 0.05);

/// diff_in_means on D_i = Y_i - B_i.
EstimateWithCI diff_in_diffs(const ObservedStudy& study, double alpha = 0.05);

/// Treatment-by-covariate interacted OLS with HC0 sandwich variance.
InteractionResult ols_interaction(const ObservedStudy& study, double alpha = 0.05,
                                  const InteractionOptions& options = {});

/// Slope of D_i = Y_i - B_i on standardized B_i, pooled across arms, with HC0 variance.
/// This is the regression-to-the-mean prone estimator of the moderator effect.
EstimateWithCI naive_moderator(const ObservedStudy& study, double alpha = 0.05);

/// CSV serialization: `estimator,estimate,variance,ci_lower,ci_upper,alpha`.
void write_estimate_header(std::ostream& out);
void write_estimate_row(std::ostream& out, const std::string& name, const EstimateWithCI& e);

}  // namespace rct
