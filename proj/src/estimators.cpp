#include "rct/estimators.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "rct/csv.hpp"
#include "rct/error.hpp"
#include "rct/normal.hpp"

namespace rct {

EstimateWithCI EstimateWithCI::wald(double estimate, double variance, double alpha) {
    const double half = wald_critical_value(alpha) * std::sqrt(variance);
    return {estimate, variance, estimate - half, estimate + half, alpha};
}

namespace {

void require_binary(const ObservedStudy& study) {
    study.validate();
    if (study.n_arms() > 2)
        throw ParameterError(fmt::format("estimator needs a binary study, found {} arms",
                                         study.n_arms()));
}

EstimateWithCI difference_of_arm_means(const Vector& values, const std::vector<Arm>& arm,
                                       double alpha) {
    double sum[2] = {0.0, 0.0};
    int count[2] = {0, 0};
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        sum[arm[i]] += values[i];
        ++count[arm[i]];
    }
    for (int k = 0; k < 2; ++k)
        if (count[k] < 2)
            throw InsufficientDataError(
                fmt::format("arm {} has {} plots; at least 2 are needed", k, count[k]));
    const double mean[2] = {sum[0] / count[0], sum[1] / count[1]};
    double ss[2] = {0.0, 0.0};
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double d = values[i] - mean[arm[i]];
        ss[arm[i]] += d * d;
    }
    const double var0 = ss[0] / (count[0] - 1);
    const double var1 = ss[1] / (count[1] - 1);
    return EstimateWithCI::wald(mean[1] - mean[0], var0 / count[0] + var1 / count[1], alpha);
}

double sample_sd(const Vector& x) {
    const double m = x.mean();
    return std::sqrt((x.array() - m).square().sum() / static_cast<double>(x.size() - 1));
}

}  // namespace

EstimateWithCI diff_in_means(const ObservedStudy& study, double alpha) {
    require_binary(study);
    return difference_of_arm_means(study.outcome_obs, study.arm, alpha);
}

EstimateWithCI diff_in_diffs(const ObservedStudy& study, double alpha) {
    require_binary(study);
    return difference_of_arm_means(study.differences(), study.arm, alpha);
}

InteractionResult ols_interaction(const ObservedStudy& study, double alpha,
                                  const InteractionOptions& options) {
    require_binary(study);
    const auto n = static_cast<Eigen::Index>(study.n());
    const auto p = study.covariates_obs.cols();
    const auto q = 2 * p;
    if (n <= q)
        throw InsufficientDataError(
            fmt::format("interacted OLS with {} coefficients needs more than {} plots", q, n));
    const auto counts = study.arm_counts();
    if (counts[0] < 1 || counts[1] < 1)
        throw InsufficientDataError("interacted OLS needs plots in both arms");

    Matrix x = study.covariates_obs.rightCols(p - 1);
    Vector scale = Vector::Ones(p - 1);
    if (options.standardize_covariates) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double sd = sample_sd(x.col(j));
            if (!(sd > 0.0))
                throw SingularityError(
                    fmt::format("covariate {} is constant across plots", j + 1),
                    static_cast<std::size_t>(2 + j));
            scale[j] = sd;
            x.col(j) /= sd;
        }
    }
    const Eigen::RowVectorXd x_bar = x.colwise().mean();

    Matrix w(n, q);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = study.arm[i] == 1 ? 1.0 : 0.0;
        w(i, 0) = 1.0;
        w(i, 1) = z;
        for (Eigen::Index j = 0; j < p - 1; ++j) {
            w(i, 2 + j) = x(i, j);
            w(i, 1 + p + j) = z * (x(i, j) - x_bar[j]);
        }
    }

    auto ls = fit_least_squares(w, study.outcome_obs);
    InteractionResult result;
    result.fit.sandwich_cov = sandwich_hc0(ls);
    result.fit.coeffs = std::move(ls.coefficients);
    result.fit.residuals = std::move(ls.residuals);
    result.fit.fitted = std::move(ls.fitted);
    result.fit.design_rows = std::move(w);
    result.fit.covariate_scale = std::move(scale);

    const auto& v = result.fit.sandwich_cov;
    result.tau = EstimateWithCI::wald(result.fit.coeffs[1], v(1, 1), alpha);
    for (Eigen::Index j = 0; j < p - 1; ++j) {
        const auto idx = 1 + p + j;
        result.moderators.push_back(EstimateWithCI::wald(result.fit.coeffs[idx], v(idx, idx), alpha));
    }
    return result;
}

EstimateWithCI naive_moderator(const ObservedStudy& study, double alpha) {
    study.validate();
    const auto n = static_cast<Eigen::Index>(study.n());
    if (n < 3) throw InsufficientDataError("naive moderator needs at least 3 plots");
    const Vector& b = study.baseline_obs;
    const double sd = sample_sd(b);
    if (!(sd > 0.0)) throw SingularityError("baseline has zero variance", 1);
    Matrix design(n, 2);
    design.col(0).setOnes();
    design.col(1) = (b.array() - b.mean()) / sd;
    const auto fit = fit_least_squares(design, study.differences());
    const Matrix v = sandwich_hc0(fit);
    return EstimateWithCI::wald(fit.coefficients[1], v(1, 1), alpha);
}

void write_estimate_header(std::ostream& out) {
    csv::write_row(out, {"estimator", "estimate", "variance", "ci_lower", "ci_upper", "alpha"});
}

void write_estimate_row(std::ostream& out, const std::string& name, const EstimateWithCI& e) {
    csv::write_row(out, {name, csv::format_double(e.estimate), csv::format_double(e.variance),
                         csv::format_double(e.ci_lower), csv::format_double(e.ci_upper),
                         csv::format_double(e.alpha)});
}

}  // namespace rct
